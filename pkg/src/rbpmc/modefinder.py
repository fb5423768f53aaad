"""
Grid-based mode census of a 2-D log-density surface.

Modes are local maxima over the 8-neighbourhood of a cell-centred grid.
Cells are totally ordered by (value descending, flat index ascending), so a
plateau yields a single representative. Candidates whose prominence above
their highest connecting saddle falls below ``min_prominence`` are merged
into the dominant mode they meet at that saddle. Every cell is then labelled
with the surviving mode its steepest-ascent path reaches.

The census works on any square log-density grid, not only on the benchmark
posterior.
"""

import logging
from collections.abc import Sequence
from typing import Optional

import numpy as np

from rbpmc.datamodel import (
    NO_BASIN,
    DetectionScore,
    Mode,
    ModeCensus,
    ObservedSample,
    PriorSquare,
    Stat,
    Theta,
)
from rbpmc.errors import EmptySurfaceError
from rbpmc.target import grid_log_posterior
from rbpmc.validators import check_count

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 200
DEFAULT_MIN_PROMINENCE = 1.0
DEFAULT_MIN_COUNT = 1

_OFFSETS = tuple((di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0))


def _ascent_parents(grid: np.ndarray) -> np.ndarray:
    """Flat index of the highest cell (in the total order) of each cell's closed 8-neighbourhood."""
    rows, cols = grid.shape
    flat = np.arange(grid.size).reshape(rows, cols)
    padded_values = np.pad(grid, 1, constant_values=-np.inf)
    padded_index = np.pad(flat, 1, constant_values=grid.size)
    best_value = grid.copy()
    best_index = flat.copy()
    for di, dj in _OFFSETS:
        value = padded_values[1 + di:1 + di + rows, 1 + dj:1 + dj + cols]
        index = padded_index[1 + di:1 + di + rows, 1 + dj:1 + dj + cols]
        better = (value > best_value) | ((value == best_value) & (index < best_index))
        best_value = np.where(better, value, best_value)
        best_index = np.where(better, index, best_index)
    return best_index.ravel()


def _ascent_roots(parents: np.ndarray) -> np.ndarray:
    roots = parents.copy()
    while True:
        hop = roots[roots]
        if np.array_equal(hop, roots):
            return roots
        roots = hop


def _prominences(grid: np.ndarray) -> tuple[dict[int, float], dict[int, int]]:
    """
    Prominence of every local maximum and the peak it merges into.

    Cells are added in decreasing order; when a cell joins components with
    different peaks, every peak but the highest is assigned its height
    above that cell (the saddle) and recorded as merged into the highest.
    A peak whose only saddle is a -inf cell keeps an infinite prominence;
    a peak that is itself -inf has none.

    Returns:
        (prominence by peak cell, dominant peak by merged peak cell)
    """
    rows, cols = grid.shape
    values = grid.ravel()
    order = np.lexsort((np.arange(values.size), -values))
    component = np.full(values.size, -1, dtype=np.int64)
    peak_of = {}
    prominence: dict[int, float] = {}
    merged_into: dict[int, int] = {}

    def find(cell: int) -> int:
        root = cell
        while component[root] != root:
            root = component[root]
        while component[cell] != root:
            component[cell], cell = root, component[cell]
        return root

    for cell in order.tolist():
        i, j = divmod(cell, cols)
        roots = set()
        for di, dj in _OFFSETS:
            ni, nj = i + di, j + dj
            if 0 <= ni < rows and 0 <= nj < cols:
                neighbour = ni * cols + nj
                if component[neighbour] >= 0:
                    roots.add(find(neighbour))
        if not roots:
            component[cell] = cell
            peak_of[cell] = cell
            continue
        ranked = sorted(roots, key=lambda r: (-values[peak_of[r]], peak_of[r]))
        top = ranked[0]
        component[cell] = top
        for other in ranked[1:]:
            peak = peak_of[other]
            if values[peak] == -np.inf:
                prominence[peak] = 0.0
            elif values[cell] == -np.inf:
                # islands separated only by -inf cells never merge
                prominence[peak] = np.inf
            else:
                prominence[peak] = float(values[peak] - values[cell])
            merged_into[peak] = peak_of[top]
            component[other] = top

    for root in {find(cell) for cell in peak_of}:
        prominence[peak_of[root]] = np.inf
    return prominence, merged_into


def find_modes(
    grid,
    prior: PriorSquare,
    min_prominence: float = DEFAULT_MIN_PROMINENCE,
) -> ModeCensus:
    """
    Census of the local maxima of a square log-density grid and their basins.

    Args:
        grid: Array of shape (R, R); ``grid[i, j]`` is the value at (centers[i], centers[j])
        prior: Square the grid covers
        min_prominence: Candidates less prominent than this (in log-density units) are merged

    Returns:
        ModeCensus with modes ordered by decreasing log-density
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
        raise ValueError(f"grid must be square, got shape {grid.shape}")
    check_count("resolution", grid.shape[0], minimum=1)
    if np.any(np.isnan(grid)) or np.any(grid == np.inf):
        raise ValueError("grid must not contain NaN or +inf")
    if not np.any(np.isfinite(grid)):
        raise EmptySurfaceError("every grid cell is -inf")

    resolution = grid.shape[0]
    values = grid.ravel()
    roots = _ascent_roots(_ascent_parents(grid))
    prominence, merged_into = _prominences(grid)

    def survives(peak: int) -> bool:
        prom = prominence[peak]
        return prom == np.inf or (prom > 0 and prom >= min_prominence)

    def resolve(peak: int) -> int:
        while not survives(peak):
            peak = merged_into[peak]
        return peak

    candidates = np.unique(roots)
    survivors = sorted({resolve(int(c)) for c in candidates}, key=lambda c: (-values[c], c))
    index_of = {peak: k for k, peak in enumerate(survivors)}
    label_of_cell = np.full(values.size, -1, dtype=np.int64)
    for candidate in candidates.tolist():
        label_of_cell[candidate] = index_of[resolve(candidate)]
    labels = label_of_cell[roots].reshape(resolution, resolution)

    centers = prior.cell_centers(resolution)
    modes = []
    for peak in survivors:
        i, j = divmod(peak, resolution)
        modes.append(Mode(
            cell=(i, j),
            location=Theta(float(centers[i]), float(centers[j])),
            log_density=float(values[peak]),
            prominence=float(prominence[peak]),
        ))
    logger.debug("%d local maxima, %d modes after merging", candidates.size, len(modes))
    return ModeCensus(tuple(modes), labels, resolution, prior)


def census_for_sample(
    sample: ObservedSample,
    prior: PriorSquare,
    resolution: int = DEFAULT_RESOLUTION,
    min_prominence: float = DEFAULT_MIN_PROMINENCE,
    workers: int = 1,
) -> ModeCensus:
    """Grid the posterior of ``sample`` and run :func:`find_modes` on it."""
    grid = grid_log_posterior(sample, prior, resolution, workers=workers)
    return find_modes(grid, prior, min_prominence)


def assign_basins(points, census: ModeCensus) -> np.ndarray:
    """Mode index of each row of ``points``; ``NO_BASIN`` outside the prior square."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    prior = census.prior
    if points.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    inside = prior.contains(points) & np.all(np.isfinite(points), axis=1)
    cells = np.floor((np.nan_to_num(points) - prior.lo) / prior.cell_width(census.resolution))
    cells = np.clip(cells, 0, census.resolution - 1).astype(np.int64)
    labels = census.basin_labels[cells[:, 0], cells[:, 1]]
    return np.where(inside, labels, NO_BASIN)


def assign_basin(theta: Theta, census: ModeCensus) -> int:
    """Mode whose basin of attraction contains ``theta`` (``NO_BASIN`` outside the square)."""
    return int(assign_basins(np.asarray(theta, dtype=float)[np.newaxis, :], census)[0])


def detection_score(
    particles,
    census: ModeCensus,
    min_count: int = DEFAULT_MIN_COUNT,
) -> DetectionScore:
    """
    Count the census modes whose basin holds at least ``min_count`` particles.

    Args:
        particles: Array of shape (M, 2), possibly empty
        census: Mode census
        min_count: Particles needed for a mode to count as detected

    Returns:
        DetectionScore over all census modes
    """
    check_count("min_count", min_count)
    labels = assign_basins(particles, census)
    counts = np.bincount(labels[labels != NO_BASIN], minlength=census.n_modes)
    per_mode = tuple(bool(c >= min_count) for c in counts)
    return DetectionScore(detected=sum(per_mode), total=census.n_modes, per_mode=per_mode)


def mode_count_stats(
    samples: Sequence[ObservedSample],
    prior: Optional[PriorSquare] = None,
    resolution: int = DEFAULT_RESOLUTION,
    min_prominence: float = DEFAULT_MIN_PROMINENCE,
    margin: float = 2.0,
) -> Stat:
    """
    Mean and standard deviation of the number of modes over several samples.

    Args:
        samples: At least two observed samples
        prior: Shared prior square; derived from each sample's data when omitted
        resolution: Grid cells per axis
        min_prominence: Merge threshold passed to :func:`find_modes`
        margin: Margin for data-derived prior squares

    Returns:
        Stat over the per-sample mode counts
    """
    if len(samples) < 2:
        raise ValueError("mode_count_stats needs at least two samples")
    counts = []
    for sample in samples:
        square = prior if prior is not None else PriorSquare.from_data(sample.data, margin)
        counts.append(census_for_sample(sample, square, resolution, min_prominence).n_modes)
    return Stat.of(counts)
