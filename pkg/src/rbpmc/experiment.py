"""
Factorial sweep comparing single and double Rao-Blackwellised PMC.

Each cell (n, p, mu2, sigma2) runs a number of replicates. A replicate
generates one artificial sample, builds one mode census, and runs both
schemes on that same sample and census with independent random streams.
Detection rates are scored on the resampled clouds after the early snapshot
iteration and after the last iteration; only the PMC loop is timed.
"""

import logging
import math
import time
from collections import defaultdict
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product, repeat
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import ttest_rel

from rbpmc.config import RunConfig, SweepConfig
from rbpmc.datamodel import (
    NO_COMPONENT,
    CellKey,
    CellResult,
    CellTiming,
    CurveRow,
    MixtureHyper,
    ObservedSample,
    ParticleCloud,
    PriorSquare,
    ResampledCloud,
    Scheme,
    SchemeComparison,
    SchemeOutcome,
    Stat,
    SweepReport,
)
from rbpmc.errors import PmcRunError
from rbpmc.kernel import KernelMixture
from rbpmc.modefinder import census_for_sample, detection_score
from rbpmc.pmc import PmcResult, run_pmc
from rbpmc.rng import data_stream, pmc_stream
from rbpmc.target import MixturePosterior, generate_artificial_sample

logger = logging.getLogger(__name__)

COMPARED_SCHEMES = (Scheme.SINGLE_RB, Scheme.DOUBLE_RB)

# marginalized axis -> axis the capture-rate curve is drawn against
MARGINAL_AXES = {"sigma2": "mu2", "p": "n"}

CURVE_METRICS = ("single_early", "single_final", "double_early", "double_final")

_EMPTY_SNAPSHOT = ResampledCloud(np.empty((0, 2)), 0)
_CONTROL_CLOUD = ParticleCloud(
    particles=np.zeros((1, 2)),
    log_weights=np.zeros(1),
    norm_weights=np.ones(1),
    components=np.full(1, NO_COMPONENT),
    ancestors=np.zeros(1, dtype=np.int64),
    iteration=0,
)


@dataclass
class _SchemeTrace:
    early: list[Optional[float]] = field(default_factory=list)
    final: list[Optional[float]] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    failures: int = 0


def sweep_cells(sweep: SweepConfig) -> list[CellKey]:
    """Cells of the factorial sweep in canonical (n, p, mu2, sigma2) order."""
    return [
        CellKey(int(n), float(p), float(mu2), float(sigma2))
        for n, p, mu2, sigma2 in product(
            sweep.n_values, sweep.p_values, sweep.mu2_values, sweep.sigma2_values
        )
    ]


def prior_for(data, config: RunConfig) -> PriorSquare:
    """Configured prior square, or the data-derived default."""
    target = config.target
    if target.prior_lo is not None:
        return PriorSquare(target.prior_lo, target.prior_hi)
    return PriorSquare.from_data(data, target.prior_margin)


def snapshot_iterations(config: RunConfig) -> tuple[int, int]:
    final = config.pmc.iterations
    return min(config.pmc.early_snapshot, final), final


def run_scheme(
    target,
    prior,
    config: RunConfig,
    scheme: Scheme,
    rng: Optional[np.random.Generator],
    runner: Callable[..., PmcResult] = run_pmc,
) -> PmcResult:
    """One PMC run with the configured kernels and settings."""
    pmc = config.pmc
    mix0 = KernelMixture.from_scales(config.kernel.scales, config.kernel.alpha)
    return runner(
        target,
        prior,
        mix0,
        scheme,
        N=pmc.particles,
        T=pmc.iterations,
        rng=rng,
        initial=pmc.initial_proposal,
        mu0_scale=pmc.initial_scale,
        alpha_floor=config.kernel.alpha_floor,
        double_rb_alpha=pmc.double_rb_alpha,
        truncation_radius=pmc.truncation_radius,
    )


def no_op_pmc(target, prior, mix0: KernelMixture, scheme: Scheme, *, T: int, **settings) -> PmcResult:
    """Control scheme for the timing harness: T + 1 empty snapshots, nothing sampled."""
    return PmcResult(Scheme.from_label(scheme), [_EMPTY_SNAPSHOT] * (T + 1), _CONTROL_CLOUD, mix0)


def timed_snapshots(
    target,
    prior,
    config: RunConfig,
    scheme: Scheme,
    rng: Optional[np.random.Generator],
    runner: Callable[..., PmcResult] = run_pmc,
) -> tuple[ResampledCloud, ResampledCloud, float]:
    """
    Run one scheme and extract its early and final snapshots under the clock.

    Returns:
        (early snapshot, final snapshot, seconds)
    """
    early_t, final_t = snapshot_iterations(config)
    start = time.perf_counter()
    result = run_scheme(target, prior, config, scheme, rng, runner)
    early, final = result.snapshot(early_t), result.snapshot(final_t)
    return early, final, time.perf_counter() - start


def run_cell(cell: CellKey, config: RunConfig) -> CellResult:
    """
    Run every replicate of one sweep cell.

    Replicate failures are counted and the cell proceeds.

    Args:
        cell: Cell coordinates
        config: Full configuration; ``config.seed`` roots every stream

    Returns:
        Aggregated CellResult (timing attached)
    """
    replicates = config.sweep.replicates
    traces = {scheme: _SchemeTrace() for scheme in COMPARED_SCHEMES}
    mode_counts = []
    overheads = []

    for replicate in range(replicates):
        data = generate_artificial_sample(cell.n, cell.mu2, data_stream(config.seed, cell, replicate))
        sample = ObservedSample(data, MixtureHyper(cell.p, config.target.sigma1, cell.sigma2))
        prior = prior_for(data, config)
        census = census_for_sample(
            sample, prior, config.census.resolution, config.census.min_prominence
        )
        mode_counts.append(census.n_modes)
        target = MixturePosterior(sample, prior)

        for scheme, trace in traces.items():
            rng = pmc_stream(config.seed, cell, replicate, scheme)
            try:
                early, final, seconds = timed_snapshots(target, prior, config, scheme, rng)
            except PmcRunError as exc:
                logger.warning("cell %s replicate %d: %s", tuple(cell), replicate, exc)
                trace.failures += 1
                trace.early.append(None)
                trace.final.append(None)
                continue
            trace.seconds.append(seconds)
            for snapshot, rates in ((early, trace.early), (final, trace.final)):
                rates.append(detection_score(snapshot.particles, census, config.census.min_count).rate)
        *_, control = timed_snapshots(target, prior, config, Scheme.SINGLE_RB, None, runner=no_op_pmc)
        overheads.append(control)

    outcomes = {
        scheme: SchemeOutcome(
            early=Stat.of(trace.early),
            final=Stat.of(trace.final),
            failures=trace.failures,
            early_rates=trace.early,
            final_rates=trace.final,
        )
        for scheme, trace in traces.items()
    }
    logger.info("cell %s done (%d modes on average)", tuple(cell), round(float(np.mean(mode_counts))))
    return CellResult(
        n=cell.n,
        p=cell.p,
        mu2=cell.mu2,
        sigma2=cell.sigma2,
        replicates=replicates,
        single_replicate=replicates == 1,
        mode_count=Stat.of(mode_counts),
        single=outcomes[Scheme.SINGLE_RB],
        double=outcomes[Scheme.DOUBLE_RB],
        timing=CellTiming(
            single=Stat.of(traces[Scheme.SINGLE_RB].seconds),
            double=Stat.of(traces[Scheme.DOUBLE_RB].seconds),
            harness_overhead=float(np.mean(overheads)),
        ),
    )


def _cell_metric(cell: CellResult, metric: str) -> float:
    if metric == "mode_count":
        return cell.mode_count.mean
    scheme, _, which = metric.partition("_")
    if which == "cpu":
        return getattr(cell.timing, scheme).mean if cell.timing else math.nan
    return getattr(getattr(cell, scheme), which).mean


def _finite_mean(values: Iterable[float]) -> float:
    finite = [v for v in values if math.isfinite(v)]
    return float(np.mean(finite)) if finite else math.nan


def marginalize(report: SweepReport, axis: str) -> list[CurveRow]:
    """
    Capture-rate curves after averaging over ``axis``.

    ``axis="sigma2"`` gives rates against mu2, ``axis="p"`` rates against n;
    each point is the unweighted mean over all cells sharing that value.

    Args:
        report: Sweep report with at least one cell
        axis: ``"sigma2"`` or ``"p"``

    Returns:
        One CurveRow per value of the remaining axis, in increasing order
    """
    if axis not in MARGINAL_AXES:
        raise ValueError(f"cannot marginalize over {axis!r}; expected one of {sorted(MARGINAL_AXES)}")
    if not report.cells:
        raise ValueError("report has no cells")
    along = MARGINAL_AXES[axis]
    groups = defaultdict(list)
    for cell in report.cells:
        groups[getattr(cell, along)].append(cell)
    return [
        CurveRow(
            value=float(value),
            **{m: _finite_mean(_cell_metric(c, m) for c in groups[value]) for m in CURVE_METRICS},
        )
        for value in sorted(groups)
    ]


def pivot(report: SweepReport, rows: str, cols: Optional[str], metric: str) -> dict:
    """
    Table layout of a metric: mean over all cells sharing (row value, column value).

    Args:
        report: Sweep report
        rows: Cell attribute for table rows (e.g. ``"sigma2"``)
        cols: Cell attribute for columns (e.g. ``"mu2"``), or ``None`` for a single column
        metric: ``mode_count``, ``<scheme>_early``, ``<scheme>_final`` or ``<scheme>_cpu``

    Returns:
        Mapping with ``rows``, ``cols`` and ``values`` (list of lists)
    """
    groups = defaultdict(list)
    for cell in report.cells:
        key = (getattr(cell, rows), getattr(cell, cols) if cols else metric)
        groups[key].append(_cell_metric(cell, metric))
    row_values = sorted({r for r, _ in groups})
    col_values = sorted({c for _, c in groups}) if cols else [metric]
    values = [
        [_finite_mean(groups.get((r, c), [])) for c in col_values] for r in row_values
    ]
    return {"rows": row_values, "cols": col_values, "values": values}


def compare_schemes(cells: list[CellResult]) -> SchemeComparison:
    """
    Paired comparison of double against single RB over all replicates.

    The gap is the mean of (double - single) detection rates; the p-value comes
    from a one-sided paired t-test (double greater). The drop of a scheme is its
    mean rate loss between the early and final snapshots.
    """

    def paired(which: str) -> tuple[np.ndarray, np.ndarray]:
        single, double = [], []
        for cell in cells:
            for s, d in zip(getattr(cell.single, f"{which}_rates"), getattr(cell.double, f"{which}_rates")):
                if s is not None and d is not None:
                    single.append(s)
                    double.append(d)
        return np.asarray(single), np.asarray(double)

    def pvalue(single: np.ndarray, double: np.ndarray) -> Optional[float]:
        if single.size < 2 or np.all(double - single == (double - single)[0]):
            return None
        result = ttest_rel(double, single, alternative="greater")
        return float(result.pvalue) if math.isfinite(result.pvalue) else None

    def drop(outcome_name: str) -> float:
        losses = []
        for cell in cells:
            outcome = getattr(cell, outcome_name)
            losses.extend(
                e - f for e, f in zip(outcome.early_rates, outcome.final_rates)
                if e is not None and f is not None
            )
        return float(np.mean(losses)) if losses else math.nan

    single_early, double_early = paired("early")
    single_final, double_final = paired("final")
    return SchemeComparison(
        pairs_early=int(single_early.size),
        pairs_final=int(single_final.size),
        gap_early=float(np.mean(double_early - single_early)) if single_early.size else math.nan,
        gap_final=float(np.mean(double_final - single_final)) if single_final.size else math.nan,
        pvalue_early=pvalue(single_early, double_early),
        pvalue_final=pvalue(single_final, double_final),
        single_drop=drop("single"),
        double_drop=drop("double"),
    )


def config_echo(config: RunConfig) -> dict:
    """Configuration recorded in reports; execution-only settings are left out."""
    return config.model_dump(mode="json", exclude={"threads", "output_dir"})


def build_report(config: RunConfig, cells: list[CellResult], total_seconds: Optional[float] = None) -> SweepReport:
    early_t, final_t = snapshot_iterations(config)
    report = SweepReport(
        config=config_echo(config),
        early_iteration=early_t,
        final_iteration=final_t,
        cells=cells,
        total_seconds=total_seconds,
    )
    if cells:
        report.marginals = {axis: marginalize(report, axis) for axis in MARGINAL_AXES}
        report.comparison = compare_schemes(cells)
    return report


def run_sweep(
    config: RunConfig,
    workers: Optional[int] = None,
    on_cell: Optional[Callable[[CellResult], None]] = None,
) -> SweepReport:
    """
    Run every cell of the configured sweep and aggregate the results.

    Cells are independent and run on a bounded process pool; results are
    collected in canonical cell order, so the report does not depend on the
    number of workers.

    Args:
        config: Full configuration
        workers: Worker processes (default ``config.threads``)
        on_cell: Called with each finished CellResult, in canonical order

    Returns:
        SweepReport
    """
    workers = config.threads if workers is None else workers
    cells = sweep_cells(config.sweep)
    logger.info("sweep of %d cells x %d replicates on %d worker(s)", len(cells), config.sweep.replicates, workers)
    start = time.perf_counter()
    results: list[CellResult] = []
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for result in pool.map(run_cell, cells, repeat(config)):
                results.append(result)
                if on_cell:
                    on_cell(result)
    else:
        for cell in cells:
            result = run_cell(cell, config)
            results.append(result)
            if on_cell:
                on_cell(result)
    return build_report(config, results, total_seconds=time.perf_counter() - start)


def render_curves(
    marginals: dict[str, list[CurveRow]],
    early_iteration: int,
    final_iteration: int,
    out_dir: Path,
) -> list[Path]:
    """
    Write ``capture_vs_<axis>.svg`` for each marginalization.

    Every curve table is checked before any file is written.
    """
    from rbpmc.render import PlotRenderer

    for axis in MARGINAL_AXES:
        if not marginals.get(axis):
            raise ValueError(f"no capture-rate rows for the {axis} marginalization")
    renderer = PlotRenderer()
    written = []
    for axis, along in MARGINAL_AXES.items():
        path = Path(out_dir) / f"capture_vs_{along}.svg"
        renderer.render_capture_curves(
            marginals[axis], along, early_iteration, final_iteration, output_path=path
        )
        written.append(path)
    return written


def render_plots(report: SweepReport, out_dir: Path) -> list[Path]:
    """One capture-rate SVG per marginalization, four curves each (scheme x snapshot)."""
    if not report.cells:
        raise ValueError("report has no cells to plot")
    marginals = {axis: report.marginals.get(axis) or marginalize(report, axis) for axis in MARGINAL_AXES}
    return render_curves(marginals, report.early_iteration, report.final_iteration, out_dir)
