"""
Deterministic random streams.

Every stream is a counter-based Philox generator keyed by the root seed and a
path of integers (cell, replicate, stage, scheme). Streams never depend on
the order in which work items are executed, so adding a scheme or a cell
leaves the existing streams untouched.
"""

from enum import IntEnum

import numpy as np

from rbpmc.datamodel import CellKey, Scheme


class Stage(IntEnum):
    """Stage component of a stream path."""

    DATA = 0
    PMC = 1
    RUN = 2


SCHEME_CODES = {Scheme.NAIVE: 0, Scheme.SINGLE_RB: 1, Scheme.DOUBLE_RB: 2}


def stream(seed: int, *path: int) -> np.random.Generator:
    """
    Generator for the substream at ``path`` below ``seed``.

    Args:
        seed: Root seed
        *path: Non-negative integers identifying the substream

    Returns:
        Philox-backed ``numpy.random.Generator``
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(sequence))


def cell_code(cell: CellKey) -> tuple[int, int, int, int]:
    """Integer identity of a cell from its coordinates (values rounded to 1e-3)."""
    return (
        int(cell.n),
        int(round(cell.p * 1000)),
        int(round(cell.mu2 * 1000)),
        int(round(cell.sigma2 * 1000)),
    )


def data_stream(seed: int, cell: CellKey, replicate: int) -> np.random.Generator:
    return stream(seed, *cell_code(cell), replicate, Stage.DATA)


def pmc_stream(seed: int, cell: CellKey, replicate: int, scheme: Scheme) -> np.random.Generator:
    return stream(seed, *cell_code(cell), replicate, Stage.PMC, SCHEME_CODES[scheme])


def run_streams(seed: int, scheme: Scheme) -> tuple[np.random.Generator, np.random.Generator]:
    """Data and PMC streams for a single ``rbpmc run``."""
    return stream(seed, Stage.RUN, Stage.DATA), stream(seed, Stage.RUN, Stage.PMC, SCHEME_CODES[scheme])
