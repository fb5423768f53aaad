"""Tests for the sweep harness: cells, aggregation, comparison and plots."""

import math
import time

import pytest

from rbpmc.config import RunConfig
from rbpmc.datamodel import CellKey, CellResult, CellTiming, Scheme, SchemeOutcome, Stat, SweepReport
from rbpmc.experiment import (
    build_report,
    compare_schemes,
    marginalize,
    no_op_pmc,
    pivot,
    render_plots,
    run_cell,
    run_sweep,
    sweep_cells,
)
from rbpmc.export.report_export import dumps
from rbpmc.kernel import KernelMixture


def tiny_config(**sweep) -> RunConfig:
    return RunConfig.model_validate({
        "seed": 99,
        "pmc": {"particles": 60, "iterations": 3, "early_snapshot": 2},
        "census": {"resolution": 30},
        "sweep": {
            "n_values": [20],
            "p_values": [0.3],
            "mu2_values": [2.0],
            "sigma2_values": [1.0],
            "replicates": 2,
            **sweep,
        },
    })


def outcome(early, final):
    return SchemeOutcome(early=Stat.of([early]), final=Stat.of([final]), early_rates=[early], final_rates=[final])


def make_cell(n, p, mu2, sigma2, single, double, modes=2.0):
    return CellResult(
        n=n, p=p, mu2=mu2, sigma2=sigma2, replicates=1, single_replicate=True,
        mode_count=Stat.of([modes]), single=outcome(*single), double=outcome(*double),
        timing=CellTiming(single=Stat.of([0.1]), double=Stat.of([0.4]), harness_overhead=1e-6),
    )


@pytest.fixture
def two_by_two():
    """Cells over mu2 in {1, 2} and sigma2 in {1, 3} at fixed (n, p)."""
    cells = [
        make_cell(20, 0.3, 1.0, 1.0, (1.0, 0.5), (1.0, 1.0)),
        make_cell(20, 0.3, 1.0, 3.0, (0.5, 0.5), (1.0, 0.5)),
        make_cell(20, 0.3, 2.0, 1.0, (0.5, 0.0), (0.5, 0.5)),
        make_cell(20, 0.3, 2.0, 3.0, (0.0, 0.0), (1.0, 0.0)),
    ]
    return build_report(tiny_config(), cells)


def test_sweep_cells_in_canonical_order():
    config = tiny_config(n_values=[50, 20], p_values=[0.3, 0.5], mu2_values=[2.0], sigma2_values=[1.0, 3.0])
    cells = sweep_cells(config.sweep)
    assert len(cells) == 8
    assert cells[0] == CellKey(50, 0.3, 2.0, 1.0)
    assert cells[1] == CellKey(50, 0.3, 2.0, 3.0)
    assert cells[-1] == CellKey(20, 0.5, 2.0, 3.0)


def test_single_replicate_cell_reports_zero_sd():
    config = tiny_config(replicates=1)
    result = run_cell(sweep_cells(config.sweep)[0], config)
    assert result.single_replicate
    assert result.single.early.sd == 0.0
    assert result.double.final.sd == 0.0
    assert result.mode_count.sd == 0.0


def test_cell_rates_and_timing():
    config = tiny_config()
    result = run_cell(sweep_cells(config.sweep)[0], config)
    assert result.replicates == 2
    assert not result.single_replicate
    for scheme in (result.single, result.double):
        for rate in scheme.early_rates + scheme.final_rates:
            assert 0.0 <= rate <= 1.0
    assert result.mode_count.mean >= 1
    assert result.timing.single.count == 2
    assert result.timing.harness_overhead < 0.05 * result.timing.single.mean


def test_harness_overhead_times_the_real_dispatch(monkeypatch):
    """The control run builds the kernel mixture like a real run, so a slow build shows up."""
    build = KernelMixture.from_scales

    def slow_build(*args, **kwargs):
        time.sleep(0.02)
        return build(*args, **kwargs)

    monkeypatch.setattr(KernelMixture, "from_scales", staticmethod(slow_build))
    result = run_cell(sweep_cells(tiny_config(replicates=1).sweep)[0], tiny_config(replicates=1))
    assert result.timing.harness_overhead >= 0.02


def test_no_op_scheme_has_every_snapshot():
    config = tiny_config()
    mix0 = KernelMixture.from_scales(config.kernel.scales)
    result = no_op_pmc(None, None, mix0, Scheme.DOUBLE_RB, N=60, T=3)
    assert result.iterations == 3
    assert result.snapshot(3).size == 0


def test_large_sample_cell_runs_without_failures():
    """A thousand observations leave most previous weights at zero; no replicate fails."""
    config = RunConfig.model_validate({
        "seed": 2024,
        "pmc": {"particles": 1000, "iterations": 2, "early_snapshot": 1},
        "census": {"resolution": 30},
        "sweep": {
            "n_values": [1000],
            "p_values": [0.3],
            "mu2_values": [3.0],
            "sigma2_values": [1.0],
            "replicates": 2,
        },
    })
    result = run_cell(sweep_cells(config.sweep)[0], config)
    assert result.single.failures == 0
    assert result.double.failures == 0


def test_cell_is_reproducible():
    config = tiny_config()
    cell = sweep_cells(config.sweep)[0]
    first = run_cell(cell, config).model_dump(exclude={"timing"})
    second = run_cell(cell, config).model_dump(exclude={"timing"})
    assert first == second


def test_one_cell_sweep():
    report = run_sweep(tiny_config(), workers=1)
    assert len(report.cells) == 1
    assert report.early_iteration == 2
    assert report.final_iteration == 3
    assert report.total_seconds > 0
    assert set(report.marginals) == {"sigma2", "p"}


def test_report_does_not_depend_on_worker_count():
    config = tiny_config(sigma2_values=[1.0, 2.0], replicates=1)

    def deterministic_bytes(report):
        return dumps(report.model_dump(exclude={"total_seconds": True, "cells": {"__all__": {"timing"}}}))

    seen = []
    serial = run_sweep(config, workers=1, on_cell=seen.append)
    parallel = run_sweep(config, workers=2)
    assert deterministic_bytes(serial) == deterministic_bytes(parallel)
    assert [c.key for c in seen] == [c.key for c in serial.cells]


def test_config_echo_leaves_out_execution_settings():
    report = build_report(tiny_config(), [])
    assert "threads" not in report.config
    assert "output_dir" not in report.config
    assert report.config["seed"] == 99


def test_marginalize_over_sigma2_by_hand(two_by_two):
    rows = marginalize(two_by_two, "sigma2")
    assert [r.value for r in rows] == [1.0, 2.0]
    assert rows[0].single_early == pytest.approx(0.75)
    assert rows[0].single_final == pytest.approx(0.5)
    assert rows[0].double_final == pytest.approx(0.75)
    assert rows[1].single_early == pytest.approx(0.25)
    assert rows[1].double_early == pytest.approx(0.75)
    assert rows[1].double_final == pytest.approx(0.25)


def test_marginal_means_equal_recomputed_cell_means(two_by_two):
    for axis, along in (("sigma2", "mu2"), ("p", "n")):
        for row in two_by_two.marginals[axis]:
            cells = [c for c in two_by_two.cells if getattr(c, along) == row.value]
            expected = sum(c.double.final.mean for c in cells) / len(cells)
            assert abs(row.double_final - expected) < 1e-12


def test_single_level_marginal_is_the_raw_cell():
    cell = make_cell(20, 0.3, 1.0, 1.0, (0.8, 0.6), (0.9, 0.7))
    report = build_report(tiny_config(), [cell])
    (row,) = marginalize(report, "sigma2")
    assert (row.single_early, row.single_final, row.double_early, row.double_final) == (0.8, 0.6, 0.9, 0.7)


def test_marginalize_rejects_unknown_axis(two_by_two):
    with pytest.raises(ValueError):
        marginalize(two_by_two, "mu2")


def test_marginalize_needs_cells():
    with pytest.raises(ValueError):
        marginalize(SweepReport(config={}, early_iteration=5, final_iteration=10, cells=[]), "p")


def test_pivot_layout(two_by_two):
    table = pivot(two_by_two, "sigma2", "mu2", "single_early")
    assert table["rows"] == [1.0, 3.0]
    assert table["cols"] == [1.0, 2.0]
    assert table["values"] == [[1.0, 0.5], [0.5, 0.0]]
    cpu = pivot(two_by_two, "n", None, "double_cpu")
    assert cpu["values"] == [[pytest.approx(0.4)]]


def test_compare_schemes(two_by_two):
    comparison = compare_schemes(two_by_two.cells)
    assert comparison.pairs_early == 4
    assert comparison.gap_early == pytest.approx((0.0 + 0.5 + 0.0 + 1.0) / 4)
    assert comparison.gap_final == pytest.approx((0.5 + 0.0 + 0.5 + 0.0) / 4)
    assert comparison.single_drop == pytest.approx((0.5 + 0.0 + 0.5 + 0.0) / 4)
    assert comparison.double_drop == pytest.approx((0.0 + 0.5 + 0.0 + 1.0) / 4)
    assert 0.0 < comparison.pvalue_early < 0.5


def test_compare_schemes_without_variation_has_no_pvalue():
    cells = [make_cell(20, 0.3, 1.0, s, (0.5, 0.5), (0.5, 0.5)) for s in (1.0, 2.0)]
    comparison = compare_schemes(cells)
    assert comparison.pvalue_early is None
    assert comparison.gap_early == 0.0


def test_failed_replicates_are_left_out_of_pairs():
    cell = make_cell(20, 0.3, 1.0, 1.0, (0.5, 0.5), (1.0, 1.0))
    failed = cell.model_copy(update={"double": SchemeOutcome(
        early=Stat.of([None]), final=Stat.of([None]), failures=1, early_rates=[None], final_rates=[None],
    )})
    comparison = compare_schemes([cell, failed])
    assert comparison.pairs_early == 1
    assert math.isnan(marginalize(build_report(tiny_config(), [failed]), "p")[0].double_early)


def test_render_plots_writes_four_curves(two_by_two, tmp_path):
    paths = render_plots(two_by_two, tmp_path)
    assert sorted(p.name for p in paths) == ["capture_vs_mu2.svg", "capture_vs_n.svg"]
    for path in paths:
        assert path.read_text().count("<polyline") == 4


def test_render_plots_is_deterministic(two_by_two, tmp_path):
    first = render_plots(two_by_two, tmp_path / "a")
    second = render_plots(two_by_two, tmp_path / "b")
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_render_plots_of_empty_report_writes_nothing(tmp_path):
    empty = SweepReport(config={}, early_iteration=5, final_iteration=10, cells=[])
    with pytest.raises(ValueError):
        render_plots(empty, tmp_path / "plots")
    assert not (tmp_path / "plots").exists()
