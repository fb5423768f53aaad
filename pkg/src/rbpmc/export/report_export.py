"""
Artifact export for rbpmc runs, censuses and sweeps.

Writes the JSON and CSV files of the ``run``, ``modes`` and ``sweep``
subcommands. JSON is written with sorted keys and non-finite floats as
``null`` so that reruns with the same seed produce identical bytes.
"""

import csv
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Optional

import numpy as np

from rbpmc.datamodel import (
    MixtureHyper,
    ModeCensus,
    PriorSquare,
    RunManifest,
    SweepReport,
)
from rbpmc.errors import SampleFormatError

logger = logging.getLogger(__name__)

TABLE_SCHEMES = ("single", "double")
TABLE_SNAPSHOTS = ("early", "final")
# table layouts: file suffix -> (row axis, column axis)
TABLE_LAYOUTS = {"by_sigma2_mu2": ("sigma2", "mu2"), "by_p_n": ("p", "n")}


def jsonable(value: Any) -> Any:
    """Plain-JSON form of ``value``: numpy scalars and arrays unwrapped, NaN and inf as None."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(data: Any) -> str:
    return json.dumps(jsonable(data), sort_keys=True, indent=2, allow_nan=False) + "\n"


def format_number(value: float) -> str:
    return "nan" if value is None or not math.isfinite(value) else format(float(value), ".10g")


def atomic_write_text(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _sidecar(csv_path: Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def write_sample(
    csv_path: Path,
    data,
    hyper: Optional[MixtureHyper] = None,
    prior: Optional[PriorSquare] = None,
) -> list[Path]:
    """
    Write an observed sample as one value per line, plus a JSON sidecar when metadata is given.

    Returns:
        Paths written
    """
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w") as f:
        for value in np.asarray(data, dtype=float):
            f.write(f"{float(value)!r}\n")
    written = [csv_path]
    if hyper is not None or prior is not None:
        meta = {}
        if hyper is not None:
            meta["hyper"] = {"p": hyper.p, "sigma1": hyper.sigma1, "sigma2": hyper.sigma2}
        if prior is not None:
            meta["prior"] = {"lo": prior.lo, "hi": prior.hi}
        atomic_write_text(_sidecar(csv_path), dumps(meta))
        written.append(_sidecar(csv_path))
    return written


def read_sample(csv_path: Path) -> tuple[np.ndarray, Optional[MixtureHyper], Optional[PriorSquare]]:
    """
    Read a sample CSV (one finite observation per line) and its optional sidecar.

    Raises:
        SampleFormatError: on unreadable files, malformed rows or sidecar fields
    """
    csv_path = Path(csv_path)
    values = []
    try:
        with open(csv_path) as f:
            for lineno, line in enumerate(f, start=1):
                text = line.strip()
                if not text:
                    continue
                try:
                    value = float(text)
                except ValueError:
                    raise SampleFormatError(f"{csv_path}:{lineno}: not a number: {text!r}") from None
                if not math.isfinite(value):
                    raise SampleFormatError(f"{csv_path}:{lineno}: non-finite value {text!r}")
                values.append(value)
    except OSError as exc:
        raise SampleFormatError(f"cannot read sample {csv_path}: {exc}") from exc
    if not values:
        raise SampleFormatError(f"{csv_path} holds no observations")

    hyper = prior = None
    sidecar = _sidecar(csv_path)
    if sidecar.exists():
        try:
            meta = json.loads(sidecar.read_text())
            if "hyper" in meta:
                hyper = MixtureHyper(**meta["hyper"])
            if "prior" in meta:
                prior = PriorSquare(**meta["prior"])
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            raise SampleFormatError(f"malformed sidecar {sidecar}: {exc}") from exc
    return np.asarray(values), hyper, prior


class ArtifactExporter:
    """Write run, census and sweep artifacts under one output directory."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.artifacts: list[Path] = []

    def _json(self, relative: str, data: Any) -> Path:
        path = self.out_dir / relative
        atomic_write_text(path, dumps(data))
        self.artifacts.append(path)
        logger.debug("wrote %s", path)
        return path

    def _csv(self, relative: str, header: Optional[list[str]], rows) -> Path:
        path = self.out_dir / relative
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            if header:
                writer.writerow(header)
            writer.writerows(rows)
        self.artifacts.append(path)
        logger.debug("wrote %s", path)
        return path

    def track(self, paths) -> None:
        """Record files written by other writers (e.g. SVG plots)."""
        self.artifacts.extend(Path(p) for p in paths)

    # --- single PMC run --------------------------------------------------------

    def write_run(
        self, result, config_echo: dict, prior: PriorSquare, extra: Optional[dict] = None
    ) -> list[Path]:
        """
        Write ``run.json`` and ``particles.csv`` for one PMC run.

        Args:
            result: PmcResult
            config_echo: Configuration recorded with the run
            prior: Prior square of the run
            extra: Additional top-level entries (e.g. detection scores)
        """
        cloud = result.final_cloud
        mean, se = result.estimate()
        run = {
            "config": config_echo,
            "scheme": result.scheme.value,
            "iterations": result.iterations,
            "prior": {"lo": prior.lo, "hi": prior.hi},
            "scales": result.mixture.scales,
            "final_alpha": result.mixture.alpha,
            "diagnostics": result.diagnostics.to_dict(),
            "estimate": {"mean": mean, "standard_error": se},
            "final_cloud": {"size": cloud.size, "iteration": cloud.iteration},
        }
        run.update(extra or {})
        rows = (
            [format_number(x), format_number(y), format_number(w), int(c), int(a)]
            for (x, y), w, c, a in zip(cloud.particles, cloud.norm_weights, cloud.components, cloud.ancestors)
        )
        return [
            self._json("run.json", run),
            self._csv("particles.csv", ["mu1", "mu2", "weight", "component", "ancestor"], rows),
        ]

    # --- mode census -------------------------------------------------------------

    def write_census(self, census: ModeCensus, source: Optional[str] = None) -> list[Path]:
        """Write ``census.json`` (modes and grid metadata) and ``basins.csv`` (R x R labels)."""
        census_data = {
            "source": source,
            "resolution": census.resolution,
            "prior": {"lo": census.prior.lo, "hi": census.prior.hi},
            "n_modes": census.n_modes,
            "modes": [
                {
                    "cell": list(mode.cell),
                    "location": {"mu1": mode.location.mu1, "mu2": mode.location.mu2},
                    "log_density": mode.log_density,
                    "prominence": mode.prominence,
                }
                for mode in census.modes
            ],
        }
        return [
            self._json("census.json", census_data),
            self._csv("basins.csv", None, census.basin_labels.tolist()),
        ]

    # --- sweep -------------------------------------------------------------------

    def write_report(self, report: SweepReport) -> list[Path]:
        """Write ``report.json`` (deterministic content) and ``timing.json`` (CPU and runtime)."""
        content = report.model_dump(
            mode="python",
            exclude={"total_seconds": True, "cells": {"__all__": {"timing"}}},
        )
        timing = {
            "total_seconds": report.total_seconds,
            "cells": [
                {
                    "n": cell.n,
                    "p": cell.p,
                    "mu2": cell.mu2,
                    "sigma2": cell.sigma2,
                    **(cell.timing.model_dump() if cell.timing else {}),
                }
                for cell in report.cells
            ],
        }
        return [self._json("report.json", content), self._json("timing.json", timing)]

    def write_tables(self, report: SweepReport) -> list[Path]:
        """One CSV per table layout, plus one CSV per marginal curve."""
        from rbpmc.experiment import MARGINAL_AXES, pivot

        written = [self._pivot_csv("tables/mode_counts.csv", pivot(report, "sigma2", "mu2", "mode_count"))]
        for scheme in TABLE_SCHEMES:
            for snapshot in TABLE_SNAPSHOTS:
                for suffix, (rows, cols) in TABLE_LAYOUTS.items():
                    table = pivot(report, rows, cols, f"{scheme}_{snapshot}")
                    written.append(self._pivot_csv(f"tables/{scheme}_{snapshot}_{suffix}.csv", table))

        cpu = {scheme: pivot(report, "n", None, f"{scheme}_cpu") for scheme in TABLE_SCHEMES}
        written.append(self._csv(
            "tables/cpu_by_n.csv",
            ["n", *(f"{scheme}_seconds" for scheme in TABLE_SCHEMES)],
            (
                [n, *(format_number(cpu[s]["values"][k][0]) for s in TABLE_SCHEMES)]
                for k, n in enumerate(cpu["single"]["rows"])
            ),
        ))

        for axis, along in MARGINAL_AXES.items():
            curve = report.marginals.get(axis, [])
            fields = ["single_early", "single_final", "double_early", "double_final"]
            written.append(self._csv(
                f"tables/capture_vs_{along}.csv",
                [along, *fields],
                ([format_number(row.value), *(format_number(getattr(row, f)) for f in fields)] for row in curve),
            ))
        return written

    def _pivot_csv(self, relative: str, table: dict) -> Path:
        header = ["", *(format_number(c) if isinstance(c, float) else str(c) for c in table["cols"])]
        rows = (
            [format_number(r) if isinstance(r, float) else str(r), *(format_number(v) for v in values)]
            for r, values in zip(table["rows"], table["values"])
        )
        return self._csv(relative, header, rows)

    def write_manifest(self, manifest: RunManifest) -> Path:
        """Write ``manifest.json`` atomically; artifact paths are recorded relative to the output directory."""
        manifest = manifest.model_copy(update={"artifacts": sorted(
            str(p.relative_to(self.out_dir)) if p.is_relative_to(self.out_dir) else str(p)
            for p in dict.fromkeys(self.artifacts)
            if p.exists()
        )})
        path = self.out_dir / "manifest.json"
        atomic_write_text(path, dumps(manifest.model_dump(mode="python")))
        return path
