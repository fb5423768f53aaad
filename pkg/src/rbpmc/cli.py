"""
Command-line interface for rbpmc.

Subcommands:
    run     one PMC fit on a generated or provided sample
    modes   grid mode census of a sample
    sweep   factorial single- vs double-RB comparison
    plot    re-render capture-rate plots from a saved report

Exit codes: 0 success, 2 bad configuration or input file, 3 degenerate PMC
run, 4 I/O failure, 130 interrupted.
"""

import functools
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import click

from rbpmc import __version__
from rbpmc.config import RunConfig, apply_overrides, config_hash, load_config
from rbpmc.datamodel import CurveRow, MixtureHyper, ObservedSample, RunManifest, Scheme
from rbpmc.errors import ConfigError, EmptySurfaceError, PmcRunError, SampleFormatError
from rbpmc.export.report_export import ArtifactExporter, read_sample, write_sample

EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_IO = 4
EXIT_INTERRUPTED = 130


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fail(message: str, code: int) -> None:
    click.echo(f"✗ {message}", err=True)
    raise click.exceptions.Exit(code)


def _setup_logging(verbose: int) -> None:
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def shared_options(func):
    """Options every subcommand accepts; flags override the config file."""

    @click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
                  help="YAML configuration file")
    @click.option("--seed", type=int, default=None, help="Root seed of every random stream")
    @click.option("--threads", type=int, default=None, help="Worker bound (sweep processes, grid threads)")
    @click.option("--out-dir", type=click.Path(path_type=Path), default=None, help="Output directory")
    @click.option("--scheme", type=click.Choice(["naive", "single", "double"]), default=None,
                  help="PMC scheme (run)")
    @click.option("--dry-run", is_flag=True, help="Print what would be done and exit")
    @click.option("-v", "--verbose", count=True, help="Increase logging (-v info, -vv debug)")
    @functools.wraps(func)
    def wrapper(config_path, seed, threads, out_dir, scheme, dry_run, verbose, **kwargs):
        _setup_logging(verbose)
        overrides = {
            "seed": seed,
            "threads": threads,
            "output_dir": out_dir,
            "pmc.scheme": scheme,
        }
        try:
            config = apply_overrides(load_config(config_path), overrides)
        except ConfigError as exc:
            _fail(str(exc), EXIT_CONFIG)
        applied = {k: str(v) if isinstance(v, Path) else v for k, v in overrides.items() if v is not None}
        return func(config=config, overrides=applied, dry_run=dry_run, **kwargs)

    return wrapper


class Session:
    """Artifact export and manifest bookkeeping of one subcommand."""

    def __init__(self, command: str, config: RunConfig, overrides: dict):
        self.exporter = ArtifactExporter(config.output_dir)
        self.manifest = RunManifest(
            command=command,
            config_hash=config_hash(config),
            seed=config.seed,
            overrides=overrides,
            version=__version__,
            started_at=_now(),
        )

    def finish(self, complete: bool = True) -> Path:
        manifest = self.manifest.model_copy(update={"finished_at": _now(), "complete": complete})
        return self.exporter.write_manifest(manifest)

    def abort(self, message: str, code: int) -> None:
        """Write the manifest marked incomplete, then exit with ``code``."""
        try:
            self.finish(complete=False)
        except OSError as exc:
            click.echo(f"✗ could not write the manifest: {exc}", err=True)
        _fail(message, code)


@click.group()
@click.version_option(__version__, prog_name="rbpmc")
def cli():
    """Population Monte Carlo with single and double Rao-Blackwellisation."""


def _load_sample(config: RunConfig, data_path: Optional[Path], data_rng):
    """Observed sample and prior square from a CSV (plus sidecar) or a fresh artificial draw."""
    from rbpmc.experiment import prior_for
    from rbpmc.target import generate_artificial_sample

    target = config.target
    hyper = MixtureHyper(target.p, target.sigma1, target.sigma2)
    prior = None
    if data_path is not None:
        data, file_hyper, prior = read_sample(data_path)
        hyper = file_hyper or hyper
    else:
        data = generate_artificial_sample(target.n, target.mu2, data_rng)
    sample = ObservedSample(data, hyper)
    return sample, prior or prior_for(sample.data, config)


@cli.command()
@shared_options
@click.option("--n", "n", type=int, default=None, help="Size of the generated sample")
@click.option("--data", "data_path", type=click.Path(path_type=Path), default=None,
              help="Sample CSV (one observation per line); generated when omitted")
def run(config: RunConfig, overrides: dict, dry_run: bool, n: Optional[int], data_path: Optional[Path]):
    """Run one PMC fit and write run.json, particles.csv and cloud.svg."""
    if n is not None:
        try:
            config = apply_overrides(config, {"target.n": n})
        except ConfigError as exc:
            _fail(str(exc), EXIT_CONFIG)
        overrides["target.n"] = n
    if dry_run:
        click.echo(json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True))
        return

    from rbpmc.experiment import config_echo, run_scheme, snapshot_iterations
    from rbpmc.modefinder import census_for_sample, detection_score
    from rbpmc.render import PlotRenderer
    from rbpmc.rng import run_streams
    from rbpmc.target import MixturePosterior

    scheme = Scheme.from_label(config.pmc.scheme)
    data_rng, pmc_rng = run_streams(config.seed, scheme)
    session = Session("run", config, overrides)
    try:
        sample, prior = _load_sample(config, data_path, data_rng)
        if data_path is None:
            session.exporter.track(write_sample(config.output_dir / "sample.csv", sample.data, sample.hyper, prior))
        result = run_scheme(MixturePosterior(sample, prior), prior, config, scheme, pmc_rng)
        census = census_for_sample(
            sample, prior, config.census.resolution, config.census.min_prominence, workers=config.threads
        )
        early_t, final_t = snapshot_iterations(config)
        detection = {
            f"t{t}": detection_score(result.snapshot(t).particles, census, config.census.min_count).rate
            for t in (early_t, final_t)
        }
        mean, _ = result.estimate()
        session.exporter.write_run(
            result, config_echo(config), prior, extra={"detection": detection, "n_modes": census.n_modes}
        )
        cloud_svg = config.output_dir / "cloud.svg"
        PlotRenderer().render_cloud(
            result.final_cloud, census, cloud_svg, title=f"{scheme.value} scheme, t={result.iterations}"
        )
        session.exporter.track([cloud_svg])
        session.finish()
    except (SampleFormatError, ConfigError, ValueError) as exc:
        session.abort(str(exc), EXIT_CONFIG)
    except PmcRunError as exc:
        session.abort(str(exc), EXIT_DEGENERATE)
    except OSError as exc:
        session.abort(f"I/O error: {exc}", EXIT_IO)

    click.echo(f"  ✓ {scheme.value} run: {census.n_modes} modes, detection {detection}")
    click.echo(f"  ✓ posterior mean ({mean[0]:.3f}, {mean[1]:.3f}) → {config.output_dir}")


@cli.command()
@shared_options
@click.argument("data_path", type=click.Path(path_type=Path))
@click.option("--resolution", type=int, default=None, help="Grid cells per axis")
@click.option("--min-prominence", type=float, default=None, help="Merge threshold in log-density units")
def modes(config: RunConfig, overrides: dict, dry_run: bool, data_path: Path,
          resolution: Optional[int], min_prominence: Optional[float]):
    """Grid mode census of DATA_PATH; writes census.json and basins.csv."""
    extra = {"census.resolution": resolution, "census.min_prominence": min_prominence}
    try:
        config = apply_overrides(config, extra)
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)
    overrides.update({k: v for k, v in extra.items() if v is not None})
    if dry_run:
        click.echo(f"census of {data_path} at resolution {config.census.resolution}")
        return

    from rbpmc.modefinder import census_for_sample

    session = Session("modes", config, overrides)
    try:
        sample, prior = _load_sample(config, data_path, None)
        census = census_for_sample(
            sample, prior, config.census.resolution, config.census.min_prominence, workers=config.threads
        )
        session.exporter.write_census(census, source=str(data_path))
        session.finish()
    except (SampleFormatError, EmptySurfaceError, ValueError) as exc:
        session.abort(str(exc), EXIT_CONFIG)
    except OSError as exc:
        session.abort(f"I/O error: {exc}", EXIT_IO)

    for k, mode in enumerate(census.modes):
        click.echo(f"  ✓ mode {k}: ({mode.location.mu1:.3f}, {mode.location.mu2:.3f}) "
                   f"log-density {mode.log_density:.2f}")
    click.echo(f"\n✅ {census.n_modes} modes → {config.output_dir / 'census.json'}")


@cli.command()
@shared_options
def sweep(config: RunConfig, overrides: dict, dry_run: bool):
    """Run the factorial sweep; writes report, timing, tables, plots and manifest."""
    from rbpmc.experiment import build_report, render_plots, run_sweep, sweep_cells

    cells = sweep_cells(config.sweep)
    if dry_run:
        for cell in cells:
            click.echo(f"n={cell.n} p={cell.p:g} mu2={cell.mu2:g} sigma2={cell.sigma2:g}")
        click.echo(f"{len(cells)} cells x {config.sweep.replicates} replicates")
        return

    click.echo(f"\nSweeping {len(cells)} cells x {config.sweep.replicates} replicates...")
    session = Session("sweep", config, overrides)
    done = []

    def progress(result):
        done.append(result)
        failures = f", {result.failures} failed" if result.failures else ""
        click.echo(
            f"  ✓ n={result.n} p={result.p:g} mu2={result.mu2:g} sigma2={result.sigma2:g}: "
            f"single {result.single.final.mean:.3f}, double {result.double.final.mean:.3f}{failures}"
        )

    exporter = session.exporter
    try:
        report = run_sweep(config, on_cell=progress)
        exporter.write_report(report)
        exporter.write_tables(report)
        exporter.track(render_plots(report, config.output_dir / "plots"))
        session.finish()
    except KeyboardInterrupt:
        try:
            if done:
                partial = build_report(config, done)
                exporter.write_report(partial)
                exporter.write_tables(partial)
            session.finish(complete=False)
        except OSError as exc:
            click.echo(f"✗ could not save partial results: {exc}", err=True)
        _fail(f"interrupted after {len(done)} of {len(cells)} cells", EXIT_INTERRUPTED)
    except OSError as exc:
        session.abort(f"I/O error: {exc}", EXIT_IO)

    click.echo(f"\n✅ Swept {len(report.cells)} cells → {config.output_dir}")


@cli.command()
@shared_options
@click.argument("report_path", type=click.Path(path_type=Path))
def plot(config: RunConfig, overrides: dict, dry_run: bool, report_path: Path):
    """Render capture-rate plots from REPORT_PATH (a sweep report.json)."""
    from rbpmc.experiment import MARGINAL_AXES, render_curves

    try:
        report = json.loads(report_path.read_text())
        marginals = {
            axis: [
                CurveRow(**{k: float("nan") if v is None else v for k, v in row.items()})
                for row in report["marginals"].get(axis, [])
            ]
            for axis in MARGINAL_AXES
        }
        early, final = report["early_iteration"], report["final_iteration"]
    except OSError as exc:
        _fail(f"cannot read {report_path}: {exc}", EXIT_IO)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        _fail(f"malformed report {report_path}: {exc}", EXIT_CONFIG)
    if dry_run:
        click.echo(f"would render {len(MARGINAL_AXES)} plots into {config.output_dir / 'plots'}")
        return

    try:
        written = render_curves(marginals, early, final, config.output_dir / "plots")
    except ValueError as exc:
        _fail(str(exc), EXIT_CONFIG)
    except OSError as exc:
        _fail(f"I/O error: {exc}", EXIT_IO)
    for path in written:
        click.echo(f"  ✓ {path.name} → {path}")


def main():
    """Console-script entry point."""
    cli(prog_name="rbpmc")


if __name__ == "__main__":
    sys.exit(main())
