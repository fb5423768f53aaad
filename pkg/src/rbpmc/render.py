"""
SVG rendering for rbpmc reports.

Plots are produced from Jinja2 templates in ``src/rbpmc/templates``; all
geometry is computed here and formatted with a fixed number of decimals, so
the same input always renders to the same bytes.
"""

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Optional

import numpy as np
from jinja2 import Environment, FileSystemLoader, StrictUndefined, select_autoescape

from rbpmc.datamodel import NO_COMPONENT, CurveRow, ModeCensus, ParticleCloud

logger = logging.getLogger(__name__)

WIDTH = 640
HEIGHT = 420
MARGIN = {"left": 64, "right": 170, "top": 36, "bottom": 52}

# scheme/snapshot -> (label prefix, colour); early snapshots are dashed
SERIES = {
    "single": ("single RB", "#1f77b4"),
    "double": ("double RB", "#d62728"),
}
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf")
NO_COMPONENT_COLOUR = "#7f7f7f"

AXIS_LABELS = {"mu2": "mu2", "n": "sample size n"}


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [float(v) for v in np.linspace(lo, hi, count)]


class PlotRenderer:
    """Render capture-rate curves and particle clouds to SVG."""

    def __init__(self, template_dir: Optional[Path] = None):
        """
        Args:
            template_dir: Path to templates directory (default: src/rbpmc/templates)
        """
        if template_dir is None:
            template_dir = Path(__file__).parent / "templates"

        self.env = Environment(
            loader=FileSystemLoader(str(template_dir)),
            autoescape=select_autoescape(["svg", "xml", "j2"]),
            undefined=StrictUndefined,
            keep_trailing_newline=True,
        )

    def _write(self, svg: str, output_path: Optional[Path]) -> str:
        if output_path:
            output_path = Path(output_path)
            output_path.parent.mkdir(parents=True, exist_ok=True)
            output_path.write_text(svg)
            logger.info("rendered %s", output_path)
        return svg

    def render_capture_curves(
        self,
        rows: Sequence[CurveRow],
        axis: str,
        early_iteration: int,
        final_iteration: int,
        output_path: Optional[Path] = None,
    ) -> str:
        """
        Capture rate against ``axis`` for both schemes at both snapshots (four curves).

        Args:
            rows: Marginal curve rows, one per axis value
            axis: Name of the horizontal axis (``"mu2"`` or ``"n"``)
            early_iteration: Iteration of the early snapshot
            final_iteration: Iteration of the final snapshot
            output_path: SVG file to write (optional)

        Returns:
            Rendered SVG string
        """
        if not rows:
            raise ValueError(f"no curve rows to plot against {axis}")
        rows = sorted(rows, key=lambda r: r.value)
        xs = [r.value for r in rows]
        # n spans orders of magnitude; plot it by rank with the value as tick label
        by_rank = axis == "n"
        positions = list(range(len(xs))) if by_rank else xs
        x_lo, x_hi = min(positions), max(positions)
        if x_hi == x_lo:
            x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
        plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
        plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

        def px(x: float) -> float:
            return MARGIN["left"] + (x - x_lo) / (x_hi - x_lo) * plot_w

        def py(y: float) -> float:
            return MARGIN["top"] + (1.0 - y) * plot_h

        curves = []
        for scheme, (label, colour) in SERIES.items():
            for snapshot, iteration in (("early", early_iteration), ("final", final_iteration)):
                points = [
                    (px(x), py(getattr(r, f"{scheme}_{snapshot}")))
                    for x, r in zip(positions, rows)
                    if np.isfinite(getattr(r, f"{scheme}_{snapshot}"))
                ]
                curves.append({
                    "label": f"{label}, t={iteration}",
                    "colour": colour,
                    "dashed": snapshot == "early",
                    "points": " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points),
                    "markers": [{"x": _fmt(x), "y": _fmt(y)} for x, y in points],
                })

        x_ticks = [
            {"x": _fmt(px(pos)), "label": f"{value:g}"}
            for pos, value in zip(positions, xs)
        ]
        y_ticks = [{"y": _fmt(py(v)), "label": f"{v:.2f}"} for v in _ticks(0.0, 1.0)]
        template = self.env.get_template("capture_curves.svg.j2")
        svg = template.render(
            width=WIDTH,
            height=HEIGHT,
            margin=MARGIN,
            plot_w=plot_w,
            plot_h=plot_h,
            title=f"Capture rate against {AXIS_LABELS.get(axis, axis)}",
            x_label=AXIS_LABELS.get(axis, axis),
            curves=curves,
            x_ticks=x_ticks,
            y_ticks=y_ticks,
            legend_x=WIDTH - MARGIN["right"] + 16,
        )
        return self._write(svg, output_path)

    def render_cloud(
        self,
        cloud: ParticleCloud,
        census: Optional[ModeCensus] = None,
        output_path: Optional[Path] = None,
        title: str = "Particle cloud",
    ) -> str:
        """
        Scatter of a weighted cloud, coloured by generating kernel, over the census modes.

        Args:
            cloud: Particle cloud
            census: Modes to mark (optional); its prior square sets the plot window
            output_path: SVG file to write (optional)
            title: Plot title

        Returns:
            Rendered SVG string
        """
        particles = cloud.particles
        if census is not None:
            lo, hi = census.prior.lo, census.prior.hi
        else:
            finite = particles[np.all(np.isfinite(particles), axis=1)]
            lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
            if hi <= lo:
                lo, hi = lo - 1.0, hi + 1.0
        side = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

        def px(v: float) -> float:
            return MARGIN["left"] + (v - lo) / (hi - lo) * side

        def py(v: float) -> float:
            return MARGIN["top"] + (hi - v) / (hi - lo) * side

        top_weight = float(cloud.norm_weights.max()) if cloud.size else 1.0
        points = []
        for (x, y), weight, component in zip(particles, cloud.norm_weights, cloud.components):
            if not (lo <= x <= hi and lo <= y <= hi):
                continue
            colour = NO_COMPONENT_COLOUR if component == NO_COMPONENT else PALETTE[int(component) % len(PALETTE)]
            points.append({
                "x": _fmt(px(x)),
                "y": _fmt(py(y)),
                "r": _fmt(1.2 + 2.8 * np.sqrt(weight / top_weight)),
                "colour": colour,
            })
        components = sorted({int(c) for c in cloud.components})
        legend = [
            {
                "label": "initial" if c == NO_COMPONENT else f"kernel {c}",
                "colour": NO_COMPONENT_COLOUR if c == NO_COMPONENT else PALETTE[c % len(PALETTE)],
            }
            for c in components
        ]
        modes = []
        if census is not None:
            modes = [
                {"x": _fmt(px(m.location.mu1)), "y": _fmt(py(m.location.mu2)), "rank": k}
                for k, m in enumerate(census.modes)
            ]
        ticks = _ticks(lo, hi)
        template = self.env.get_template("cloud.svg.j2")
        svg = template.render(
            width=MARGIN["left"] + side + MARGIN["right"],
            height=HEIGHT,
            margin=MARGIN,
            side=side,
            title=title,
            points=points,
            modes=modes,
            legend=legend,
            x_ticks=[{"x": _fmt(px(v)), "label": f"{v:g}"} for v in ticks],
            y_ticks=[{"y": _fmt(py(v)), "label": f"{v:g}"} for v in ticks],
            legend_x=MARGIN["left"] + side + 16,
        )
        return self._write(svg, output_path)
