"""Histograms, polarization metrics, and the 3x3 reproduction figure.

Binning convention: 60 half-open bins on [-3, 3), right edge exclusive,
out-of-range samples counted but never clamped. Band conventions: moderate
is |politics| <= 0.5, extreme is |politics| >= 0.8 (out-of-range mass counts
as extreme). Bimodality: two strict local maxima separated by a dip of at
least 10% of the global maximum, measured on a 5-bin moving average for
histograms and on the raw grid for quadrature densities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from polarsim.oracle import PosteriorGrid

__all__ = [
    "BIN_EDGES",
    "Histogram",
    "PolarizationMetrics",
    "bin_samples",
    "tv_distance",
    "mirror_tv",
    "metrics_from_histogram",
    "metrics_from_grid",
    "write_histogram_csv",
    "write_metrics_json",
    "emit_figure",
]

DOMAIN = (-3.0, 3.0)
N_BINS = 60
BIN_EDGES = np.linspace(DOMAIN[0], DOMAIN[1], N_BINS + 1)

MODERATE_BAND = 0.5
EXTREME_BAND = 0.8
DIP_FRACTION = 0.1
SMOOTH_WINDOW = 5


@dataclass(frozen=True)
class Histogram:
    """Counts over the fixed bins plus the out-of-range tally."""

    bin_edges: np.ndarray
    counts: np.ndarray
    dropped: int

    @property
    def n_total(self) -> int:
        return int(self.counts.sum()) + self.dropped

    @property
    def fractions(self) -> np.ndarray:
        """Per-bin sample mass; sums to 1 - dropped fraction."""
        return self.counts / self.n_total

    @property
    def densities(self) -> np.ndarray:
        """Per-bin density; integrates to 1 - dropped fraction."""
        widths = np.diff(self.bin_edges)
        return self.counts / (self.n_total * widths)

    def mirrored(self) -> "Histogram":
        """The histogram reflected through politics = 0."""
        return Histogram(self.bin_edges, self.counts[::-1].copy(), self.dropped)


def bin_samples(values: np.ndarray) -> Histogram:
    """Count samples into the fixed bins; out-of-range goes to ``dropped``."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot bin an empty sample set")
    idx = np.searchsorted(BIN_EDGES, values, side="right") - 1
    inside = (idx >= 0) & (idx < N_BINS) & (values < DOMAIN[1])
    counts = np.bincount(idx[inside], minlength=N_BINS)
    return Histogram(BIN_EDGES, counts, int(values.size - inside.sum()))


def _mass_cells(dist: "Histogram | PosteriorGrid") -> np.ndarray:
    """Bin masses plus one out-of-range supercell, summing to 1."""
    if isinstance(dist, Histogram):
        cells = np.empty(N_BINS + 1)
        cells[:N_BINS] = dist.fractions
        cells[N_BINS] = dist.dropped / dist.n_total
        return cells
    x, d = dist.grid, dist.density
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(x))])
    cum /= cum[-1]
    cdf = np.interp(BIN_EDGES, x, cum)
    cells = np.empty(N_BINS + 1)
    cells[:N_BINS] = np.diff(cdf)
    cells[N_BINS] = 1.0 - cells[:N_BINS].sum()
    return cells


def tv_distance(
    a: "Histogram | PosteriorGrid", b: "Histogram | PosteriorGrid"
) -> float:
    """Total-variation distance over the 60 bins plus the supercell."""
    return 0.5 * float(np.abs(_mass_cells(a) - _mass_cells(b)).sum())


def mirror_tv(hist: Histogram) -> float:
    """Distance between a histogram and its own mirror image."""
    return tv_distance(hist, hist.mirrored())


@dataclass(frozen=True)
class PolarizationMetrics:
    """Band masses and mode structure of one politics distribution."""

    moderate_band_mass: float
    extreme_mass: float
    mode_locations: tuple[float, ...]
    bimodal: bool

    def to_json_dict(self) -> dict:
        return {
            "moderate_band_mass": self.moderate_band_mass,
            "extreme_mass": self.extreme_mass,
            "mode_locations": list(self.mode_locations),
            "bimodal": self.bimodal,
        }


def _mode_structure(
    positions: np.ndarray, density: np.ndarray
) -> tuple[tuple[float, ...], bool]:
    """Strict local maxima and the 10%-of-max dip rule between any pair."""
    peaks = [
        i
        for i in range(1, len(density) - 1)
        if density[i] > density[i - 1] and density[i] > density[i + 1]
    ]
    threshold = DIP_FRACTION * float(density.max())
    bimodal = False
    for a in range(len(peaks)):
        for b in range(a + 1, len(peaks)):
            i, j = peaks[a], peaks[b]
            valley = float(density[i : j + 1].min())
            if min(density[i], density[j]) - valley >= threshold:
                bimodal = True
    return tuple(float(positions[i]) for i in peaks), bimodal


def metrics_from_histogram(hist: Histogram) -> PolarizationMetrics:
    """Band masses by bin midpoint; modes on the smoothed densities.

    Out-of-range mass counts as extreme (anything dropped is beyond |3|).
    """
    mids = 0.5 * (hist.bin_edges[:-1] + hist.bin_edges[1:])
    fractions = hist.fractions
    moderate = float(fractions[np.abs(mids) <= MODERATE_BAND].sum())
    extreme = float(fractions[np.abs(mids) >= EXTREME_BAND].sum())
    extreme += hist.dropped / hist.n_total
    smoothed = np.convolve(
        hist.densities, np.ones(SMOOTH_WINDOW) / SMOOTH_WINDOW, mode="same"
    )
    modes, bimodal = _mode_structure(mids, smoothed)
    return PolarizationMetrics(moderate, extreme, modes, bimodal)


def _band_mass(x: np.ndarray, d: np.ndarray, lo: float, hi: float) -> float:
    """Trapezoid integral over [lo, hi] with interpolated band endpoints."""
    lo = max(lo, float(x[0]))
    hi = min(hi, float(x[-1]))
    if hi <= lo:
        return 0.0
    inside = (x > lo) & (x < hi)
    xs = np.concatenate([[lo], x[inside], [hi]])
    ds = np.concatenate([[np.interp(lo, x, d)], d[inside], [np.interp(hi, x, d)]])
    return float(np.trapezoid(ds, xs))


def metrics_from_grid(grid: PosteriorGrid) -> PolarizationMetrics:
    """Band masses by trapezoid integral; modes on the raw grid density."""
    x, d = grid.grid, grid.density
    moderate = _band_mass(x, d, -MODERATE_BAND, MODERATE_BAND)
    extreme = _band_mass(x, d, float(x[0]), -EXTREME_BAND)
    extreme += _band_mass(x, d, EXTREME_BAND, float(x[-1]))
    modes, bimodal = _mode_structure(x, d)
    return PolarizationMetrics(moderate, extreme, modes, bimodal)


def write_histogram_csv(hist: Histogram, path: "str | Path") -> None:
    lines = [
        f"# total={hist.n_total}",
        f"# dropped={hist.dropped}",
        "bin_left,bin_right,count,density",
    ]
    densities = hist.densities
    for i in range(N_BINS):
        lines.append(
            f"{float(hist.bin_edges[i])!r},{float(hist.bin_edges[i + 1])!r},"
            f"{int(hist.counts[i])},{float(densities[i])!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_metrics_json(metrics: PolarizationMetrics, path: "str | Path") -> None:
    Path(path).write_text(
        json.dumps(metrics.to_json_dict(), indent=2, sort_keys=True) + "\n"
    )


_PANEL_W = 270.0
_PANEL_H = 180.0
_GAP_X = 30.0
_GAP_Y = 50.0
_MARGIN_X = 50.0
_MARGIN_Y = 45.0

_BAR_FILL = "#9ecae1"
_LINE_STROKE = "#d62728"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def emit_figure(
    histograms: Sequence[Sequence["Histogram | None"]],
    overlays: Sequence[Sequence["PosteriorGrid | None"]],
    path: "str | Path",
    titles: "Sequence[Sequence[str]] | None" = None,
) -> None:
    """Write the 3x3 figure: histogram bars with density polyline overlays.

    Rows are observation counts, columns environments. Either grid may hold
    None entries (bars-only or curve-only panels). Output is deterministic:
    same inputs, byte-identical file.
    """
    for name, grid in (("histograms", histograms), ("overlays", overlays)):
        if len(grid) != 3 or any(len(row) != 3 for row in grid):
            raise ValueError(f"{name} must form a 3x3 grid")
    if titles is not None and (
        len(titles) != 3 or any(len(row) != 3 for row in titles)
    ):
        raise ValueError("titles must form a 3x3 grid")

    width = 2 * _MARGIN_X + 3 * _PANEL_W + 2 * _GAP_X
    height = 2 * _MARGIN_Y + 3 * _PANEL_H + 2 * _GAP_Y
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
        f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f'<rect x="0" y="0" width="{_fmt(width)}" height="{_fmt(height)}" fill="white"/>',
    ]

    for r in range(3):
        for c in range(3):
            hist = histograms[r][c]
            grid = overlays[r][c]
            x0 = _MARGIN_X + c * (_PANEL_W + _GAP_X)
            y0 = _MARGIN_Y + r * (_PANEL_H + _GAP_Y)

            ymax = 1e-9
            if hist is not None:
                ymax = max(ymax, float(hist.densities.max()))
            if grid is not None:
                inside = np.abs(grid.grid) <= DOMAIN[1]
                ymax = max(ymax, float(grid.density[inside].max()))
            ymax *= 1.05

            def px(x: float) -> float:
                return x0 + (x - DOMAIN[0]) / (DOMAIN[1] - DOMAIN[0]) * _PANEL_W

            def py(d: float) -> float:
                return y0 + _PANEL_H - (d / ymax) * _PANEL_H

            if titles is not None:
                title = titles[r][c]
            elif grid is not None:
                title = f"{grid.env_name} N={grid.n_obs}"
            else:
                title = ""
            if title:
                parts.append(
                    f'<text x="{_fmt(x0 + 0.5 * _PANEL_W)}" y="{_fmt(y0 - 8.0)}" '
                    f'font-family="monospace" font-size="13" '
                    f'text-anchor="middle">{title}</text>'
                )

            if hist is not None:
                densities = hist.densities
                bar_w = _PANEL_W / N_BINS
                for i in range(N_BINS):
                    if hist.counts[i] == 0:
                        continue
                    top = py(float(densities[i]))
                    parts.append(
                        f'<rect x="{_fmt(px(float(hist.bin_edges[i])))}" '
                        f'y="{_fmt(top)}" width="{_fmt(bar_w)}" '
                        f'height="{_fmt(y0 + _PANEL_H - top)}" fill="{_BAR_FILL}"/>'
                    )

            if grid is not None:
                inside = np.abs(grid.grid) <= DOMAIN[1]
                points = " ".join(
                    f"{_fmt(px(float(x)))},{_fmt(py(float(d)))}"
                    for x, d in zip(grid.grid[inside], grid.density[inside])
                )
                parts.append(
                    f'<polyline points="{points}" fill="none" '
                    f'stroke="{_LINE_STROKE}" stroke-width="1.2"/>'
                )

            metrics = None
            if grid is not None:
                metrics = metrics_from_grid(grid)
            elif hist is not None:
                metrics = metrics_from_histogram(hist)
            if metrics is not None:
                note = (
                    f"mod={metrics.moderate_band_mass:.2f} "
                    f"ext={metrics.extreme_mass:.2f}"
                )
                if metrics.bimodal:
                    note += " bimodal"
                parts.append(
                    f'<text x="{_fmt(x0 + 4.0)}" y="{_fmt(y0 + 12.0)}" '
                    f'font-family="monospace" font-size="10">{note}</text>'
                )

            axis_y = y0 + _PANEL_H
            parts.append(
                f'<line x1="{_fmt(x0)}" y1="{_fmt(axis_y)}" x2="{_fmt(x0 + _PANEL_W)}" '
                f'y2="{_fmt(axis_y)}" stroke="black" stroke-width="1"/>'
            )
            for tick in (-2.0, 0.0, 2.0):
                parts.append(
                    f'<text x="{_fmt(px(tick))}" y="{_fmt(axis_y + 14.0)}" '
                    f'font-family="monospace" font-size="10" '
                    f'text-anchor="middle">{tick:.0f}</text>'
                )

    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
