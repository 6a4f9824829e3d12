"""Figure builders: heatmap, spectrum overlay, and orbit profile.

Styling is fixed (STYLE_VERSION) so identical inputs give byte-identical
PNGs; bump the version when changing anything visual.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .formats import (
    FormatError,
    read_coeffs,
    read_field,
    read_orbit,
    read_profile,
    read_spectra,
)

STYLE_VERSION = "1"
_DPI = 150
_META = {"Software": f"scarrender {STYLE_VERSION}"}

HEATMAP = "heatmap"
SPECTRUM = "spectrum_overlay"
PROFILE = "profile"


@dataclass(frozen=True)
class FigureSpec:
    """One figure request: input artifact paths, kind, output image path."""

    kind: str
    inputs: dict[str, Path]
    output: Path
    orbit: Path | None = None

    def render(self) -> Path:
        if self.kind == HEATMAP:
            return heatmap(self.inputs["field"], self.output, orbit_path=self.orbit)
        if self.kind == SPECTRUM:
            return spectrum_overlay(self.inputs["coeffs"], self.inputs["window"],
                                    self.inputs["histogram"], self.output)
        if self.kind == PROFILE:
            return profile(self.inputs["profile"], self.output,
                           orbit_path=self.orbit)
        raise FormatError(f"unknown figure kind {self.kind!r}")


def _save(fig, out_path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=_DPI, metadata=_META)
    plt.close(fig)
    return out_path


def heatmap(field_path, out_path, orbit_path=None) -> Path:
    """Density raster with the exterior blank and an optional dashed orbit."""
    header, t, values, real = read_field(field_path)
    dens = values if real else np.abs(values) ** 2
    # exterior nodes are exactly zero in every artifact field
    masked = np.ma.masked_where(dens == 0.0, dens)

    fig, ax = plt.subplots(figsize=(8, 4.2))
    cmap = plt.get_cmap("inferno").copy()
    cmap.set_bad("white")
    im = ax.imshow(masked, origin="lower", extent=header.extent, cmap=cmap,
                   interpolation="nearest")
    fig.colorbar(im, ax=ax, shrink=0.85, label="density")

    if orbit_path is not None:
        orbit = read_orbit(orbit_path)
        pts = np.asarray(orbit["vertices"], dtype=float)
        for x, y in pts:
            if not header.covers(x, y):
                raise FormatError("orbit vertices leave the field frame")
        closed = np.vstack([pts, pts[:1]])
        ax.plot(closed[:, 0], closed[:, 1], "--", color="yellow", linewidth=1.4)

    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"time-averaged density (t={t:g})" if real else f"|field|^2 (t={t:g})")
    return _save(fig, out_path)


def spectrum_overlay(coeffs_path, window_path, histogram_path, out_path) -> Path:
    """|c_n|^2 bars with |w(E)| and smoothed-histogram curves."""
    energies, abs2 = read_coeffs(coeffs_path)
    window_kinds = read_spectra(window_path)
    hist_kinds = read_spectra(histogram_path)
    win = window_kinds.get("window_model") or window_kinds.get("window_measured")
    if win is None:
        raise FormatError(f"{window_path}: holds no window spectrum")
    hist = hist_kinds.get("smoothed_histogram")
    if hist is None:
        raise FormatError(f"{histogram_path}: holds no smoothed_histogram")

    fig, ax = plt.subplots(figsize=(8, 4.2))
    ax.bar(energies, abs2, width=np.ptp(energies) / max(len(energies), 1) * 0.5,
           color="0.35", label="|c_n|^2")
    ax.set_xlabel("E")
    ax.set_ylabel("|c_n|^2")
    ax2 = ax.twinx()
    e_w, v_w, _ = win
    e_h, v_h, _ = hist
    ax2.plot(e_w, np.abs(v_w), color="crimson", linewidth=1.2, label="|w(E)|")
    ax2.plot(e_h, v_h, color="royalblue", linewidth=1.2, label="histogram")
    ax2.set_ylabel("window / histogram")
    lines, labels = ax2.get_legend_handles_labels()
    bars, bar_labels = ax.get_legend_handles_labels()
    ax.legend(bars + lines, bar_labels + labels, loc="upper right", fontsize=8)
    ax.set_title("weighted spectrum overlay")
    return _save(fig, out_path)


def profile(profile_path, out_path, orbit_path=None) -> Path:
    """Numerical vs semiclassical on-orbit profile with exclusions shaded."""
    prof = read_profile(profile_path)
    xi, a_num, a_sc, excl = (prof[k] for k in ("xi", "A_num", "A_sc", "excluded"))

    fig, ax = plt.subplots(figsize=(8, 4.2))
    finite = np.isfinite(a_sc)
    ax.plot(xi, a_num, color="royalblue", linewidth=1.3, label="numerical")
    sc = np.where(finite, a_sc, np.nan)
    ax.plot(xi, sc, "--", color="crimson", linewidth=1.3, label="semiclassical")

    for lo, hi in _runs(xi, excl):
        ax.axvspan(lo, hi, color="0.85", zorder=0)
    if orbit_path is not None:
        orbit = read_orbit(orbit_path)
        for xc in orbit.get("conjugate_points", []):
            ax.axvline(xc, color="0.4", linewidth=0.8, linestyle=":")

    top = np.nanpercentile(np.concatenate([a_num, sc[finite]]), 99.5)
    ax.set_ylim(0.0, top * 1.15)
    ax.set_xlabel("xi")
    ax.set_ylabel("A")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title("on-orbit time-average vs prediction")
    return _save(fig, out_path)


def _runs(xi: np.ndarray, flags: np.ndarray):
    """Contiguous True runs as (xi_lo, xi_hi) spans."""
    spans = []
    start = None
    for i, f in enumerate(flags):
        if f and start is None:
            start = i
        elif not f and start is not None:
            spans.append((xi[start], xi[i - 1]))
            start = None
    if start is not None:
        spans.append((xi[start], xi[-1]))
    return spans
