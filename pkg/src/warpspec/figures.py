"""Figure rendering for the experiment drivers.

Each experiment gets one PNG next to its CSV.  The CSV stays the canonical
(byte-stable) artifact; figures are a convenience view of the same rows.
"""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .experiments import ExperimentResult  # noqa: E402
from .rayleigh_bounds import SHARP_LIMIT  # noqa: E402


def _finish(fig, path: Path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _rows_with(result: ExperimentResult, key: str):
    return [r.values for r in result.rows if isinstance(r.values.get(key), (int, float))
            and not (isinstance(r.values.get(key), float) and math.isnan(r.values[key]))]


def render_family(result: ExperimentResult, path: Path):
    vals = _rows_with(result, "computed")
    i = [v["i"] for v in vals]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(i, [v["lower"] for v in vals], "v-", label=r"$\pi^2/(4D_i^2)$ lower")
    ax.plot(i, [v["computed"] for v in vals], "o-", label=r"computed $\lambda_1$")
    ax.plot(i, [v["upper_quadrature"] for v in vals], "^-", label="Rayleigh upper")
    ax.plot(i, [v["upper_closed_form"] for v in vals], "s--", label="closed-form upper")
    ax.axhline(SHARP_LIMIT, color="k", lw=1, ls=":", label=r"$\pi^2/16$")
    ax.set_xlabel("family index $i$")
    ax.set_ylabel(r"$\lambda_1(B_{r_i})$")
    ax.set_title("Collapsing family: eigenvalue sandwich")
    ax.legend(fontsize=8)
    _finish(fig, path)


def render_sphere_family(result: ExperimentResult, path: Path):
    vals = _rows_with(result, "lambda")
    i = [v["i"] for v in vals]
    lam = [v["lambda"] for v in vals]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(i, lam, "o-", label=r"$\lambda_1(B_1)$ on shrinking spheres")
    ax.axhline(0.0, color="k", lw=1, ls=":")
    ax.set_xlabel("family index $i$")
    ax.set_ylabel(r"$\lambda_1$")
    ax.set_title("Unit balls swallowing shrinking spheres")
    ax.legend(fontsize=8)
    _finish(fig, path)


def render_sanity(result: ExperimentResult, path: Path):
    vals = [r.values for r in result.rows]
    names = [v["case"] for v in vals]
    deltas = [max(v["delta"], 1e-16) for v in vals]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.bar(range(len(names)), deltas)
    ax.set_yscale("log")
    ax.set_xticks(range(len(names)), names, rotation=20, fontsize=8)
    ax.set_ylabel("|computed - reference|")
    ax.set_title("Golden-value deviations")
    _finish(fig, path)


def render_curvature(result: ExperimentResult, path: Path):
    vals = [r.values for r in result.rows]
    i = [v["i"] for v in vals]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    ax1.plot(i, [v["min_Ric_rad"] for v in vals], "o-", label="min radial Ricci")
    ax1.plot(i, [v["min_Ric_tan"] for v in vals], "s-", label="min tangential Ricci")
    ax1.axhline(0.0, color="k", lw=1, ls=":")
    ax1.set_xlabel("family index $i$")
    ax1.legend(fontsize=8)
    ax1.set_title("Ricci minima on (0, 1]")
    ax2.semilogy(i, [v["pole_slope"] for v in vals], "o-", label="analytic $f'(0^+)$")
    ax2.semilogy(i, [abs(v["pole_slope_fd"]) for v in vals], "x--", label="one-sided FD")
    ax2.set_xlabel("family index $i$")
    ax2.legend(fontsize=8)
    ax2.set_title("Pole slope $1/\\epsilon_i$")
    _finish(fig, path)


def render_busemann(result: ExperimentResult, path: Path):
    vals = [r.values for r in result.rows]
    names = [v["case"] for v in vals]
    x = range(len(names))
    fig, ax = plt.subplots(figsize=(7.6, 4.4))
    ax.bar(x, [v["value"] for v in vals], label="value")
    ax.plot(x, [v["tolerance"] for v in vals], "k_", ms=16, label="tolerance")
    ax.set_xticks(x, names, rotation=35, fontsize=7, ha="right")
    ax.set_title("Busemann / pointwise-bound checks")
    ax.legend(fontsize=8)
    _finish(fig, path)


def render_kristaly(result: ExperimentResult, path: Path):
    vals = [r.values for r in result.rows]
    names = [v["case"] for v in vals]
    ratios = [v["ratio"] if not math.isnan(v["ratio"]) else 0.0 for v in vals]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.bar(range(len(names)), ratios)
    ax.axhline(1.0, color="k", lw=1, ls=":")
    ax.set_xticks(range(len(names)), names, rotation=15, fontsize=8)
    ax.set_ylabel("bound / computed")
    ax.set_title("Volume-growth lower bound vs computed eigenvalue")
    _finish(fig, path)


_RENDERERS = {
    "sanity": render_sanity,
    "family": render_family,
    "sphere-family": render_sphere_family,
    "curvature": render_curvature,
    "busemann": render_busemann,
    "kristaly": render_kristaly,
}


def render(result: ExperimentResult, out_dir: Path) -> Path:
    path = out_dir / f"{result.config.experiment}.png"
    _RENDERERS[result.config.experiment](result, path)
    return path
