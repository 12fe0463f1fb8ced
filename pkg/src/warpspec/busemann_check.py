"""Geodesic distances, Busemann functions and the pointwise eigenfunction bound.

Distances live on the (r, psi) half-plane through the axis: by rotational
symmetry any two points of the manifold can be rotated into a common plane,
and minimizing paths between coplanar points may be taken inside it.  Fields
are produced by the factored eikonal solver; individual pair distances are
refined by direct length minimization over polylines, which also supplies the
path-construction upper bounds used elsewhere.

The Busemann function of the radial ray through psi = 0 is approximated by
b_t(x) = t - d(x, gamma(t)) on an increasing truncation schedule and
extrapolated in 1/t.  Its role here: every solved eigenfunction must satisfy
asin(u(x)) <= sqrt(lambda_1) (alpha - b(x)) with alpha = a + D the top of the
Busemann band containing the domain; the interval model turns this into an
equality, which is what pins the pi^2/16 constant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from ._eikonal import chord_lengths, solve_field
from .errors import DomainError, InvariantViolation, NumericalError, UnsupportedError
from .radial_spectrum import EigenSolution
from .warped_geometry import RotSymManifold

__all__ = [
    "DistanceField", "BusemannField", "C0CheckSpec", "C0Report", "StrictnessReport",
    "build_distance_field", "distance", "path_length",
    "build_busemann_field", "busemann", "laplacian_b_spotcheck",
    "c0_estimate_check", "strictness_check",
]


def _fv(M: RotSymManifold):
    return lambda r: M.f.eval(np.abs(np.asarray(r, dtype=float)), 0)


def _dfv(M: RotSymManifold):
    return lambda r: M.f.eval(np.abs(np.asarray(r, dtype=float)), 1)


# ----------------------------------------------------------------------------
# Polyline lengths and their minimization (pair-distance refinement)
# ----------------------------------------------------------------------------

def _segment_lengths_grad(fv, dfv, r, p, nq=4):
    """Lengths of polyline segments plus derivatives wrt the vertex motion."""
    s = np.linspace(0.0, 1.0, 2 * nq + 1)[:, None]
    w = np.ones(2 * nq + 1)
    w[1::2], w[2:-1:2] = 4.0, 2.0
    w = (w / (6.0 * nq))[:, None]
    dr = np.diff(r)[None, :]
    dp = np.diff(p)[None, :]
    rr = r[:-1][None, :] + dr * s
    f = fv(rr)
    fp = dfv(rr)
    g = np.maximum(np.sqrt(dr ** 2 + f ** 2 * dp ** 2), 1e-300)
    L = (w * g).sum(axis=0)
    dL_ddr = (w * (dr + f * fp * dp ** 2 * s) / g).sum(axis=0)
    dL_dr0 = (w * (f * fp * dp ** 2) / g).sum(axis=0)
    dL_ddp = (w * (f ** 2 * dp) / g).sum(axis=0)
    return L, dL_ddr, dL_dr0, dL_ddp


def path_length(M: RotSymManifold, vertices, nq: int = 8) -> float:
    """Metric length of a polyline given as an (m, 2) array of (r, psi)."""
    v = np.asarray(vertices, dtype=float)
    L, _, _, _ = _segment_lengths_grad(_fv(M), _dfv(M), v[:, 0], v[:, 1], nq)
    return float(L.sum())


def _minimize_path(M: RotSymManifold, p0, p1, inits, n_vertices=33, nq=4):
    fv, dfv = _fv(M), _dfv(M)
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    r_hi = min(M.r_max, M.f.domain_max())
    if not math.isfinite(r_hi):
        r_hi = max(p0[0], p1[0]) * 1.5 + 1.0

    def cost_grad(x):
        v = np.vstack([p0, x.reshape(-1, 2), p1])
        L, dL_ddr, dL_dr0, dL_ddp = _segment_lengths_grad(fv, dfv, v[:, 0], v[:, 1], nq)
        grad = np.zeros_like(v)
        grad[1:, 0] += dL_ddr
        grad[:-1, 0] += -dL_ddr + dL_dr0
        grad[1:, 1] += dL_ddp
        grad[:-1, 1] += -dL_ddp
        return float(L.sum()), grad[1:-1].ravel()

    bounds = [(0.0, r_hi), (-math.pi, 2.0 * math.pi)] * (n_vertices - 2)
    best = math.inf
    for init in inits:
        init = np.asarray(init, dtype=float)
        t = np.linspace(0.0, 1.0, n_vertices)
        ti = np.linspace(0.0, 1.0, len(init))
        x0 = np.stack([np.interp(t, ti, init[:, 0]),
                       np.interp(t, ti, init[:, 1])], axis=1)[1:-1].ravel()
        res = minimize(cost_grad, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 400, "ftol": 1e-16, "gtol": 1e-14})
        best = min(best, float(res.fun))
    return best


# ----------------------------------------------------------------------------
# Distance fields
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class DistanceField:
    """Shortest-path distances from an axis source on the (r, psi) grid.

    err_bound is a conservative absolute discretization bound (validated in
    the test suite against closed-form metrics).
    """

    manifold: RotSymManifold
    r: np.ndarray
    psi: np.ndarray
    dist: np.ndarray
    source: Tuple[float, float]
    h_r: float
    h_psi: float
    err_bound: float

    def value(self, r, psi):
        """Bilinear interpolation of the field."""
        r = np.asarray(r, dtype=float)
        psi = np.abs(np.asarray(psi, dtype=float))
        i = np.clip(np.searchsorted(self.r, r) - 1, 0, len(self.r) - 2)
        j = np.clip(np.searchsorted(self.psi, psi) - 1, 0, len(self.psi) - 2)
        tr = np.clip((r - self.r[i]) / self.h_r, 0.0, 1.0)
        tp = np.clip((psi - self.psi[j]) / self.h_psi, 0.0, 1.0)
        d = (self.dist[i, j] * (1 - tr) * (1 - tp)
             + self.dist[i + 1, j] * tr * (1 - tp)
             + self.dist[i, j + 1] * (1 - tr) * tp
             + self.dist[i + 1, j + 1] * tr * tp)
        return float(d) if d.shape == () else d

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("r,psi,value\n")
            for i, rv in enumerate(self.r):
                for j, pv in enumerate(self.psi):
                    fh.write(f"{rv:.12g},{pv:.12g},{self.dist[i, j]:.12g}\n")


def build_distance_field(M: RotSymManifold, source: Tuple[float, float],
                         resolution: Tuple[int, int] = (256, 256),
                         r_max: Optional[float] = None) -> DistanceField:
    """Factored-eikonal distance field from a source on the axis.

    The source must have psi in {0, pi}; a psi = pi source is handled by
    reflecting the field of the mirrored problem.
    """
    nr, npsi = resolution
    if nr < 64 or npsi < 64:
        raise DomainError("field resolution must be at least 64 x 64")
    src_r, src_psi = source
    if src_psi not in (0.0, math.pi):
        raise UnsupportedError("distance fields require an on-axis source; "
                               "reduce general pairs by their relative angle")
    if r_max is None:
        r_max = min(M.r_max, M.f.domain_max() * 0.98)
    if not math.isfinite(r_max):
        raise DomainError("specify a finite r_max for the field grid")
    if not 0.0 <= src_r <= r_max:
        raise DomainError("source radius outside the chart")
    rs, ps, T = solve_field(_fv(M), _dfv(M), r_max, src_r, nr, npsi)
    if src_psi == math.pi:
        T = T[:, ::-1].copy()
    if not np.all(np.isfinite(T)):
        raise NumericalError("distance field failed to cover the grid "
                             "(degenerate profile barrier?)")
    h_r = rs[1] - rs[0]
    h_p = ps[1] - ps[0]
    err = 5.0 * h_r + 2.0 * h_p * float(np.median(M.f.eval(rs, 0)))
    return DistanceField(M, rs, ps, T, (src_r, src_psi), h_r, h_p, err)


def _backtrace(fld: DistanceField, target) -> np.ndarray:
    """Steepest-descent polyline from target to the source, for polish seeding."""
    r, psi = float(target[0]), abs(float(target[1]))
    src_r, src_psi = fld.source
    pts = [(r, psi)]
    step = 0.5 * fld.h_r
    fmax = float(np.max(fld.manifold.f.eval(fld.r, 0)))
    for _ in range(int(20.0 * fld.dist.max() / step) + 100):
        d0 = fld.value(r, psi)
        if d0 <= 3.0 * fld.h_r:
            break
        hr = fld.h_r
        hp = fld.h_psi
        tr = (fld.value(min(r + hr, fld.r[-1]), psi) - fld.value(max(r - hr, 0.0), psi)) / (2 * hr)
        tp = (fld.value(r, psi + hp) - fld.value(r, max(psi - hp, 0.0))) / (2 * hp)
        f = max(float(fld.manifold.f.eval(min(r, fld.r[-1]), 0)), 1e-6 * fmax + 1e-30)
        dr = -tr
        dp = -tp / f ** 2
        norm = math.hypot(dr, f * dp)
        if norm < 1e-12:
            break
        r = float(np.clip(r + step * dr / norm, 0.0, fld.r[-1]))
        dpsi = step * dp / norm
        dpsi = float(np.clip(dpsi, -2 * hp, 2 * hp))
        psi = float(np.clip(psi + dpsi, 0.0, math.pi))
        pts.append((r, psi))
    pts.append((src_r, src_psi))
    return np.asarray(pts)


def distance(M: RotSymManifold, x, y, resolution: Tuple[int, int] = (256, 256),
             r_max: Optional[float] = None, field: Optional[DistanceField] = None,
             refine: bool = True) -> float:
    """Geodesic distance between coplanar points x = (r1, psi1), y = (r2, psi2).

    The pair is reduced to an axis source plus relative angle, a grid field
    provides the globally shortest route, and a polyline minimization refines
    it (the returned value is the length of an explicit path, hence an upper
    bound that is tight to optimizer tolerance).
    """
    r1, p1 = x
    r2, p2 = y
    dpsi = abs(float(p2) - float(p1))
    if dpsi > math.pi:
        dpsi = 2.0 * math.pi - dpsi
    if field is None:
        field = build_distance_field(M, (float(r1), 0.0), resolution, r_max)
    elif abs(field.source[0] - float(r1)) > 1e-12 or field.source[1] != 0.0:
        raise DomainError("supplied field has a different source")
    target = (float(r2), dpsi)
    d_grid = field.value(*target)
    if not refine:
        return float(d_grid)
    # the refined value is the length of an explicit polyline, so unlike the
    # grid field it can only overshoot the true distance
    inits = [np.array([[r1, 0.0], [r2, dpsi]]),
             np.array([[r1, 0.0], [0.0, dpsi / 2.0], [r2, dpsi]]),
             _backtrace(field, target)]
    d_ref = _minimize_path(M, (r1, 0.0), target, inits)
    return float(d_ref)


# ----------------------------------------------------------------------------
# Busemann fields
# ----------------------------------------------------------------------------

def default_t_schedule(r_max: float) -> Tuple[float, float, float]:
    return (r_max / 4.0, r_max / 2.0, 0.9 * r_max)


def _extrapolate(b_stack, ts):
    """Two-point Richardson in 1/t over the last two truncations."""
    b1, b2 = b_stack[-2], b_stack[-1]
    t1, t2 = ts[-2], ts[-1]
    A = (b2 - b1) / (1.0 / t1 - 1.0 / t2)
    b = b2 + A / t2
    residual = np.abs(b - b2)
    return b, residual


@dataclass(frozen=True)
class BusemannField:
    """Truncated Busemann values b_k = t_k - d(., gamma(t_k)) plus their limit."""

    manifold: RotSymManifold
    r: np.ndarray
    psi: np.ndarray
    t_schedule: Tuple[float, ...]
    b_k: np.ndarray               # (k, nr, npsi)
    b: np.ndarray                 # extrapolated (nr, npsi)
    residual: np.ndarray          # |b - b_K| nodewise
    err_bound: float              # inherited discretization bound

    @property
    def max_residual(self) -> float:
        return float(self.residual.max())

    def value(self, r, psi):
        r = np.asarray(r, dtype=float)
        psi = np.abs(np.asarray(psi, dtype=float))
        i = np.clip(np.searchsorted(self.r, r) - 1, 0, len(self.r) - 2)
        j = np.clip(np.searchsorted(self.psi, psi) - 1, 0, len(self.psi) - 2)
        h_r = self.r[1] - self.r[0]
        h_p = self.psi[1] - self.psi[0]
        tr = np.clip((r - self.r[i]) / h_r, 0.0, 1.0)
        tp = np.clip((psi - self.psi[j]) / h_p, 0.0, 1.0)
        v = (self.b[i, j] * (1 - tr) * (1 - tp) + self.b[i + 1, j] * tr * (1 - tp)
             + self.b[i, j + 1] * (1 - tr) * tp + self.b[i + 1, j + 1] * tr * tp)
        return float(v) if v.shape == () else v

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("r,psi,value\n")
            for i, rv in enumerate(self.r):
                for j, pv in enumerate(self.psi):
                    fh.write(f"{rv:.12g},{pv:.12g},{self.b[i, j]:.12g}\n")


def build_busemann_field(M: RotSymManifold, r_max: float,
                         t_schedule: Optional[Sequence[float]] = None,
                         resolution: Tuple[int, int] = (256, 256)) -> BusemannField:
    """Busemann field of the radial ray psi = 0 on the (r, psi) grid."""
    if M.is_compact():
        raise UnsupportedError("no rays on a compact manifold")
    if t_schedule is None:
        t_schedule = default_t_schedule(r_max)
    ts = tuple(float(t) for t in t_schedule)
    if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
        raise DomainError("t schedule must be increasing")
    if ts[-1] > 0.9 * r_max + 1e-12:
        raise DomainError("largest truncation must satisfy t <= 0.9 r_max")
    fields = [build_distance_field(M, (t, 0.0), resolution, r_max) for t in ts]
    b_k = np.stack([t - f.dist for t, f in zip(ts, fields)])
    b, residual = _extrapolate(b_k, ts)
    return BusemannField(M, fields[0].r, fields[0].psi, ts, b_k, b, residual,
                         fields[-1].err_bound)


def busemann(M: RotSymManifold, x, r_max: float,
             t_schedule: Optional[Sequence[float]] = None,
             resolution: Tuple[int, int] = (256, 256)) -> Tuple[float, float]:
    """Pointwise Busemann value of the radial ray at x = (r, psi).

    Uses refined pair distances for each truncation; returns (value, residual).
    """
    if M.is_compact():
        raise UnsupportedError("no rays on a compact manifold")
    if t_schedule is None:
        t_schedule = default_t_schedule(r_max)
    ts = [float(t) for t in t_schedule]
    b_k = []
    for t in ts:
        d = distance(M, (t, 0.0), x, resolution, r_max)
        b_k.append(t - d)
    drops = [b2 - b1 for b1, b2 in zip(b_k, b_k[1:])]
    if any(d < -1e-6 * r_max for d in drops):
        raise NumericalError("truncated Busemann values decreased beyond "
                             "tolerance; refine the grid")
    arr = [np.asarray([v]) for v in b_k]
    b, res = _extrapolate(arr, ts)
    return float(b[0]), float(res[0])


# ----------------------------------------------------------------------------
# Laplace comparison spot check
# ----------------------------------------------------------------------------

def laplacian_b_spotcheck(M: RotSymManifold, region, n_grid: int = 2001) -> float:
    """Minimum of the closed-form Laplacian of b over the region.

    region = (r_lo, r_hi): the radial Busemann b = r, with
    Delta b = (n-1) f'/f (exact on regions foliated by the distance spheres
    of the ray; reported as a spot check elsewhere).
    region = "euclidean": b = r cos(psi) is linear, Delta b = 0.
    """
    if region == "euclidean":
        if M.f.variant != "euclidean":
            raise UnsupportedError("closed form b = r cos(psi) requires the flat profile")
        return 0.0
    try:
        r_lo, r_hi = region
    except (TypeError, ValueError):
        raise UnsupportedError("region must be 'euclidean' or an (r_lo, r_hi) interval")
    if not 0 < r_lo < r_hi <= min(M.r_max, M.f.domain_max()):
        raise DomainError("invalid radial interval")
    rs = np.linspace(r_lo, r_hi, n_grid)
    vals = (M.n - 1) * M.f.eval(rs, 1) / M.f.eval(rs, 0)
    return float(vals.min())


# ----------------------------------------------------------------------------
# The pointwise C0 bound on eigenfunctions
# ----------------------------------------------------------------------------

_NEAR_ONE = 1.0 - 1e-6


@dataclass
class C0CheckSpec:
    """Inputs of the pointwise check asin(u) <= sqrt(lam) (alpha - b).

    u is the max-normalized radial eigenfunction sampled at r_nodes; b is the
    Busemann field sampled on the (r, psi) product grid covering the ball.
    alpha = a + D is the top of the Busemann band containing the domain; when
    known analytically it may be passed explicitly, otherwise the grid
    maximum of b is used.
    """

    lam: float
    r_nodes: np.ndarray
    u: np.ndarray
    r_grid: np.ndarray
    psi_grid: np.ndarray
    b: np.ndarray
    tolerance: float
    alpha: Optional[float] = None

    @classmethod
    def from_pipeline(cls, eigen: EigenSolution, bf: BusemannField, R: float,
                      extra_tolerance: float = 0.0) -> "C0CheckSpec":
        mask = bf.r <= R + 1e-12
        r_grid = bf.r[mask]
        b = bf.b[mask, :]
        h = max(float(bf.r[1] - bf.r[0]), float(np.diff(eigen.nodes).max()))
        residual = float(bf.residual[mask, :].max())   # far-field rows excluded
        tol = math.sqrt(eigen.lam) * (2.0 * h + residual + bf.err_bound) \
            + extra_tolerance
        return cls(eigen.lam, eigen.nodes, eigen.values, r_grid, bf.psi, b, tol)

    @classmethod
    def analytic(cls, lam: float, u_of_r: Callable, b_of_rpsi: Callable,
                 r_grid, psi_grid, tolerance: float = 1e-9,
                 alpha: Optional[float] = None) -> "C0CheckSpec":
        r_grid = np.asarray(r_grid, dtype=float)
        psi_grid = np.asarray(psi_grid, dtype=float)
        R, P = np.meshgrid(r_grid, psi_grid, indexing="ij")
        return cls(lam, r_grid, np.asarray(u_of_r(r_grid), dtype=float),
                   r_grid, psi_grid, np.asarray(b_of_rpsi(R, P), dtype=float),
                   tolerance, alpha)


@dataclass(frozen=True)
class C0Report:
    max_violation: float
    tolerance: float
    passed: bool
    alpha: float
    band_min: float
    band_width: float

    def to_json(self) -> dict:
        return {"max_violation": self.max_violation, "tolerance": self.tolerance,
                "pass": self.passed}


def c0_estimate_check(spec: C0CheckSpec) -> C0Report:
    """Evaluate max over the grid of asin(u) - sqrt(lam) (alpha - b).

    Near u = 1 the arcsin has unbounded slope, so there the one-sided bound
    asin(u) <= pi/2 is used and the local tolerance is inflated by
    sqrt(2 (1 - u)).
    """
    a = float(spec.b.min())
    D = float(spec.b.max()) - a
    alpha = a + D if spec.alpha is None else float(spec.alpha)
    if spec.alpha is not None:
        D = alpha - a
    if D <= 0:
        raise DomainError("degenerate Busemann band")
    slack = np.zeros_like(spec.b)
    u_r = np.interp(spec.r_grid, spec.r_nodes, spec.u,
                    left=float(spec.u[0]), right=0.0)
    u2 = np.broadcast_to(u_r[:, None], spec.b.shape).copy()
    rhs = math.sqrt(spec.lam) * (alpha - spec.b)
    if np.any(alpha - spec.b < -1e-9):
        raise InvariantViolation("alpha - b >= 0 on the domain",
                                 "band construction bug")
    near = u2 > _NEAR_ONE
    lhs = np.where(near, math.pi / 2.0, np.arcsin(np.clip(u2, 0.0, 1.0)))
    slack[near] = np.sqrt(2.0 * np.clip(1.0 - u2[near], 0.0, None))
    violation = lhs - rhs - slack
    max_violation = float(violation.max())
    return C0Report(max_violation, spec.tolerance,
                    max_violation <= spec.tolerance, alpha, a, D)


# ----------------------------------------------------------------------------
# Strictness of the pi^2/16 bound on unit balls
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class StrictnessReport:
    lam: float
    margin: float
    x1_radius: float
    b_at_x1: float
    d_x1_pole: float
    ray_gap: float          # b(x1) + d(x1, pole) >= 0, the strictness driver
    passed: bool

    def to_json(self) -> dict:
        return {"lambda": self.lam, "margin": self.margin,
                "ray_gap": self.ray_gap, "pass": self.passed}


def strictness_check(M: RotSymManifold, R: float = 1.0, N: int = 1024,
                     r_max: Optional[float] = None,
                     resolution: Tuple[int, int] = (192, 192)) -> StrictnessReport:
    """Verify lambda_1(B_R(pole)) > pi^2/16 (R = 1) with the reported margin.

    Refuses compact variants: the hypothesis is a complete noncompact
    manifold, and the shrinking-spheres family is the designated
    counterexample showing the bound fails without it.
    """
    from .radial_spectrum import RadialDirichletProblem, solve_fd

    if M.is_compact():
        raise UnsupportedError("strictness requires a complete noncompact manifold")
    sol = solve_fd(RadialDirichletProblem(M, R), N)
    x1_idx = int(np.argmax(sol.values))
    x1_r = float(sol.nodes[x1_idx])
    if r_max is None:
        r_max = 4.0 * R
    b_x1, _ = busemann(M, (x1_r, 0.0), r_max, resolution=resolution)
    margin = sol.lam - math.pi ** 2 / 16.0
    passed = margin > 0.0
    if not passed:
        raise InvariantViolation(
            "lambda_1(B_1) > pi^2/16",
            f"margin {margin:.3e}; solver or curvature-hypothesis bug")
    return StrictnessReport(sol.lam, margin, x1_r, b_x1, x1_r,
                            b_x1 + x1_r, passed)
