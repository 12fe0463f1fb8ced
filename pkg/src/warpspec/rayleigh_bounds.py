"""The explicit bound chain for the collapsing capped-cylinder family.

For the dyadic schedule eps_i = 2^-i the profile f_i (smooth cap of width
eps_i glued to a cylinder of girth eps_i) carries unit balls whose first
Dirichlet eigenvalue is squeezed between pi^2/(4 D^2) from below (D an
over-estimate of the ball diameter) and the Rayleigh quotient of the cosine
test function cos(tau_i r), tau_i = pi/(2 r_i), r_i = 2 - 2 pi eps_i - eps_i,
from above.  Both ends converge to pi^2/16, which certifies the sharpness of
the lower bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .busemann_check import build_distance_field
from .errors import DomainError, InvariantViolation
from .radial_spectrum import RadialDirichletProblem, solve_fd
from .warped_geometry import RotSymManifold, WarpingFunction

__all__ = [
    "FamilyPlan", "BoundSandwich", "DiameterEstimate", "ContainmentReport",
    "rayleigh_quotient", "family_upper_bound", "containment_check",
    "diameter_estimate", "busemann_lower_bound", "sandwich",
    "SHARP_LIMIT",
]

SHARP_LIMIT = math.pi ** 2 / 16.0


@dataclass(frozen=True)
class FamilyPlan:
    """Index i >= 2 of the collapsing family, with its derived scales.

    eps = 2^-i, r = 2 - 2 pi eps - eps (the inner ball radius), tau = pi/(2r).
    The construction requires r > eps, which holds from i = 3 on.
    """

    i: int
    n: int = 2

    def __post_init__(self):
        if self.i < 2:
            raise DomainError("family index must be >= 2")
        if self.n < 2:
            raise DomainError("dimension must be >= 2")
        if self.r_i <= self.eps:
            raise DomainError(f"index {self.i} violates r_i > eps_i; "
                              "the construction needs i >= 3")
        if self.tau_i * self.eps >= math.pi / 2:
            raise DomainError("tau_i * eps_i must stay below pi/2")

    @property
    def eps(self) -> float:
        return 2.0 ** (-self.i)

    @property
    def r_i(self) -> float:
        return 2.0 - 2.0 * math.pi * self.eps - self.eps

    @property
    def tau_i(self) -> float:
        return math.pi / (2.0 * self.r_i)

    @property
    def offcenter_radius(self) -> float:
        """Radius of the shifted center p = exp_pole((1 - eps) theta_0)."""
        return 1.0 - self.eps

    def manifold(self, r_max: float = math.inf) -> RotSymManifold:
        return RotSymManifold(self.n, WarpingFunction.capped_cylinder(self.eps),
                              r_max=r_max)


# ----------------------------------------------------------------------------
# Rayleigh quotients
# ----------------------------------------------------------------------------

def _simpson(vals: np.ndarray, h: float) -> float:
    acc = vals[0] + vals[-1] + 4.0 * vals[1::2].sum() + 2.0 * vals[2:-1:2].sum()
    return float(acc * h / 3.0)


def rayleigh_quotient(M: RotSymManifold, R: float,
                      phi: Union[Callable, Tuple[np.ndarray, np.ndarray]],
                      dphi: Optional[Callable] = None,
                      panels: int = 2 ** 12, max_panels: int = 2 ** 18,
                      rel_tol: float = 1e-9) -> float:
    """int phi'^2 f^{n-1} / int phi^2 f^{n-1} over (0, R) by composite Simpson.

    phi may be a callable (with optional analytic dphi) or a (nodes, values)
    sample pair, which is splined.  Panel count doubles until the quotient
    moves by less than rel_tol.
    """
    if not callable(phi):
        nodes = np.asarray(phi[0], dtype=float)
        values = np.asarray(phi[1], dtype=float)
        # cell-centered samples from the solvers end short of the boundary;
        # close them with the Dirichlet zero and a flat pole value
        if nodes[-1] < R:
            nodes = np.append(nodes, R)
            values = np.append(values, 0.0)
        if nodes[0] > 0.0:
            nodes = np.insert(nodes, 0, 0.0)
            values = np.insert(values, 0, values[0])
        spline = CubicSpline(nodes, values)
        phi = spline
        dphi = spline.derivative()
    if abs(float(phi(R))) > 1e-8:
        raise DomainError("test function must vanish at the ball boundary")

    prev = None
    n_panels = panels
    while True:
        rs = np.linspace(0.0, R, n_panels + 1)
        h = R / n_panels
        w = M.weight(rs)
        pv = np.asarray(phi(rs), dtype=float)
        if dphi is not None:
            dv = np.asarray(dphi(rs), dtype=float)
        else:
            dv = np.gradient(pv, rs, edge_order=2)
        num = _simpson(dv ** 2 * w, h)
        den = _simpson(pv ** 2 * w, h)
        if den < 1e-30:
            raise DomainError("degenerate test function (vanishing L2 norm)")
        q = num / den
        if prev is not None and abs(q - prev) <= rel_tol * abs(q):
            return q
        if n_panels >= max_panels:
            return q
        prev = q
        n_panels *= 2


def family_upper_bound(plan: FamilyPlan,
                       panels: int = 2 ** 12) -> Tuple[float, float]:
    """(quadrature, closed form) upper bounds for lambda_1(B_{r_i}(pole)).

    Quadrature: the Rayleigh quotient of phi = cos(tau_i r) on the capped
    profile.  Closed form: replace f by its extremes branch-wise, giving
    tau_i^2 (pi/4) / (pi/4 - c/2 - sin(2c)/4) with c = tau_i eps_i; the
    replacement only enlarges the quotient.
    """
    tau = plan.tau_i
    M = plan.manifold()
    quad = rayleigh_quotient(
        M, plan.r_i,
        lambda r: np.cos(tau * np.asarray(r, dtype=float)),
        lambda r: -tau * np.sin(tau * np.asarray(r, dtype=float)),
        panels=panels)
    c = tau * plan.eps
    closed = tau ** 2 * (math.pi / 4.0) / (math.pi / 4.0 - c / 2.0 - math.sin(2 * c) / 4.0)
    return quad, closed


def busemann_lower_bound(D: float) -> float:
    """pi^2 / (4 D^2): the eigenvalue lower bound from a Busemann band of width D."""
    if D <= 0:
        raise DomainError("band width must be positive")
    return math.pi ** 2 / (4.0 * D ** 2)


# ----------------------------------------------------------------------------
# Diameters
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class DiameterEstimate:
    """Sampled-pair lower estimate and path-construction upper bound."""

    lower: float
    upper: float


def _path_upper_bound(M: RotSymManifold, R: float, n_grid: int = 1025) -> float:
    """max over ball pairs of min(r1 + r2, min_s |r1-s| + |r2-s| + pi f(s)).

    Every candidate is the length of an explicit route (radial legs plus a
    full half-turn at radius s), so the maximum over all pairs bounds the
    ball diameter from above.  The pair bound is 1-Lipschitz in each radius,
    so the grid maximum inflated by one spacing covers off-grid pairs.
    """
    rs = np.linspace(0.0, R, n_grid)
    h = rs[1] - rs[0]
    f = M.f.eval(rs, 0)
    best = np.full((n_grid, n_grid), np.inf)
    for k in range(n_grid):
        s, fs = rs[k], f[k]
        leg = np.abs(rs - s)
        cand = leg[:, None] + leg[None, :] + math.pi * fs
        np.minimum(best, cand, out=best)
    through_pole = rs[:, None] + rs[None, :]
    np.minimum(best, through_pole, out=best)
    return float(best.max()) + h


def diameter_estimate(M: RotSymManifold, R: float,
                      resolution: Tuple[int, int] = (192, 192),
                      r_max: Optional[float] = None,
                      numerical: bool = True) -> DiameterEstimate:
    """Estimate diam(B_R(pole)) in the ambient manifold metric.

    lower: largest sampled-pair distance (fields from a few axis sources,
    biased low by pair sampling).  upper: the path-construction bound.
    """
    if R <= 0 or R > min(M.r_max, M.f.domain_max()) * (1 + 1e-12):
        raise DomainError("ball radius outside the chart")
    upper = _path_upper_bound(M, R)
    if not numerical:
        return DiameterEstimate(math.nan, upper)
    if r_max is None:
        cap = min(M.r_max, M.f.domain_max() * 0.98)
        r_max = R if not math.isfinite(cap) else min(max(R * 1.05, R + 1e-3), cap)
    lower = 0.0
    for src in (R, 0.5 * R, 0.0):
        fld = build_distance_field(M, (src, 0.0), resolution, r_max)
        ball = fld.r <= R + 1e-12
        lower = max(lower, float(fld.dist[ball, :].max()))
    return DiameterEstimate(lower, upper)


# ----------------------------------------------------------------------------
# Containment of the inner ball in the shifted unit ball
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ContainmentReport:
    i: int
    eps: float
    r_i: float
    max_path_bound: float
    path_cap: float              # 1 - pi eps, the closed-form ceiling
    max_numerical: float
    passed: bool

    def to_json(self) -> dict:
        return {"i": self.i, "max_path_bound": self.max_path_bound,
                "path_cap": self.path_cap, "max_numerical": self.max_numerical,
                "pass": self.passed}


def containment_check(plan: FamilyPlan,
                      resolution: Tuple[int, int] = (256, 192)) -> ContainmentReport:
    """Verify B_{r_i}(pole) sits inside the unit ball about the shifted center.

    Every x = (r_x, psi) with r_x <= r_i must satisfy d(x, p) < 1 where
    p = (1 - eps, 0).  Two explicit routes bound d: a radial leg to radius
    1 - eps plus a half-turn at girth <= eps (cost |r_x - (1-eps)| + pi eps,
    which is <= 1 - pi eps away from the pole), and the through-pole radial
    route (cost r_x + 1 - eps, which covers r_x < (2 pi - 1) eps where the
    half-turn route exceeds 1 - pi eps).  The pointwise minimum stays below
    1 - eps on the whole ball; the numerical field must stay below 1.
    """
    eps = plan.eps
    center = plan.offcenter_radius
    M = plan.manifold(r_max=math.inf)
    r_field = plan.r_i * 1.02
    fld = build_distance_field(M, (center, 0.0), resolution, r_max=r_field)
    ball = fld.r <= plan.r_i + 1e-12
    max_num = float(fld.dist[ball, :].max())

    # the bound tops out within eps of 1, so the Lipschitz slack h must stay
    # well below eps
    n_grid = max(4097, int(8.0 * plan.r_i / eps) + 1)
    rs = np.linspace(0.0, plan.r_i, n_grid)
    h = float(rs[1] - rs[0])
    # explicit routes from (r, psi <= pi) to the center (1 - eps, 0):
    #   named:     radial leg to radius 1 - eps, then a half-turn of girth eps
    #   diagonal:  straight line in the product region (valid once r >= eps)
    #   cap exit:  radial to the cylinder rim, then the diagonal
    #   pole:      radial through the pole
    named = np.abs(rs - center) + math.pi * eps
    diag_from_rim = math.hypot(center - eps, math.pi * eps)
    bound = np.where(
        rs >= eps,
        np.minimum(np.hypot(rs - center, math.pi * eps), named),
        np.minimum(eps - rs + diag_from_rim, rs + center),
    )
    max_path = float(bound.max()) + h               # Lipschitz slack in r
    if max_path >= 1.0:
        raise InvariantViolation("containment path bound < 1",
                                 f"max path bound {max_path}")
    # the displayed fixed-girth chain |r - (1-eps)| + pi eps <= 1 - pi eps
    # holds away from the pole (near it the through-pole route takes over)
    away = rs >= 2.0 * math.pi * eps
    cap = 1.0 - math.pi * eps
    if named[away].max() > cap + 1e-12:
        raise InvariantViolation("fixed-girth bound <= 1 - pi eps away from the pole",
                                 f"{named[away].max()} > {cap}")
    # the field must respect the pathwise bound nodewise (it measures the
    # same metric, so numerical distance <= named route + tolerance)
    named_at_nodes = np.abs(fld.r[ball][:, None] - center) + math.pi * eps
    if np.any(fld.dist[ball, :] > named_at_nodes + fld.err_bound + 1e-9):
        raise InvariantViolation("numerical distance <= fixed-girth path bound")
    passed = max_num < 1.0
    return ContainmentReport(plan.i, eps, plan.r_i, max_path, cap, max_num, passed)


# ----------------------------------------------------------------------------
# The sandwich
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundSandwich:
    """lower <= computed <= upper for one family index, with the limit gap."""

    i: int
    eps: float
    r_i: float
    tau_i: float
    lower: float
    computed: float
    computed_error: float
    upper_quadrature: float
    upper_closed_form: float
    gap_to_limit: float
    diameter_upper: float

    CSV_HEADER = "i,eps,r_i,tau_i,lower,computed,upper_quadrature,upper_closed_form,gap_to_limit"

    def csv_row(self) -> str:
        vals = (self.eps, self.r_i, self.tau_i, self.lower, self.computed,
                self.upper_quadrature, self.upper_closed_form, self.gap_to_limit)
        return f"{self.i}," + ",".join(f"{v:.12g}" for v in vals)


def sandwich(plan: FamilyPlan, N: int = 2048,
             quad_panels: int = 2 ** 12) -> BoundSandwich:
    """Assemble and verify the bound chain for one family index.

    The lower bound uses the path-construction over-estimate of the ball
    diameter (an under-estimate would invalidate the inequality direction).
    """
    M = plan.manifold()
    sol = solve_fd(RadialDirichletProblem(M, plan.r_i), N)
    quad_up, closed_up = family_upper_bound(plan, panels=quad_panels)
    D_up = diameter_estimate(M, plan.r_i, numerical=False).upper
    lower = busemann_lower_bound(D_up)
    tol = 3.0 * (sol.error_estimate + 1e-9 * quad_up)
    if lower > sol.lam + tol:
        raise InvariantViolation("lower <= computed",
                                 f"i={plan.i}: {lower} > {sol.lam} + {tol}")
    if sol.lam > quad_up + tol:
        raise InvariantViolation("computed <= upper_quadrature",
                                 f"i={plan.i}: {sol.lam} > {quad_up} + {tol}")
    if closed_up < quad_up - 1e-6 * quad_up:
        raise InvariantViolation("upper_quadrature <= upper_closed_form",
                                 f"i={plan.i}: {quad_up} > {closed_up}")
    return BoundSandwich(plan.i, plan.eps, plan.r_i, plan.tau_i, lower,
                         sol.lam, sol.error_estimate, quad_up, closed_up,
                         abs(sol.lam - SHARP_LIMIT), D_up)
