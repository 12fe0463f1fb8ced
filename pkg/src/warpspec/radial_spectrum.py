"""First Dirichlet eigenvalue of pole-centered geodesic balls.

The radial reduction of Delta u = -lambda u on B_R(pole) is the weighted
Sturm-Liouville problem

    -(f^{n-1} u')' = lambda f^{n-1} u   on (0, R),
    f^{n-1} u' -> 0 as r -> 0+,  u(R) = 0,

solved two independent ways: a conservative cell-centered finite-difference
scheme whose symmetric tridiagonal pencil is bisected via Sturm sequences,
and an adaptive shooting integrator that bisects lambda on the boundary
value.  Both carry error estimates so results can be cross-validated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, NumericalError, UnsupportedError
from .warped_geometry import RotSymManifold, WarpingFunction

__all__ = [
    "RadialDirichletProblem", "EigenSolution",
    "solve_fd", "solve_shoot", "bessel_j", "bessel_root", "sphere_family_lambda",
]


# ----------------------------------------------------------------------------
# Bessel functions of the first kind, by ascending power series
# ----------------------------------------------------------------------------

def bessel_j(v: float, x, terms: int = 40):
    """J_v(x) from the ascending series sum_k (-1)^k (x/2)^(v+2k) / (k! G(v+k+1))."""
    x = np.asarray(x, dtype=float)
    half = x / 2.0
    out = np.zeros_like(x)
    term = half ** v / math.gamma(v + 1.0)
    out += term
    for k in range(1, terms):
        term = term * (-(half ** 2)) / (k * (v + k))
        out = out + term
    return out if out.shape else float(out)


def bessel_root(v: float) -> float:
    """First positive zero of J_v, located by bracketing + bisection to 1e-10."""
    if not 0.0 <= v <= 10.0:
        raise UnsupportedError(f"Bessel order {v} outside [0, 10]")
    # scan right of the order; j_v > v always, j_10 < 15
    x = max(v, 1e-3)
    step = 0.1
    fx = bessel_j(v, x)
    while True:
        x2 = x + step
        if x2 > 20.0:
            raise NumericalError("failed to bracket the first Bessel zero")
        fx2 = bessel_j(v, x2)
        if fx > 0 and fx2 <= 0:
            break
        x, fx = x2, fx2
    lo, hi = x, x2
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if bessel_j(v, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------------
# Problem / solution containers
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialDirichletProblem:
    """Pole-centered geodesic ball B_R with a Dirichlet condition at r = R.

    The pole condition is the natural regularity f^{n-1} u' -> 0; for profiles
    with f(0) > 0 (cylinders) this is the Neumann condition u'(0) = 0.
    """

    manifold: RotSymManifold
    R: float

    def __post_init__(self):
        if not 0 < self.R <= self.manifold.r_max * (1 + 1e-12):
            raise DomainError(f"ball radius {self.R} outside (0, r_max]")
        if self.manifold.is_compact():
            dmax = self.manifold.f.domain_max()
            if self.R >= dmax:
                raise DomainError("ball must be strictly inside the sphere chart")


@dataclass(frozen=True)
class EigenSolution:
    """Computed (lambda_1, u) with max-normalization max_k u(r_k) = 1."""

    lam: float
    nodes: np.ndarray
    values: np.ndarray
    error_estimate: float
    method: str
    mesh: int

    def __post_init__(self):
        if self.lam <= 0:
            raise NumericalError("first eigenvalue must be positive")
        if np.any(self.values <= 0):
            raise NumericalError("first eigenfunction must be positive on interior nodes")

    def interpolate(self, r):
        """Linear interpolation of u, extended by u(R) -> 0 and u(0) -> max."""
        return np.interp(r, self.nodes, self.values,
                         left=self.values[0], right=0.0)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("r,u\n")
            for r, u in zip(self.nodes, self.values):
                fh.write(f"{r:.12g},{u:.12g}\n")

    def json_header(self) -> dict:
        return {"lambda": self.lam, "error_estimate": self.error_estimate,
                "method": self.method, "N": self.mesh}


# ----------------------------------------------------------------------------
# Finite differences: conservative cell-centered scheme + Sturm bisection
# ----------------------------------------------------------------------------

def _assemble(p: RadialDirichletProblem, N: int):
    """Tridiagonal pencil K u = lam M u on cell centers r_k = (k + 1/2) h.

    Fluxes are evaluated at cell faces; the pole face carries zero flux
    (regularity) and the Dirichlet value u(R) = 0 enters through a half-cell
    one-sided flux at the last face.
    """
    M = p.manifold
    h = p.R / N
    faces = np.arange(N + 1) * h
    cells = (np.arange(N) + 0.5) * h
    w = M.weight(faces)
    if np.any(w[1:] <= 0):
        raise DomainError("weight f^(n-1) must be positive at interior faces")
    m = M.weight(cells)
    diag = (w[:-1] + w[1:]) / h ** 2
    diag[0] = w[1] / h ** 2
    diag[-1] = (w[N - 1] + 2.0 * w[N]) / h ** 2
    off = -w[1:N] / h ** 2
    return diag, off, m, cells


def _sturm_count_py(diag, off, m, lam) -> int:
    """Eigenvalues of (K - lam M) below zero, via the LDL^T sign count."""
    cnt = 0
    t = diag[0] - lam * m[0]
    if t < 0:
        cnt += 1
    for k in range(1, len(diag)):
        denom = t if t != 0.0 else 1e-300
        t = diag[k] - lam * m[k] - off[k - 1] * off[k - 1] / denom
        if t < 0:
            cnt += 1
    return cnt


try:  # optional JIT of the O(N) recurrence; results identical either way
    from numba import njit as _njit
    _sturm_count = _njit(cache=True)(_sturm_count_py)
except ImportError:  # pragma: no cover
    _sturm_count = _sturm_count_py


def _smallest_eigenvalue(diag, off, m) -> float:
    gersh = float(np.max(diag / m + np.abs(np.concatenate([[0.0], off / np.sqrt(m[:-1] * m[1:])])) +
                         np.abs(np.concatenate([off / np.sqrt(m[:-1] * m[1:]), [0.0]]))))
    lo, hi = 0.0, gersh + 1.0
    it = 0
    while _sturm_count(diag, off, m, hi) < 1:
        hi *= 2.0
        it += 1
        if it > 60:
            raise NumericalError("Sturm bisection failed to bracket an eigenvalue")
    for _ in range(240):
        mid = 0.5 * (lo + hi)
        if _sturm_count(diag, off, m, mid) >= 1:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    else:
        raise NumericalError("Sturm bisection did not converge")
    return 0.5 * (lo + hi)


def _thomas(dl, d, du, b):
    n = len(d)
    c = np.empty(n)
    x = np.empty(n)
    c[0] = du[0] / d[0]
    x[0] = b[0] / d[0]
    for k in range(1, n):
        den = d[k] - dl[k - 1] * c[k - 1]
        c[k] = du[k] / den if k < n - 1 else 0.0
        x[k] = (b[k] - dl[k - 1] * x[k - 1]) / den
    for k in range(n - 2, -1, -1):
        x[k] -= c[k] * x[k + 1]
    return x


def _eigenvector(diag, off, m, lam) -> np.ndarray:
    """Inverse iteration at lam shifted by -1e-8 lam (pencil stays definite)."""
    shift = lam * (1.0 - 1e-8)
    d = diag - shift * m
    v = np.sqrt(m)
    v /= np.linalg.norm(v)
    for _ in range(3):
        v = _thomas(off, d, off, m * v)
        v /= np.linalg.norm(v)
    return v


def solve_fd(p: RadialDirichletProblem, N: int = 512) -> EigenSolution:
    """Finite-difference eigenvalue with Richardson extrapolation over N and 2N.

    error_estimate = |lam_N - lam_2N| / 3, the size of the eliminated O(h^2)
    term.  The returned nodes/values live on the 2N cell-centered grid.
    """
    if N < 16:
        raise DomainError("mesh size must be at least 16")
    d1, o1, m1, _ = _assemble(p, N)
    lam1 = _smallest_eigenvalue(d1, o1, m1)
    d2, o2, m2, cells2 = _assemble(p, 2 * N)
    lam2 = _smallest_eigenvalue(d2, o2, m2)
    lam = (4.0 * lam2 - lam1) / 3.0
    err = abs(lam2 - lam1) / 3.0
    u = _eigenvector(d2, o2, m2, lam2)
    u = np.abs(u)           # first eigenvector has a sign; fix it positive
    u /= u.max()
    return EigenSolution(lam, cells2, u, err, "finite-difference", 2 * N)


# ----------------------------------------------------------------------------
# Shooting with adaptive integration and node counting
# ----------------------------------------------------------------------------

def _shoot_once(p: RadialDirichletProblem, lam: float, rtol: float = 1e-10):
    """Integrate u'' + (n-1)(f'/f) u' + lam u = 0 from a series start.

    Returns (u(R), number of interior zeros, dense solution).
    """
    M = p.manifold
    n = M.n
    f = M.f
    r0 = max(1e-6 * p.R, 1e-8)
    pole_vanishing = f.eval(0.0, 0) < 1e-12
    denom = n if pole_vanishing else 1.0
    y0 = [1.0, -lam * r0 / denom]

    def rhs(r, y):
        u, v = y
        fr = f.eval(r, 0)
        fpr = f.eval(r, 1)
        return (v, -(n - 1) * (fpr / fr) * v - lam * u)

    def crossing(r, y):
        return y[0]

    sol = solve_ivp(rhs, (r0, p.R), y0, rtol=rtol, atol=1e-13,
                    events=crossing, dense_output=True, method="RK45")
    if not sol.success:
        raise NumericalError(f"shooting integration failed: {sol.message}")
    nodes = len(sol.t_events[0])
    # a crossing at the right endpoint is the boundary zero, not an interior node
    if nodes and sol.t_events[0][-1] >= p.R * (1 - 1e-12):
        nodes -= 1
    return sol.y[0, -1], nodes, sol


def solve_shoot(p: RadialDirichletProblem,
                bracket: Optional[Tuple[float, float]] = None,
                samples: int = 257) -> EigenSolution:
    """Shooting eigenvalue: bisect lambda on the sign of u(R).

    The bracket must satisfy node-count 0 at the low end; without one it is
    found by doubling/halving from the constant-weight guess (pi/2R)^2.
    """
    if bracket is None:
        guess = (math.pi / (2 * p.R)) ** 2
        lo, hi = guess, guess
        uR, nodes, _ = _shoot_once(p, lo)
        it = 0
        while uR <= 0 or nodes >= 1:
            lo *= 0.5
            uR, nodes, _ = _shoot_once(p, lo)
            it += 1
            if it > 60:
                raise NumericalError("bracketing failed at the low end; "
                                     "inspect the mesh or the problem setup")
        uR, nodes, _ = _shoot_once(p, hi)
        it = 0
        while uR > 0 and nodes == 0:
            hi *= 2.0
            uR, nodes, _ = _shoot_once(p, hi)
            it += 1
            if it > 60:
                raise NumericalError("bracketing failed at the high end; "
                                     "inspect the mesh or the problem setup")
    else:
        lo, hi = bracket
        uR, nodes, _ = _shoot_once(p, lo)
        if uR <= 0 or nodes >= 1:
            raise DomainError("bracket low end must have node count 0 and u(R) > 0")
        uR, nodes, _ = _shoot_once(p, hi)
        if uR > 0 and nodes == 0:
            raise DomainError("bracket high end must cross the first eigenvalue")

    for _ in range(80):
        mid = 0.5 * (lo + hi)
        uR, nodes, _ = _shoot_once(p, mid)
        if uR > 0 and nodes == 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    lam = 0.5 * (lo + hi)
    width = hi - lo
    # final integration for the eigenfunction profile
    _, _, sol = _shoot_once(p, lam)
    r0 = sol.t[0]
    rs = np.linspace(r0, p.R, samples)
    u = sol.sol(rs)[0]
    u = np.maximum(u, 0.0)
    u[-1] = 0.0
    interior = rs < p.R
    u_int = u[interior].copy()
    u_int[u_int <= 0] = min(1e-300, u_int[u_int > 0].min() if np.any(u_int > 0) else 1e-300)
    err = width + 1e3 * 1e-10 * lam
    return EigenSolution(lam, rs[interior], u_int / u_int.max(), err, "shooting", samples)


# ----------------------------------------------------------------------------
# The shrinking-spheres family
# ----------------------------------------------------------------------------

def sphere_family_lambda(i: int, n: int, N: int = 1024,
                         cross_validate: bool = True) -> float:
    """lambda_1 of the unit geodesic ball about the pole of S^n((1 + 2^-i)/pi).

    At i = 0 the ball is exactly a hemisphere of radius 2/pi, with closed-form
    eigenvalue n (pi/2)^2; as i grows the ball swallows the sphere and the
    eigenvalue collapses toward 0.
    """
    if i < 0:
        raise DomainError("family index must be nonnegative")
    R_i = (1.0 + 2.0 ** (-i)) / math.pi
    if 1.0 >= math.pi * R_i:
        raise DomainError("unit ball does not fit inside the sphere")
    M = RotSymManifold(n, WarpingFunction.sphere(R_i), r_max=math.pi * R_i)
    prob = RadialDirichletProblem(M, 1.0)
    # the weight collapses on a 2^-i neighbourhood of the far pole; the mesh
    # must resolve it or the Richardson estimate understates the error
    N_eff = min(max(N, 2 ** (i + 1)), 2 ** 15)
    fd = solve_fd(prob, N_eff)
    if cross_validate:
        sh = solve_shoot(prob)
        gap = abs(fd.lam - sh.lam)
        budget = fd.error_estimate + sh.error_estimate
        if gap > max(budget, 1e-9 * fd.lam):
            raise NumericalError(
                f"cross-validation failed at i={i}: |fd-shoot|={gap:.3e} "
                f"> {budget:.3e}")
    return fd.lam
