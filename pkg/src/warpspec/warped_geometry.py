"""Rotationally symmetric metrics g = dr^2 + f(r)^2 dS^{n-1}.

A manifold is described by a warping profile f together with a dimension n
and a radial extent.  Everything geometric (curvature, ball volumes,
asymptotic volume ratio, the Bessel-type eigenvalue lower bound) is derived
from f and its first two derivatives, which are available in closed form for
every built-in profile.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import DomainError, UnsupportedError

EUCLIDEAN = "euclidean"
CONSTANT = "constant"
SPHERE = "sphere"
CAPPED_CYLINDER = "capped_cylinder"
TABULATED = "tabulated"

_VARIANTS = (EUCLIDEAN, CONSTANT, SPHERE, CAPPED_CYLINDER, TABULATED)

# exp() underflows around -745; below this the capped profile is flat to
# machine precision, so the constant branch is returned directly.
_EXP_CLAMP = -700.0


def unit_ball_volume(n: int) -> float:
    """omega_n, the volume of the unit ball in R^n."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def sphere_surface_area(n: int) -> float:
    """sigma_{n-1} = n * omega_n, the area of the unit (n-1)-sphere in R^n."""
    return n * unit_ball_volume(n)


@dataclass(frozen=True)
class WarpingFunction:
    """Closed-form warping profile with analytic first and second derivatives.

    Variants:
      euclidean        f(r) = r
      constant         f(r) = c            (thin cylinder of girth c)
      sphere           f(r) = R sin(r/R),  r in (0, pi R)
      capped_cylinder  smooth cap of width eps glued to the cylinder f = eps;
                       f(r) = eps - eps exp(1/eps) exp(1/(r - eps)) on [0, eps)
      tabulated        cubic-spline interpolant of samples (not-a-knot ends)
    """

    variant: str
    params: dict = field(default_factory=dict)
    _spline: Optional[CubicSpline] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise UnsupportedError(f"unknown warping variant {self.variant!r}")
        p = self.params
        if self.variant == CONSTANT and p["c"] <= 0:
            raise DomainError("constant profile needs c > 0")
        if self.variant == SPHERE and p["R"] <= 0:
            raise DomainError("sphere profile needs R > 0")
        if self.variant == CAPPED_CYLINDER and p["eps"] <= 0:
            raise DomainError("capped cylinder needs eps > 0")
        if self.variant == TABULATED and self._spline is None:
            r = np.asarray(p["r"], dtype=float)
            f = np.asarray(p["f"], dtype=float)
            if r.ndim != 1 or len(r) < 4 or np.any(np.diff(r) <= 0):
                raise DomainError("tabulated profile needs >= 4 strictly increasing radii")
            object.__setattr__(self, "_spline", CubicSpline(r, f, bc_type="not-a-knot"))

    # -- constructors -------------------------------------------------------
    @classmethod
    def euclidean(cls) -> "WarpingFunction":
        return cls(EUCLIDEAN)

    @classmethod
    def constant(cls, c: float) -> "WarpingFunction":
        return cls(CONSTANT, {"c": float(c)})

    @classmethod
    def sphere(cls, R: float) -> "WarpingFunction":
        return cls(SPHERE, {"R": float(R)})

    @classmethod
    def capped_cylinder(cls, eps: float) -> "WarpingFunction":
        return cls(CAPPED_CYLINDER, {"eps": float(eps)})

    @classmethod
    def tabulated(cls, r, f) -> "WarpingFunction":
        return cls(TABULATED, {"r": list(map(float, r)), "f": list(map(float, f))})

    # -- evaluation ---------------------------------------------------------
    def domain_max(self) -> float:
        """Largest radius at which the profile remains positive."""
        if self.variant == SPHERE:
            return math.pi * self.params["R"]
        if self.variant == TABULATED:
            return self.params["r"][-1]
        return math.inf

    def eval(self, r, order: int = 0):
        """f, f' or f'' at radius r (scalar or array)."""
        if order not in (0, 1, 2):
            raise UnsupportedError(f"derivative order {order} not supported")
        scalar = np.isscalar(r)
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0) or np.any(r > self.domain_max() * (1 + 1e-12)):
            raise DomainError("radius outside the profile domain")
        out = self._eval_arr(r, order)
        return float(out[0]) if scalar else out

    __call__ = eval

    def _eval_arr(self, r, order):
        v = self.variant
        if v == EUCLIDEAN:
            return (r.copy(), np.ones_like(r), np.zeros_like(r))[order]
        if v == CONSTANT:
            c = self.params["c"]
            return (np.full_like(r, c), np.zeros_like(r), np.zeros_like(r))[order]
        if v == SPHERE:
            R = self.params["R"]
            if order == 0:
                return R * np.sin(r / R)
            if order == 1:
                return np.cos(r / R)
            return -np.sin(r / R) / R
        if v == CAPPED_CYLINDER:
            return self._eval_capped(r, order)
        if order == 0:
            return self._spline(r)
        return self._spline(r, order)

    def _eval_capped(self, r, order):
        eps = self.params["eps"]
        out = np.full_like(r, (eps, 0.0, 0.0)[order])
        cap = r < eps
        if not np.any(cap):
            return out
        rc = r[cap]
        d = rc - eps                      # d in [-eps, 0)
        E = 1.0 / eps + 1.0 / d
        live = E >= _EXP_CLAMP            # otherwise flat to machine precision
        g = np.zeros_like(rc)
        g[live] = np.exp(E[live])
        if order == 0:
            val = eps * (1.0 - g)
        elif order == 1:
            val = np.zeros_like(rc)
            val[live] = eps * g[live] / d[live] ** 2
        else:
            val = np.zeros_like(rc)
            val[live] = -eps * g[live] * (1.0 / d[live] ** 4 + 2.0 / d[live] ** 3)
        out[cap] = val
        return out

    def pole_slope(self) -> float:
        """Analytic one-sided slope f'(0+)."""
        if self.variant == EUCLIDEAN:
            return 1.0
        if self.variant == CONSTANT:
            return 0.0
        if self.variant == SPHERE:
            return 1.0
        if self.variant == CAPPED_CYLINDER:
            return 1.0 / self.params["eps"]
        return float(self._spline(self.params["r"][0], 1))

    def breakpoints(self):
        """Radii where the closed form switches branch (derivative checks skip a
        neighbourhood of these)."""
        if self.variant == CAPPED_CYLINDER:
            return (0.0, self.params["eps"])
        if self.variant == TABULATED:
            return tuple(self.params["r"])
        return (0.0,)

    # -- serialization ------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps({"variant": self.variant, "params": self.params})

    @classmethod
    def from_json(cls, text: str) -> "WarpingFunction":
        obj = json.loads(text)
        return cls(obj["variant"], obj.get("params", {}))


@dataclass(frozen=True)
class RotSymManifold:
    """Dimension n >= 2 plus a warping profile; r_max bounds the radial chart."""

    n: int
    f: WarpingFunction
    r_max: float = math.inf

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("dimension must be >= 2")
        if self.r_max <= 0:
            raise DomainError("r_max must be positive")
        if self.r_max > self.f.domain_max() * (1 + 1e-12):
            raise DomainError("r_max exceeds the profile domain "
                              f"({self.r_max} > {self.f.domain_max()})")

    def weight(self, r):
        """Radial measure density f(r)^(n-1)."""
        return self.f.eval(r, 0) ** (self.n - 1)

    def is_compact(self) -> bool:
        return self.f.variant == SPHERE


@dataclass(frozen=True)
class CurvatureReport:
    """Gridded sectional/Ricci profiles of a rotationally symmetric metric.

    Columns: K_rad = -f''/f (planes containing the radial direction),
    K_sph = (1 - f'^2)/f^2 (planes tangent to the orbit spheres),
    Ric_rad = (n-1) K_rad, Ric_tan = K_rad + (n-2) K_sph.
    """

    r: np.ndarray
    k_rad: np.ndarray
    k_sph: np.ndarray
    ric_rad: np.ndarray
    ric_tan: np.ndarray
    pole_slope: float          # analytic f'(0+)
    pole_slope_fd: float       # one-sided finite-difference estimate

    @property
    def minima(self) -> dict:
        return {
            "K_rad": float(self.k_rad.min()),
            "K_sph": float(self.k_sph.min()),
            "Ric_rad": float(self.ric_rad.min()),
            "Ric_tan": float(self.ric_tan.min()),
        }

    def ric_nonnegative(self, tol: float = 1e-8) -> bool:
        return self.ric_rad.min() >= -tol and self.ric_tan.min() >= -tol

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("r,K_rad,K_sph,Ric_rad,Ric_tan\n")
            for k in range(len(self.r)):
                fh.write(",".join(f"{v:.12g}" for v in
                                  (self.r[k], self.k_rad[k], self.k_sph[k],
                                   self.ric_rad[k], self.ric_tan[k])) + "\n")


def curvature_report(M: RotSymManifold, grid) -> CurvatureReport:
    """Fill all curvature columns on a strictly increasing grid in (0, r_max]."""
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise DomainError("curvature grid must exclude r = 0 (columns divide by f)")
    if np.any(grid > M.r_max * (1 + 1e-12)):
        raise DomainError("curvature grid exceeds r_max")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("curvature grid must be strictly increasing")
    f = M.f.eval(grid, 0)
    fp = M.f.eval(grid, 1)
    fpp = M.f.eval(grid, 2)
    k_rad = -fpp / f
    k_sph = (1.0 - fp ** 2) / f ** 2
    ric_rad = (M.n - 1) * k_rad
    ric_tan = k_rad + (M.n - 2) * k_sph
    # one-sided slope estimate by Richardson on shrinking steps; the capped
    # profile attains its limit slope only on an O(eps^2) zone, so the step
    # must dive below that scale
    h0 = min(1e-3, grid[0] / 4) if grid[0] < 0.1 else 1e-3
    if M.f.variant == CAPPED_CYLINDER:
        h0 = min(h0, 0.05 * M.f.params["eps"] ** 2)
    s1 = (M.f.eval(h0, 0) - M.f.eval(0.0, 0)) / h0
    s2 = (M.f.eval(h0 / 2, 0) - M.f.eval(0.0, 0)) / (h0 / 2)
    pole_fd = 2 * s2 - s1
    return CurvatureReport(grid, k_rad, k_sph, ric_rad, ric_tan,
                           M.f.pole_slope(), float(pole_fd))


def volume_ball(M: RotSymManifold, r: float) -> float:
    """Volume of the geodesic ball B_r(pole): sigma_{n-1} * int_0^r f^(n-1)."""
    if r <= 0 or r > M.r_max * (1 + 1e-12):
        raise DomainError(f"ball radius {r} outside (0, r_max]")
    pts = [b for b in M.f.breakpoints() if 0 < b < r]
    integral, _ = quad(lambda s: M.weight(s), 0.0, r,
                       points=pts or None, limit=200, epsrel=1e-10, epsabs=0)
    return sphere_surface_area(M.n) * integral


@dataclass(frozen=True)
class AvrEstimate:
    """Asymptotic volume ratio lim Vol(B_r)/(omega_n r^n) with Richardson residual."""

    value: float
    residual: float


def avr_estimate(M: RotSymManifold, k_min: int = 2, k_max: int = 11) -> AvrEstimate:
    """Estimate AVR by Richardson extrapolation of the ratio over r_k = 2^k.

    Requires an infinitely extendable profile (r_max = inf semantics);
    compact variants are rejected.
    """
    if M.is_compact():
        raise UnsupportedError("AVR undefined for compact (sphere) manifolds")
    if math.isfinite(M.r_max) and M.r_max < 2.0 ** k_max:
        raise DomainError("profile not extendable far enough for AVR sampling")
    omega = unit_ball_volume(M.n)
    ratios = []
    for k in range(k_min, k_max + 1):
        r = 2.0 ** k
        ratios.append(volume_ball(M, r) / (omega * r ** M.n))
    # iterated Richardson in 1/r (step halves each level)
    tab = [np.asarray(ratios, dtype=float)]
    for m in range(1, len(ratios)):
        prev = tab[-1]
        fac = 2.0 ** m
        tab.append((fac * prev[1:] - prev[:-1]) / (fac - 1.0))
    value = float(tab[-1][0])
    residual = abs(value - float(tab[-2][0])) if len(tab) > 1 else math.inf
    if abs(value) < 1e-10:
        value = 0.0 if abs(value) < max(residual, 1e-12) else value
    return AvrEstimate(value, float(residual))


def kristaly_bound(M: RotSymManifold, vol: float, avr: Optional[float] = None) -> float:
    """Eigenvalue lower bound j_{n/2-1}^2 (omega_n AVR)^{2/n} vol^{-2/n}.

    Sharp on domains of maximal-volume-growth manifolds; degenerates to 0
    when AVR = 0 (flagged by the caller's report).
    """
    if vol <= 0:
        raise DomainError("volume must be positive")
    if avr is None:
        avr = avr_estimate(M).value
    if avr < 0:
        raise DomainError("AVR must be nonnegative")
    if avr == 0.0:
        return 0.0
    from .radial_spectrum import bessel_root
    j = bessel_root(M.n / 2.0 - 1.0)
    omega = unit_ball_volume(M.n)
    return j ** 2 * (omega * avr) ** (2.0 / M.n) * vol ** (-2.0 / M.n)
