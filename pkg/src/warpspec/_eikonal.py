"""Source-factored eikonal solver on the (r, psi) half-plane.

Solves |grad T|_g = 1 for the metric ds^2 = dr^2 + f(r)^2 dpsi^2 with a point
source on the axis.  T is split as T = T0 + v where T0 is the length of the
straight (r, psi)-chord from the source (computed with an analytic gradient),
so the conical singularity at the source never meets the difference stencil.
v is solved by upwind Gauss-Seidel sweeps (numba) or a vectorized Jacobi
iteration (fallback); both converge to the same monotone fixed point.

Boundary conditions: reflection in psi at 0 and pi (the half-plane represents
a rotationally symmetric plane through the axis), one-sided at r = 0, r_max.
A vanishing pole profile f(0) = 0 collapses the r = 0 row to a single point.
"""
from __future__ import annotations

import math

import numpy as np

BIG = 1e30
_CAUSAL_SLACK = -1e-12


def chord_lengths(fv, dfv, rs, ps, src_r, nq: int = 12):
    """Chord length T0 and its gradient (dT0/dr, dT0/dpsi) on the tensor grid.

    The chord from (src_r, 0) to (r, psi) is the straight segment in (r, psi)
    coordinates; its metric length is integrated by composite Simpson.
    """
    R, P = np.meshgrid(rs, ps, indexing="ij")
    dR = R - src_r
    s = np.linspace(0.0, 1.0, 2 * nq + 1)[:, None, None]
    w = np.ones(2 * nq + 1)
    w[1::2], w[2:-1:2] = 4.0, 2.0
    w = (w / (6.0 * nq))[:, None, None]
    rr = src_r + s * dR[None]
    f = fv(rr)
    fp = dfv(rr)
    g = np.sqrt(dR[None] ** 2 + f ** 2 * P[None] ** 2)
    g = np.maximum(g, 1e-300)
    T0 = (w * g).sum(axis=0)
    T0r = (w * (dR[None] + f * fp * P[None] ** 2 * s) / g).sum(axis=0)
    T0p = (w * (f ** 2 * P[None]) / g).sum(axis=0)
    return T0, T0r, T0p


def _gs_cycle_py(T, T0, T0r, T0p, f, h_r, h_p):
    """One cycle of 4 directional Gauss-Seidel sweeps; returns max decrease."""
    nr, npsi = T.shape
    maxch = 0.0
    for sweep in range(4):
        if sweep == 0:
            ia, ib, istep = 0, nr, 1
            ja, jb, jstep = 0, npsi, 1
        elif sweep == 1:
            ia, ib, istep = nr - 1, -1, -1
            ja, jb, jstep = 0, npsi, 1
        elif sweep == 2:
            ia, ib, istep = 0, nr, 1
            ja, jb, jstep = npsi - 1, -1, -1
        else:
            ia, ib, istep = nr - 1, -1, -1
            ja, jb, jstep = npsi - 1, -1, -1
        i = ia
        while i != ib:
            fi = f[i]
            fi2 = fi * fi
            j = ja
            while j != jb:
                t0 = T0[i, j]
                g0r = T0r[i, j]
                g0p = T0p[i, j]
                # upwind radial neighbour (smaller total T)
                if i > 0:
                    TAu = T[i - 1, j]
                    t0Au = T0[i - 1, j]
                else:
                    TAu = BIG
                    t0Au = 0.0
                if i < nr - 1:
                    TAd = T[i + 1, j]
                    t0Ad = T0[i + 1, j]
                else:
                    TAd = BIG
                    t0Ad = 0.0
                if TAu <= TAd:
                    A_T, t0A, sA = TAu, t0Au, 1.0
                else:
                    A_T, t0A, sA = TAd, t0Ad, -1.0
                # upwind angular neighbour with reflection at 0 and pi
                jm = j - 1 if j > 0 else 1
                jp = j + 1 if j < npsi - 1 else npsi - 2
                TBu = T[i, jm]
                TBd = T[i, jp]
                if TBu <= TBd:
                    B_T, t0B, sB = TBu, T0[i, jm], 1.0
                else:
                    B_T, t0B, sB = TBd, T0[i, jp], -1.0

                best = T[i, j]
                ar = sA / h_r
                ap = sB / h_p
                vA = A_T - t0A
                vB = B_T - t0B
                a1 = g0r - ar * vA
                a2 = g0p - ap * vB
                if fi > 0.0 and A_T < BIG and B_T < BIG:
                    Aq = ar * ar + ap * ap / fi2
                    Bq = 2.0 * (a1 * ar + a2 * ap / fi2)
                    Cq = a1 * a1 + a2 * a2 / fi2 - 1.0
                    disc = Bq * Bq - 4.0 * Aq * Cq
                    if disc >= 0.0:
                        v2 = (-Bq + math.sqrt(disc)) / (2.0 * Aq)
                        if ((a1 + ar * v2) * sA >= _CAUSAL_SLACK
                                and (a2 + ap * v2) * sB >= _CAUSAL_SLACK):
                            cand = t0 + v2
                            if cand < best:
                                best = cand
                if A_T < BIG:
                    cand = t0 + (sA - a1) / ar       # root with T_r = sA
                    if cand < best:
                        best = cand
                if B_T < BIG and fi > 0.0:
                    cand = t0 + (sB * fi - a2) / ap  # root with T_psi = sB*f
                    if cand < best:
                        best = cand
                if best < T[i, j]:
                    ch = T[i, j] - best
                    if ch > maxch:
                        maxch = ch
                    T[i, j] = best
                j += jstep
            i += istep
        if f[0] == 0.0:
            tmin = T[0, 0]
            for j in range(1, npsi):
                if T[0, j] < tmin:
                    tmin = T[0, j]
            for j in range(npsi):
                T[0, j] = tmin
    return maxch


try:
    from numba import njit as _njit
    _gs_cycle = _njit(cache=True)(_gs_cycle_py)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _gs_cycle = _gs_cycle_py
    HAVE_NUMBA = False


def _jacobi_pass(T, T0, T0r, T0p, fcol, h_r, h_p):
    """Vectorized whole-grid update (same candidates as the GS sweep)."""
    nr, npsi = T.shape
    f = fcol[:, None] * np.ones((1, npsi))
    f2 = np.maximum(f, 1e-300) ** 2

    Aup = np.full_like(T, BIG)
    Adn = np.full_like(T, BIG)
    T0Au = np.zeros_like(T)
    T0Ad = np.zeros_like(T)
    Aup[1:, :] = T[:-1, :]
    T0Au[1:, :] = T0[:-1, :]
    Adn[:-1, :] = T[1:, :]
    T0Ad[:-1, :] = T0[1:, :]
    useAu = Aup <= Adn
    A_T = np.where(useAu, Aup, Adn)
    T0A = np.where(useAu, T0Au, T0Ad)
    sA = np.where(useAu, 1.0, -1.0)

    Bup = np.empty_like(T)
    Bdn = np.empty_like(T)
    T0Bu = np.empty_like(T)
    T0Bd = np.empty_like(T)
    Bup[:, 1:] = T[:, :-1]
    Bup[:, 0] = T[:, 1]
    T0Bu[:, 1:] = T0[:, :-1]
    T0Bu[:, 0] = T0[:, 1]
    Bdn[:, :-1] = T[:, 1:]
    Bdn[:, -1] = T[:, -2]
    T0Bd[:, :-1] = T0[:, 1:]
    T0Bd[:, -1] = T0[:, -2]
    useBu = Bup <= Bdn
    B_T = np.where(useBu, Bup, Bdn)
    T0B = np.where(useBu, T0Bu, T0Bd)
    sB = np.where(useBu, 1.0, -1.0)

    ar = sA / h_r
    ap = sB / h_p
    vA = A_T - T0A
    vB = B_T - T0B
    a1 = T0r - ar * vA
    a2 = T0p - ap * vB

    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        Aq = ar ** 2 + ap ** 2 / f2
        Bq = 2.0 * (a1 * ar + a2 * ap / f2)
        Cq = a1 ** 2 + a2 ** 2 / f2 - 1.0
        disc = Bq ** 2 - 4.0 * Aq * Cq
        v2 = np.where(disc >= 0, (-Bq + np.sqrt(np.maximum(disc, 0.0))) / (2.0 * Aq), np.nan)
        ok2 = (~np.isnan(v2)) & ((a1 + ar * v2) * sA >= _CAUSAL_SLACK) \
            & ((a2 + ap * v2) * sB >= _CAUSAL_SLACK) & (A_T < BIG) & (B_T < BIG) & (f > 0)
        T2 = np.where(ok2, T0 + v2, BIG)
        T1r = np.where(A_T < BIG, T0 + (sA - a1) / ar, BIG)
        T1p = np.where((B_T < BIG) & (f > 0), T0 + (sB * f - a2) / ap, BIG)

    Tnew = np.minimum(np.minimum(T2, T1r), np.minimum(T1p, T))
    if fcol[0] == 0.0:
        Tnew[0, :] = Tnew[0, :].min()
    change = float(np.max(np.where(Tnew < BIG, T - Tnew, 0.0)))
    return Tnew, change


def solve_field(fv, dfv, r_max, src_r, nr=256, npsi=256,
                tol_factor=1e-11, max_cycles=200):
    """Distance field from the axis point (src_r, 0).  Returns (r, psi, T)."""
    rs = np.linspace(0.0, r_max, nr)
    ps = np.linspace(0.0, math.pi, npsi)
    h_r = rs[1] - rs[0]
    h_p = ps[1] - ps[0]
    T0, T0r, T0p = chord_lengths(fv, dfv, rs, ps, src_r)
    fcol = np.asarray(fv(rs), dtype=float)
    T = np.full((nr, npsi), BIG)
    T[T0 <= 4.0 * h_r] = T0[T0 <= 4.0 * h_r]   # chord is exact to O(d^3) here
    tol = tol_factor * r_max
    if HAVE_NUMBA:
        for _ in range(max_cycles):
            ch = _gs_cycle(T, T0, T0r, T0p, fcol, h_r, h_p)
            if ch < tol:
                break
    else:  # pragma: no cover - exercised only without numba
        for _ in range(40 * max_cycles):
            T, ch = _jacobi_pass(T, T0, T0r, T0p, fcol, h_r, h_p)
            if ch < tol:
                break
    return rs, ps, T
