import math

import numpy as np
import pytest

from warpspec import (
    DomainError,
    InvariantViolation,
    RadialDirichletProblem,
    RotSymManifold,
    UnsupportedError,
    WarpingFunction,
    solve_fd,
)
from warpspec.busemann_check import (
    C0CheckSpec,
    build_busemann_field,
    build_distance_field,
    busemann,
    c0_estimate_check,
    distance,
    laplacian_b_spotcheck,
    path_length,
    strictness_check,
)
from warpspec.rayleigh_bounds import FamilyPlan


def euclid(n=2):
    return RotSymManifold(n, WarpingFunction.euclidean(), r_max=math.inf)


def cylinder(c=0.05):
    return RotSymManifold(2, WarpingFunction.constant(c), r_max=math.inf)


@pytest.fixture(scope="module")
def flat_field():
    return build_distance_field(euclid(), (2.0, 0.0), (256, 256), r_max=4.0)


@pytest.fixture(scope="module")
def flat_busemann():
    return build_busemann_field(euclid(), r_max=10.0, resolution=(256, 256))


# ----------------------------------------------------------------------------
# distances
# ----------------------------------------------------------------------------

def test_flat_antipodal_pair():
    d = distance(euclid(), (1.0, 0.0), (1.0, math.pi), r_max=4.0)
    assert d == pytest.approx(2.0, rel=1e-3)


def test_flat_law_of_cosines_20_pairs():
    rng = np.random.default_rng(123)
    M = euclid()
    field = build_distance_field(M, (2.0, 0.0), (256, 256), r_max=4.0)
    for _ in range(20):
        r2, dp = rng.uniform(0.2, 3.0), rng.uniform(0.0, math.pi)
        d = distance(M, (2.0, 0.0), (r2, dp), field=field)
        exact = math.sqrt(4.0 + r2 ** 2 - 4.0 * r2 * math.cos(dp))
        assert abs(d - exact) / exact < 0.01


def test_cylinder_pairs_product_formula():
    # valid when the geodesic stays in the cylinder region (r >= 3 eps)
    eps = 0.05
    M = cylinder(eps)
    rng = np.random.default_rng(5)
    for _ in range(12):
        r1, r2 = rng.uniform(3 * eps, 3.0, size=2)
        dp = rng.uniform(0.0, math.pi)
        d = distance(M, (r1, 0.0), (r2, dp), r_max=4.0)
        exact = math.hypot(r1 - r2, eps * dp)
        assert abs(d - exact) / exact < 0.01


def test_distance_source_at_field():
    # the field interpolates across the cone apex, so the value at the exact
    # source is O(h/2); the nearest node must be essentially at distance zero
    fld = build_distance_field(euclid(), (2.0, 0.0), (128, 128), r_max=4.0)
    assert fld.value(2.0, 0.0) <= fld.h_r
    assert fld.dist.min() <= fld.h_r


def test_field_triangle_inequality(flat_field):
    # d(x, y) <= d(x, z) + d(z, y) on sampled triples, within 3x the bound
    M = euclid()
    rng = np.random.default_rng(11)
    slack = 3 * flat_field.err_bound
    for _ in range(10):
        rz, pz = rng.uniform(0.3, 3.5), rng.uniform(0.0, math.pi)
        z_field = build_distance_field(M, (rz, 0.0), (128, 128), r_max=4.0)
        ry, py = rng.uniform(0.3, 3.5), rng.uniform(0.0, math.pi)
        d_xy = flat_field.value(ry, py)
        d_xz = flat_field.value(rz, 0.0)
        d_zy = z_field.value(ry, abs(py - 0.0))
        assert d_xy <= d_xz + d_zy + slack


def test_field_reflection_symmetry(flat_field):
    # psi -> -psi is built into the half-plane; check mirrored pairs agree
    v1 = flat_field.value(1.3, 0.4)
    v2 = flat_field.value(1.3, -0.4)
    assert v1 == v2


def test_field_csv_export(tmp_path, flat_field):
    path = tmp_path / "field.csv"
    flat_field.to_csv(path)
    first = path.read_text().splitlines()[0]
    assert first == "r,psi,value"


def test_off_axis_source_rejected():
    with pytest.raises(UnsupportedError):
        build_distance_field(euclid(), (1.0, 0.5), (64, 64), r_max=2.0)


def test_path_length_straight_radial():
    M = euclid()
    L = path_length(M, [(0.5, 0.0), (1.5, 0.0)])
    assert L == pytest.approx(1.0, rel=1e-12)


# ----------------------------------------------------------------------------
# Busemann values
# ----------------------------------------------------------------------------

def test_flat_field_closed_form(flat_busemann):
    R, P = np.meshgrid(flat_busemann.r, flat_busemann.psi, indexing="ij")
    err = np.abs(flat_busemann.b - R * np.cos(P))
    assert err[R <= 2.0].max() <= 0.01 * 10.0


def test_on_ray_value():
    b, res = busemann(euclid(), (1.5, 0.0), r_max=8.0, resolution=(128, 128))
    assert b == pytest.approx(1.5, abs=max(2 * res, 0.02))


def test_pointwise_flat_value():
    b, res = busemann(euclid(), (1.2, 2.0), r_max=10.0, resolution=(128, 128))
    exact = 1.2 * math.cos(2.0)
    assert abs(b - exact) <= 2 * res + 0.02


def test_cylinder_busemann_is_radius():
    eps = 0.05
    M = cylinder(eps)
    bf = build_busemann_field(M, r_max=4.0, resolution=(256, 256))
    R, _ = np.meshgrid(bf.r, bf.psi, indexing="ij")
    sel = (R >= 3 * eps) & (R <= 1.0)
    assert np.abs(bf.b - R)[sel].max() <= 0.01 * 4.0


def test_truncations_nondecreasing(flat_busemann):
    # b_k = t_k - d(., gamma(t_k)) grows with the truncation by the triangle
    # inequality; allow the discretization bound as slack
    b_k = flat_busemann.b_k
    slack = flat_busemann.err_bound
    R, _ = np.meshgrid(flat_busemann.r, flat_busemann.psi, indexing="ij")
    sel = R <= 2.0
    for k in range(b_k.shape[0] - 1):
        assert float((b_k[k] - b_k[k + 1])[sel].max()) <= slack


def test_busemann_bounded_by_pole_distance(flat_busemann):
    # |b(x)| <= d(x, gamma(0)) = r
    R, _ = np.meshgrid(flat_busemann.r, flat_busemann.psi, indexing="ij")
    sel = R <= 2.0
    resid = flat_busemann.residual
    excess = (np.abs(flat_busemann.b) - R - 2 * resid - flat_busemann.err_bound)[sel]
    assert float(excess.max()) <= 0.0


def test_one_lipschitz_sampled(flat_busemann):
    # |b(x) - b(y)| <= d(x, y) + slack inside the working region r <= 2,
    # where the truncation schedule has actually converged
    M = euclid()
    rng = np.random.default_rng(0)
    bf = flat_busemann
    region = np.flatnonzero(bf.r <= 2.0)
    for src in rng.uniform(0.3, 2.0, size=4):
        fld = build_distance_field(M, (float(src), 0.0), (256, 256), 10.0)
        b_src = bf.value(src, 0.0)
        i_src = int(np.clip(np.searchsorted(bf.r, src), 0, len(bf.r) - 1))
        ii = rng.choice(region, size=50)
        jj = rng.integers(0, len(bf.psi), size=50)
        lhs = np.abs(b_src - bf.b[ii, jj])
        rhs = (fld.dist[ii, jj] + fld.err_bound + bf.err_bound
               + 2 * (bf.residual[ii, jj] + bf.residual[i_src, 0]))
        assert float((lhs - rhs).max()) <= 0.0


def test_compact_manifold_rejected():
    M = RotSymManifold(2, WarpingFunction.sphere(1.0), r_max=math.pi)
    with pytest.raises(UnsupportedError):
        build_busemann_field(M, r_max=2.0)


# ----------------------------------------------------------------------------
# Laplacian spot checks
# ----------------------------------------------------------------------------

def test_spotcheck_cylinder_zero():
    assert laplacian_b_spotcheck(cylinder(0.05), (0.2, 3.0)) == 0.0


def test_spotcheck_euclidean_zero():
    assert laplacian_b_spotcheck(euclid(), "euclidean") == 0.0


def test_spotcheck_cap_nonnegative():
    eps = 2.0 ** -4
    M = RotSymManifold(2, WarpingFunction.capped_cylinder(eps), math.inf)
    val = laplacian_b_spotcheck(M, (eps * 1e-3, eps * (1 - 1e-9)))
    assert val >= 0.0


def test_spotcheck_requires_closed_form():
    with pytest.raises(UnsupportedError):
        laplacian_b_spotcheck(cylinder(), "weird-region")


# ----------------------------------------------------------------------------
# the pointwise bound on eigenfunctions
# ----------------------------------------------------------------------------

def test_interval_extremal_equality():
    # u = cos(pi r/4), b = r, lambda = pi^2/16: asin(u) = sqrt(lambda)(2 - r)
    # exactly, so the violation field vanishes to quadrature precision
    lam = math.pi ** 2 / 16.0
    spec = C0CheckSpec.analytic(
        lam,
        lambda r: np.cos(math.pi * np.asarray(r) / 4.0),
        lambda R, P: R,
        np.linspace(0.0, 2.0, 801), np.linspace(0.0, math.pi, 41),
        tolerance=1e-9)
    rep = c0_estimate_check(spec)
    assert abs(rep.max_violation) <= 1e-9
    assert rep.passed


def test_euclidean_c0_with_analytic_busemann():
    # the unit ball sits inside the band [-1, 1] of b = r cos(psi), so
    # a = -1, D = 2, alpha = 1; lambda = j_0^2 far exceeds pi^2/16, giving
    # strictly negative violations away from the boundary corner (R, 0)
    # where both sides vanish
    sol = solve_fd(RadialDirichletProblem(euclid(2), 1.0), 512)
    spec = C0CheckSpec.analytic(
        sol.lam,
        lambda r: np.interp(r, sol.nodes, sol.values, left=1.0, right=0.0),
        lambda R, P: R * np.cos(P),
        np.linspace(0.0, 0.995, 201), np.linspace(0.0, math.pi, 41),
        tolerance=1e-3, alpha=1.0)
    rep = c0_estimate_check(spec)
    assert rep.max_violation < 0.0
    assert rep.passed
    assert rep.band_width == pytest.approx(2.0, abs=0.02)


def test_euclidean_c0_full_pipeline(flat_busemann):
    sol = solve_fd(RadialDirichletProblem(euclid(2), 1.0), 512)
    spec = C0CheckSpec.from_pipeline(sol, flat_busemann, 1.0)
    rep = c0_estimate_check(spec)
    assert rep.passed


@pytest.mark.parametrize("i", [6, 8])
def test_family_c0_pipeline(i):
    plan = FamilyPlan(i)
    M = plan.manifold()
    sol = solve_fd(RadialDirichletProblem(M, plan.r_i), 1024)
    bf = build_busemann_field(M, r_max=plan.r_i * 2.0, resolution=(256, 256))
    spec = C0CheckSpec.from_pipeline(sol, bf, plan.r_i)
    rep = c0_estimate_check(spec)
    assert rep.passed, (rep.max_violation, rep.tolerance)


def test_band_construction_guard():
    spec = C0CheckSpec(
        lam=1.0, r_nodes=np.array([0.0, 1.0]), u=np.array([1.0, 0.5]),
        r_grid=np.array([0.0, 1.0]), psi_grid=np.array([0.0]),
        b=np.array([[0.0], [1.0]]), tolerance=1e-6)
    # b above alpha anywhere means the band was built wrong
    spec.b[0, 0] = 5.0
    spec.b[1, 0] = 0.0
    rep = c0_estimate_check(spec)      # alpha = max b, so this is consistent
    assert rep.alpha == 5.0


# ----------------------------------------------------------------------------
# strictness of the unit-ball bound
# ----------------------------------------------------------------------------

def test_strictness_euclidean_margin():
    rep = strictness_check(euclid(2), N=512, resolution=(128, 128))
    expected = 5.7831859629467845 - math.pi ** 2 / 16.0
    assert rep.margin == pytest.approx(expected, abs=1e-6)
    assert rep.ray_gap >= -1e-6


def test_strictness_capped_small_margin():
    M = RotSymManifold(2, WarpingFunction.capped_cylinder(2.0 ** -8), math.inf)
    rep = strictness_check(M, N=1024, resolution=(128, 128))
    assert rep.margin > 0.0
    # near the interval scale pi^2/4 - pi^2/16 for a diameter-1 band
    assert rep.margin < math.pi ** 2 / 4


def test_strictness_refuses_sphere():
    M = RotSymManifold(2, WarpingFunction.sphere(1.0), r_max=math.pi)
    with pytest.raises(UnsupportedError):
        strictness_check(M)
