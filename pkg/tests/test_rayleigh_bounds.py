import math

import numpy as np
import pytest

from warpspec import (
    DomainError,
    RadialDirichletProblem,
    RotSymManifold,
    WarpingFunction,
    solve_fd,
)
from warpspec.rayleigh_bounds import (
    SHARP_LIMIT,
    FamilyPlan,
    busemann_lower_bound,
    containment_check,
    diameter_estimate,
    family_upper_bound,
    rayleigh_quotient,
    sandwich,
)

# frozen with mpmath before the build: the closed-form upper bound at i = 10
CLOSED_FORM_I10 = 0.62187059170645


def euclid(n=2):
    return RotSymManifold(n, WarpingFunction.euclidean(), r_max=math.inf)


# ----------------------------------------------------------------------------
# plan validation
# ----------------------------------------------------------------------------

def test_plan_derived_scales():
    plan = FamilyPlan(4)
    assert plan.eps == 0.0625
    assert plan.r_i == pytest.approx(2 - 2 * math.pi * 0.0625 - 0.0625)
    assert plan.tau_i == pytest.approx(math.pi / (2 * plan.r_i))
    assert plan.tau_i * plan.eps < math.pi / 2


def test_plan_rejects_too_small_index():
    with pytest.raises(DomainError):
        FamilyPlan(1)
    # i = 2 fails r_i > eps even though the index field allows >= 2
    with pytest.raises(DomainError):
        FamilyPlan(2)


# ----------------------------------------------------------------------------
# Rayleigh quotients
# ----------------------------------------------------------------------------

def test_exact_eigenfunction_gives_exact_eigenvalue():
    M = RotSymManifold(2, WarpingFunction.constant(1.0), math.inf)
    q = rayleigh_quotient(M, 2.0,
                          lambda r: np.cos(math.pi * np.asarray(r) / 4),
                          lambda r: -math.pi / 4 * np.sin(math.pi * np.asarray(r) / 4))
    assert q == pytest.approx(SHARP_LIMIT, rel=1e-10)


def test_polynomial_quotient_closed_form():
    # int (2r)^2 r dr = 1, int (1-r^2)^2 r dr = 1/6 on (0,1): quotient 6
    q = rayleigh_quotient(euclid(2), 1.0,
                          lambda r: 1 - np.asarray(r) ** 2,
                          lambda r: -2 * np.asarray(r))
    assert q == pytest.approx(6.0, rel=1e-9)


def test_solver_eigenfunction_reproduces_lambda():
    p = RadialDirichletProblem(euclid(2), 1.0)
    sol = solve_fd(p, 512)
    q = rayleigh_quotient(euclid(2), 1.0, (sol.nodes, sol.values))
    assert abs(q - sol.lam) <= 3e-4 * sol.lam


def test_variational_upper_bound_random_polynomials():
    # any admissible test function sits above lambda_1
    rng = np.random.default_rng(7)
    p = RadialDirichletProblem(euclid(2), 1.0)
    lam = solve_fd(p, 512).lam
    for _ in range(5):
        coeffs = rng.uniform(-1.0, 1.0, size=3)

        def phi(r, c=coeffs):
            r = np.asarray(r)
            return (1 - r ** 2) * (1 + c[0] * r + c[1] * r ** 2 + c[2] * r ** 3)

        q = rayleigh_quotient(euclid(2), 1.0, phi)
        assert q >= lam - 1e-6


def test_nonvanishing_test_function_rejected():
    with pytest.raises(DomainError):
        rayleigh_quotient(euclid(2), 1.0, lambda r: np.ones_like(np.asarray(r)))


# ----------------------------------------------------------------------------
# the family upper bound
# ----------------------------------------------------------------------------

def test_closed_form_against_frozen_arithmetic():
    _, closed = family_upper_bound(FamilyPlan(10))
    assert closed == pytest.approx(CLOSED_FORM_I10, abs=1e-11)


def test_quadrature_below_closed_form():
    for i in (4, 8, 10):
        quad, closed = family_upper_bound(FamilyPlan(i))
        assert quad <= closed + 1e-6


def test_closed_form_limit_is_sharp_constant():
    # tau^2 -> (pi/4)^2 and the c-correction vanishes
    vals = [family_upper_bound(FamilyPlan(i))[1] for i in (8, 12)]
    plan16 = FamilyPlan(16)
    c = plan16.tau_i * plan16.eps
    closed16 = plan16.tau_i ** 2 * (math.pi / 4) / (math.pi / 4 - c / 2 - math.sin(2 * c) / 4)
    assert abs(closed16 - SHARP_LIMIT) < 4e-4
    assert vals[1] < vals[0]


def test_zero_cap_reduces_to_interval_quotient():
    # with c = 0 the formula collapses to tau^2
    tau = 0.8
    val = tau ** 2 * (math.pi / 4) / (math.pi / 4 - 0.0 - math.sin(0.0) / 4)
    assert val == pytest.approx(tau ** 2)


def test_closed_form_decreasing_with_geometric_gap():
    closed = {i: family_upper_bound(FamilyPlan(i))[1] for i in range(3, 13)}
    gaps = {i: closed[i] - SHARP_LIMIT for i in closed}
    for i in range(3, 12):
        assert closed[i + 1] < closed[i]
    # |closed(i) - pi^2/16| <= C 2^-i with a single fitted constant
    C = max(gaps[i] * 2.0 ** i for i in gaps)
    for i in gaps:
        assert gaps[i] <= C * 2.0 ** (-i) + 1e-15


# ----------------------------------------------------------------------------
# lower bound evaluator
# ----------------------------------------------------------------------------

def test_lower_bound_values():
    assert busemann_lower_bound(2.0) == pytest.approx(SHARP_LIMIT, rel=1e-15)
    assert busemann_lower_bound(1.0) == pytest.approx(math.pi ** 2 / 4, rel=1e-15)
    assert busemann_lower_bound(4.0) == pytest.approx(math.pi ** 2 / 64, rel=1e-15)
    with pytest.raises(DomainError):
        busemann_lower_bound(0.0)


# ----------------------------------------------------------------------------
# diameters
# ----------------------------------------------------------------------------

def test_euclidean_unit_ball_diameter():
    est = diameter_estimate(euclid(2), 1.0, r_max=1.05)
    assert est.lower == pytest.approx(2.0, abs=0.05)
    assert est.upper == pytest.approx(2.0, abs=0.01)
    assert est.lower <= est.upper + 1e-9


def test_thin_cylinder_ball_diameter():
    # pole-to-boundary dominates; the cross-cylinder detour costs <= pi c
    c = 1e-3
    M = RotSymManifold(2, WarpingFunction.constant(c), math.inf)
    est = diameter_estimate(M, 1.9, r_max=2.0)
    assert est.lower == pytest.approx(1.9, abs=0.02)
    assert est.upper <= 1.9 + math.pi * c + 0.01


def test_hemisphere_diameter_is_pi():
    # oracle: spherical law of cosines puts antipodal equator points at
    # distance pi (the connecting great circle passes through the pole)
    M = RotSymManifold(2, WarpingFunction.sphere(1.0), r_max=0.75 * math.pi)
    est = diameter_estimate(M, math.pi / 2)
    assert est.upper == pytest.approx(math.pi, abs=0.01)
    assert est.lower == pytest.approx(math.pi, abs=0.05)


# ----------------------------------------------------------------------------
# containment
# ----------------------------------------------------------------------------

def test_containment_trivial_points():
    plan = FamilyPlan(6)
    rep = containment_check(plan)
    # the center itself and the pole lie strictly inside the unit ball
    assert rep.max_numerical < 1.0
    assert rep.max_path_bound < 1.0
    assert rep.passed


@pytest.mark.parametrize("i", range(4, 13))
def test_containment_family_range(i):
    rep = containment_check(FamilyPlan(i), resolution=(192, 128))
    assert rep.passed, f"containment violated at i={i}: {rep.max_numerical}"


def test_containment_numerical_matches_structure():
    # the farthest ball point sits at radius r_i, roughly 1 - 2 pi eps away
    plan = FamilyPlan(6)
    rep = containment_check(plan)
    expected = 1.0 - plan.eps     # pole distance dominates: d(pole, p) = 1 - eps
    assert rep.max_numerical == pytest.approx(expected, abs=5e-3)


# ----------------------------------------------------------------------------
# the sandwich
# ----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def sandwich_i6():
    return sandwich(FamilyPlan(6), N=1024)


def test_sandwich_ordering(sandwich_i6):
    s = sandwich_i6
    tol = 3 * (s.computed_error + 1e-9)
    assert s.lower <= s.computed + tol
    assert s.computed <= s.upper_quadrature + tol
    assert s.upper_quadrature <= s.upper_closed_form + 1e-9


def test_sandwich_csv_row(sandwich_i6):
    header = sandwich_i6.CSV_HEADER.split(",")
    row = sandwich_i6.csv_row().split(",")
    assert len(row) == len(header)
    assert row[0] == "6"


def test_gap_shrinks_between_indices():
    g10 = sandwich(FamilyPlan(10), N=1024).gap_to_limit
    g12 = sandwich(FamilyPlan(12), N=1024).gap_to_limit
    assert g12 < g10
    assert g10 <= 0.01
