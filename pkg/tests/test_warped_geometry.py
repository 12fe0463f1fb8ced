import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpspec import (
    DomainError,
    RotSymManifold,
    UnsupportedError,
    WarpingFunction,
    avr_estimate,
    curvature_report,
    kristaly_bound,
    sphere_surface_area,
    unit_ball_volume,
    volume_ball,
)

# frozen with mpmath before the build
J0 = 2.4048255576957728
CAP_INTEGRAL_EPS4 = 0.00368800647553478   # int_0^eps f for eps = 2^-4


def euclid(n=2):
    return RotSymManifold(n, WarpingFunction.euclidean(), r_max=math.inf)


# ----------------------------------------------------------------------------
# profile evaluation
# ----------------------------------------------------------------------------

def test_euclidean_profile_is_identity():
    f = WarpingFunction.euclidean()
    assert f.eval(0.5, 0) == 0.5
    assert f.eval(0.5, 1) == 1.0
    assert f.eval(0.5, 2) == 0.0


def test_capped_constant_branch():
    f = WarpingFunction.capped_cylinder(0.25)
    assert f.eval(1.0, 0) == 0.25
    assert f.eval(1.0, 1) == 0.0
    assert f.eval(1.0, 2) == 0.0


def test_capped_pole_values():
    eps = 0.25
    f = WarpingFunction.capped_cylinder(eps)
    assert f.eval(0.0, 0) == 0.0
    # symbolic limit of the cap formula: f'(0+) = 1/eps, cross-checked by a
    # one-sided difference at r = 1e-4 eps
    assert f.eval(0.0, 1) == pytest.approx(4.0, abs=1e-12)
    h = 1e-4 * eps
    fd = (f.eval(h, 0) - 0.0) / h
    assert fd == pytest.approx(4.0, rel=1e-3)


def test_capped_continuous_at_eps():
    eps = 2.0 ** -5
    f = WarpingFunction.capped_cylinder(eps)
    below = f.eval(eps * (1 - 1e-9), 0)
    assert below == pytest.approx(eps, abs=1e-15)


def test_sphere_profile():
    f = WarpingFunction.sphere(2.0)
    assert f.eval(1.0, 0) == pytest.approx(2.0 * math.sin(0.5))
    assert f.eval(1.0, 1) == pytest.approx(math.cos(0.5))
    assert f.domain_max() == pytest.approx(2.0 * math.pi)
    with pytest.raises(DomainError):
        f.eval(7.0, 0)


def test_order_above_two_rejected():
    with pytest.raises(UnsupportedError):
        WarpingFunction.euclidean().eval(1.0, 3)


def test_tabulated_matches_samples():
    r = np.linspace(0.0, 2.0, 41)
    f = WarpingFunction.tabulated(r, np.sin(r))
    assert f.eval(1.0, 0) == pytest.approx(math.sin(1.0), abs=1e-6)
    assert f.eval(1.0, 1) == pytest.approx(math.cos(1.0), abs=1e-4)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["euclidean", "constant", "sphere", "capped"]),
       st.floats(min_value=0.02, max_value=0.97))
def test_analytic_derivatives_match_central_differences(variant, frac):
    """|analytic - central difference| <= 1e-6 (1 + |value|) away from breakpoints.

    Steps are tuned per order: second differences amplify roundoff by 1/h^2,
    so they need a larger step than first differences.
    """
    if variant == "euclidean":
        f, r_hi, h1, h2 = WarpingFunction.euclidean(), 3.0, 1e-6, 1e-4
    elif variant == "constant":
        f, r_hi, h1, h2 = WarpingFunction.constant(0.3), 3.0, 1e-6, 1e-4
    elif variant == "sphere":
        f, r_hi, h1, h2 = WarpingFunction.sphere(1.5), 1.5 * math.pi * 0.95, 1e-6, 1e-4
    else:
        eps = 2.0 ** -4
        f, r_hi = WarpingFunction.capped_cylinder(eps), 1.0
        h1 = h2 = eps * 1e-3
    r = frac * r_hi
    if any(abs(r - b) < 10 * max(h1, h2) for b in f.breakpoints()):
        return
    d1 = (f.eval(r + h1, 0) - f.eval(r - h1, 0)) / (2 * h1)
    d2 = (f.eval(r + h2, 0) - 2 * f.eval(r, 0) + f.eval(r - h2, 0)) / h2 ** 2
    assert abs(f.eval(r, 1) - d1) <= 1e-6 * (1 + abs(d1))
    assert abs(f.eval(r, 2) - d2) <= 1e-6 * (1 + abs(d2))


def test_json_round_trip():
    for f in (WarpingFunction.euclidean(), WarpingFunction.constant(0.7),
              WarpingFunction.sphere(1.2), WarpingFunction.capped_cylinder(0.125)):
        g = WarpingFunction.from_json(f.to_json())
        assert g.variant == f.variant
        assert g.eval(0.3, 1) == f.eval(0.3, 1)
    obj = json.loads(WarpingFunction.sphere(1.2).to_json())
    assert set(obj) == {"variant", "params"}


# ----------------------------------------------------------------------------
# curvature
# ----------------------------------------------------------------------------

def test_euclidean_curvature_vanishes():
    rep = curvature_report(euclid(3), np.linspace(0.1, 2.0, 64))
    for col in (rep.k_rad, rep.k_sph, rep.ric_rad, rep.ric_tan):
        assert np.max(np.abs(col)) == 0.0
    assert rep.ric_nonnegative()


def test_sphere_curvature_constant():
    n = 3
    M = RotSymManifold(n, WarpingFunction.sphere(1.0), r_max=math.pi)
    rep = curvature_report(M, np.linspace(0.2, 2.8, 50))
    assert np.allclose(rep.k_rad, 1.0, atol=1e-12)
    assert np.allclose(rep.k_sph, 1.0, atol=1e-12)
    assert np.allclose(rep.ric_rad, n - 1, atol=1e-12)
    assert np.allclose(rep.ric_tan, n - 1, atol=1e-12)


def test_capped_curvature_minima():
    # frozen FD oracle (10^4-point grid, h = 1e-4 eps): min Ric_rad = 0 within
    # the oracle noise 1e-6; the minimum sits on the flat cylinder branch
    M = RotSymManifold(2, WarpingFunction.capped_cylinder(2.0 ** -3), math.inf)
    rep = curvature_report(M, np.linspace(1e-3, 1.0, 2000))
    assert rep.minima["Ric_rad"] == pytest.approx(0.0, abs=1e-6)
    assert rep.minima["Ric_tan"] == pytest.approx(0.0, abs=1e-6)  # n = 2
    assert rep.pole_slope == 8.0
    assert rep.pole_slope_fd == pytest.approx(8.0, rel=1e-3)
    # the orbit-sphere column goes negative where f' > 1 (reported, not gated)
    assert rep.minima["K_sph"] < 0.0


def test_report_minima_match_columns():
    M = RotSymManifold(3, WarpingFunction.capped_cylinder(2.0 ** -4), math.inf)
    rep = curvature_report(M, np.linspace(1e-3, 1.0, 500))
    assert rep.minima["Ric_tan"] == rep.ric_tan.min()


def test_grid_with_zero_rejected():
    with pytest.raises(DomainError):
        curvature_report(euclid(), np.linspace(0.0, 1.0, 8))


def test_report_csv_export(tmp_path):
    rep = curvature_report(euclid(), np.linspace(0.1, 1.0, 16))
    path = tmp_path / "report.csv"
    rep.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "r,K_rad,K_sph,Ric_rad,Ric_tan"
    assert len(lines) == 17


# ----------------------------------------------------------------------------
# volumes and asymptotic ratio
# ----------------------------------------------------------------------------

def test_unit_disk_area():
    assert volume_ball(euclid(2), 1.0) == pytest.approx(math.pi, rel=1e-10)


def test_euclidean_ball_volume_n3():
    assert volume_ball(euclid(3), 2.0) == pytest.approx(32 * math.pi / 3, rel=1e-10)


def test_cylinder_lateral_area():
    M = RotSymManifold(2, WarpingFunction.constant(0.1), math.inf)
    assert volume_ball(M, 1.0) == pytest.approx(0.2 * math.pi, rel=1e-10)


def test_capped_volume_against_frozen_cap_integral():
    eps = 2.0 ** -4
    M = RotSymManifold(2, WarpingFunction.capped_cylinder(eps), math.inf)
    oracle = 2 * math.pi * (CAP_INTEGRAL_EPS4 + eps * (1.0 - eps))
    assert volume_ball(M, 1.0) == pytest.approx(oracle, rel=1e-9)


def test_volume_strictly_increasing():
    M = RotSymManifold(2, WarpingFunction.capped_cylinder(2.0 ** -3), math.inf)
    radii = np.linspace(0.05, 3.0, 24)
    vols = [volume_ball(M, r) for r in radii]
    assert all(b > a for a, b in zip(vols, vols[1:]))


def test_avr_euclidean_is_one():
    for n in (2, 3):
        est = avr_estimate(euclid(n))
        assert abs(est.value - 1.0) <= 1e-8


def test_avr_cylinder_is_zero():
    M = RotSymManifold(2, WarpingFunction.constant(0.4), math.inf)
    assert abs(avr_estimate(M).value) <= 1e-6


def test_avr_capped_is_zero():
    # oracle: Vol(B_r) = 2 pi eps (r - O(eps)) grows linearly, so the ratio
    # decays like 1/r and the extrapolation lands on 0
    M = RotSymManifold(2, WarpingFunction.capped_cylinder(2.0 ** -4), math.inf)
    assert abs(avr_estimate(M).value) <= 1e-6


def test_avr_rejects_sphere():
    M = RotSymManifold(2, WarpingFunction.sphere(1.0), r_max=math.pi)
    with pytest.raises(UnsupportedError):
        avr_estimate(M)


# ----------------------------------------------------------------------------
# the volume-growth eigenvalue bound
# ----------------------------------------------------------------------------

def test_bound_equality_case_n2():
    # equality on flat space: bound(vol = omega_2) = j_0^2
    val = kristaly_bound(euclid(2), unit_ball_volume(2), avr=1.0)
    assert val == pytest.approx(J0 ** 2, abs=1e-8)


def test_bound_equality_case_n3():
    # j_{1/2} = pi since J_{1/2} is proportional to sin(x)/sqrt(x)
    val = kristaly_bound(euclid(3), unit_ball_volume(3), avr=1.0)
    assert val == pytest.approx(math.pi ** 2, abs=1e-8)


def test_bound_degenerates_at_zero_avr():
    M = RotSymManifold(2, WarpingFunction.capped_cylinder(2.0 ** -4), math.inf)
    assert kristaly_bound(M, 5.0, avr=0.0) == 0.0


def test_bound_rejects_bad_volume():
    with pytest.raises(DomainError):
        kristaly_bound(euclid(2), 0.0, avr=1.0)


# ----------------------------------------------------------------------------
# construction guards
# ----------------------------------------------------------------------------

def test_dimension_guard():
    with pytest.raises(DomainError):
        RotSymManifold(1, WarpingFunction.euclidean(), 1.0)


def test_sphere_chart_guard():
    with pytest.raises(DomainError):
        RotSymManifold(2, WarpingFunction.sphere(1.0), r_max=4.0)


def test_sigma_omega_consistency():
    for n in range(2, 8):
        assert sphere_surface_area(n) == pytest.approx(n * unit_ball_volume(n), rel=1e-14)
    assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-14)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-14)
