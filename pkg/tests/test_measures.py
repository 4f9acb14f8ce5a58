"""Tests for geometric functionals: areas, quermassintegrals, ball values,
radii and the ball-comparison gap.

Oracles: closed-form sphere integrals, the Gauss-Bonnet theorem (total
geodesic curvature = 2 pi + area for n=1; integral of the intrinsic Gauss
curvature = 4 pi for n=2), exact antiderivatives, and brute-force center
scans for the radii.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcflow.errors import NotHConvex, OutOfRange
from hcflow.hsurface import GridMode, curvature, hyperboloid_points
from hcflow.measures import (
    CachedBallInverse,
    MeasureSet,
    af_check,
    area_and_volume,
    ball_W,
    ball_W_inverse,
    curvature_integral,
    integrate,
    measure_set,
    quermassintegrals,
    radii,
    sinh_power_antiderivative,
    unit_sphere_area,
    weights_for,
)
from hcflow.shapes import (
    horo_contact_body,
    offset_circle,
    perturbed_circle,
    perturbed_sphere,
    sphere,
)

COSH1, SINH1 = math.cosh(1.0), math.sinh(1.0)


# ---------------------------------------------------------------------------
# quadrature weights


def test_unit_sphere_areas():
    assert abs(unit_sphere_area(1) - 2 * math.pi) < 1e-14
    assert abs(unit_sphere_area(2) - 4 * math.pi) < 1e-14
    assert abs(unit_sphere_area(3) - 2 * math.pi**2) < 1e-13


@pytest.mark.parametrize("n,nodes", [(1, 256), (2, 129), (3, 129), (2, 65)])
def test_weights_integrate_constants(n, nodes):
    state = sphere(n, 1.0, nodes)
    w = weights_for(state)
    assert abs(np.sum(w) - unit_sphere_area(n)) / unit_sphere_area(n) < 1e-10


def test_weights_fallback_rules():
    # 128 intervals -> Boole; 127 -> odd, trapezoid; 126 -> Simpson
    for nodes in (128, 127):
        state = sphere(2, 1.0, nodes)
        w = weights_for(state)
        assert abs(np.sum(w) - 4 * math.pi) < 1e-3  # still a valid rule


def test_integrate_zonal_harmonic():
    # P_2(cos theta) integrates to zero over S^2
    state = sphere(2, 1.0, 129)
    x = np.cos(state.theta)
    val = integrate(state, 0.5 * (3 * x * x - 1.0))
    assert abs(val) < 1e-8


# ---------------------------------------------------------------------------
# areas and volumes


def test_sinh_antiderivative_recursion():
    r = np.array([0.3, 1.0, 2.2])
    assert np.allclose(sinh_power_antiderivative(r, 1), np.cosh(r) - 1, rtol=1e-15)
    # n=2: (sinh r cosh r - r)/2
    assert np.allclose(
        sinh_power_antiderivative(r, 2), (np.sinh(r) * np.cosh(r) - r) / 2, rtol=1e-14
    )
    # n=3: (sinh^2 r cosh r)/3 - (2/3)(cosh r - 1)
    expect = np.sinh(r) ** 2 * np.cosh(r) / 3 - 2.0 / 3.0 * (np.cosh(r) - 1)
    assert np.allclose(sinh_power_antiderivative(r, 3), expect, rtol=1e-14)


@pytest.mark.parametrize("n,r0", [(1, 0.5), (1, 1.0), (2, 1.0), (2, 2.0), (3, 1.0)])
def test_sphere_area_volume_closed_form(n, r0):
    state = sphere(n, r0)
    area, volume = area_and_volume(state)
    area_exact = unit_sphere_area(n) * math.sinh(r0) ** n
    vol_exact = unit_sphere_area(n) * float(sinh_power_antiderivative(np.array([r0]), n)[0])
    assert abs(area - area_exact) / area_exact < 1e-10
    assert abs(volume - vol_exact) / vol_exact < 1e-10


def test_sphere_examples_n2():
    # |M| = 4 pi sinh^2(1), |Omega| = pi (sinh 2 - 2)
    area, volume = area_and_volume(sphere(2, 1.0))
    assert abs(area - 4 * math.pi * SINH1**2) < 1e-9
    assert abs(volume - math.pi * (math.sinh(2.0) - 2.0)) < 1e-10


def test_area_volume_self_convergence():
    vals = {}
    for nodes in (65, 129, 257):
        vals[nodes] = np.array(area_and_volume(perturbed_sphere(2, 1.0, 0.1, l=2, nodes=nodes)))
    d_area = abs(vals[65][0] - vals[257][0]) / abs(vals[129][0] - vals[257][0])
    d_vol = abs(vals[65][1] - vals[257][1]) / abs(vals[129][1] - vals[257][1])
    assert d_area > 3.8  # area density carries O(h^2) FD error
    assert d_vol > 30.0  # volume path is pure Boole, order 6


# ---------------------------------------------------------------------------
# curvature integrals and Gauss-Bonnet


def test_curvature_integral_k0_is_area():
    state = perturbed_circle(1.0, eps=0.1, m=2)
    area, _ = area_and_volume(state)
    assert curvature_integral(state, 0) == pytest.approx(area, abs=1e-14)


def test_sphere_curvature_integrals():
    state = sphere(2, 1.0)
    v1 = curvature_integral(state, 1)
    v0 = curvature_integral(state, 2)
    assert abs(v1 - 4 * math.pi * SINH1 * COSH1) < 1e-8
    assert abs(v0 - 4 * math.pi * COSH1**2) < 1e-8


def test_gauss_bonnet_n1():
    residuals = {}
    for nodes in (256, 512):
        state = perturbed_circle(1.0, eps=0.1, m=2, nodes=nodes)
        _, volume = area_and_volume(state)
        residuals[nodes] = curvature_integral(state, 1) - (2 * math.pi + volume)
    assert abs(residuals[256]) < 2e-4
    assert abs(residuals[256] / residuals[512]) > 3.5  # O(h^2) from FD curvature


def test_gauss_bonnet_n2():
    residuals = {}
    for nodes in (129, 257):
        state = perturbed_sphere(2, 1.0, 0.1, l=2, nodes=nodes)
        area, _ = area_and_volume(state)
        residuals[nodes] = curvature_integral(state, 2) - area - 4 * math.pi
    assert abs(residuals[129]) < 1e-3
    assert abs(residuals[129] / residuals[257]) > 3.5


# ---------------------------------------------------------------------------
# quermassintegrals


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("r0", [0.5, 1.0, 2.0])
def test_sphere_quermassintegrals_match_ball(n, r0):
    W = quermassintegrals(sphere(n, r0))
    for k in range(n + 2):
        ref = ball_W(n, k, r0)
        assert abs(W[k] - ref) / abs(ref) < 1e-10


def test_w1_is_area_fraction():
    state = perturbed_sphere(2, 1.0, 0.12, l=3)
    area, _ = area_and_volume(state)
    W = quermassintegrals(state)
    assert abs(W[1] - area / 3.0) < 1e-13


def test_top_w_recursion_closure():
    # W_{n+1} = omega_n/(n+1) for spheres, recovered through the recursion
    W = quermassintegrals(sphere(2, 1.3))
    assert abs(W[3] - 4 * math.pi / 3) < 1e-9


# ---------------------------------------------------------------------------
# ball reference values


def test_ball_w_closed_forms():
    assert ball_W(2, 1, 1.0) == pytest.approx(4 * math.pi / 3 * SINH1**2, rel=1e-12)
    assert ball_W(2, 2, 1.0) == pytest.approx(
        2 * math.pi / 3 * (1.0 + SINH1 * COSH1), rel=1e-12
    )
    assert ball_W(1, 0, 1.0) == pytest.approx(2 * math.pi * (COSH1 - 1.0), rel=1e-12)
    assert ball_W(3, 1, 1.0) == pytest.approx(math.pi**2 * SINH1**3 / 2, rel=1e-12)
    assert ball_W(2, 3, 0.7) == pytest.approx(4 * math.pi / 3, rel=1e-14)  # constant


def test_ball_w_domain():
    with pytest.raises(OutOfRange):
        ball_W(2, 4, 1.0)
    with pytest.raises(OutOfRange):
        ball_W(2, 1, -0.5)
    with pytest.raises(OutOfRange):
        ball_W_inverse(2, 3, 1.0)  # constant map, no inverse
    with pytest.raises(OutOfRange):
        ball_W_inverse(2, 1, 0.0)
    with pytest.raises(OutOfRange):
        ball_W_inverse(2, 1, -2.0)


@pytest.mark.parametrize("r", [0.3, 1.0, 2.0])
@pytest.mark.parametrize("n,k", [(1, 1), (2, 1), (2, 2), (3, 2)])
def test_ball_inverse_round_trip(n, k, r):
    assert abs(ball_W_inverse(n, k, ball_W(n, k, r)) - r) < 1e-10


def test_cached_ball_inverse():
    cached = CachedBallInverse(2, 1)
    for r in (0.21, 0.9, 1.7, 3.1):
        assert abs(cached(ball_W(2, 1, r)) - r) < 1e-10
    # beyond the tabulated band: exact fallback
    assert abs(cached(ball_W(2, 1, 4.5)) - 4.5) < 1e-10


# ---------------------------------------------------------------------------
# radii


@pytest.mark.parametrize("n,r0", [(1, 0.5), (1, 1.0), (1, 2.0), (2, 0.5), (2, 1.0), (2, 2.0)])
def test_sphere_radii_exact(n, r0):
    rr = radii(sphere(n, r0))
    assert abs(rr.rho_minus - r0) < 1e-8
    assert abs(rr.rho_plus - r0) < 1e-8


def test_offset_ball_radii_and_centers():
    rr = radii(offset_circle(1.0, 0.3))
    assert abs(rr.rho_minus - 1.0) < 1e-8
    assert abs(rr.rho_plus - 1.0) < 1e-8
    expected = np.array([math.tanh(0.3), 0.0])
    assert np.max(np.abs(rr.center_minus - expected)) < 1e-6
    assert np.max(np.abs(rr.center_plus - expected)) < 1e-6


def test_wavy_radii_vs_brute_scan():
    state = perturbed_circle(1.0, eps=0.1, m=2)
    rr = radii(state)
    assert rr.rho_minus <= 1.0 <= rr.rho_plus
    assert 0.9 - 1e-12 <= rr.rho_minus and rr.rho_plus <= 1.1 + 1e-12
    X = hyperboloid_points(state)
    grid = np.linspace(-0.4, 0.4, 41)
    best_minus, best_plus = -np.inf, np.inf
    for a in grid:
        for b in grid:
            lam = 1.0 / math.sqrt(1.0 - a * a - b * b)
            d = np.arccosh(np.maximum(lam * (X[:, 0] - X[:, 1] * a - X[:, 2] * b), 1.0))
            best_minus = max(best_minus, float(np.min(d)))
            best_plus = min(best_plus, float(np.max(d)))
    # the refined optimum must dominate any coarse scan candidate
    assert rr.rho_minus >= best_minus - 1e-9
    assert rr.rho_plus <= best_plus + 1e-9
    assert abs(rr.rho_minus - best_minus) < 5e-3
    assert abs(rr.rho_plus - best_plus) < 5e-3


def test_inner_outer_ordering_and_ln2_bound():
    bodies = [
        perturbed_circle(1.0, eps=0.1, m=2),
        perturbed_circle(1.2, eps=0.08, m=3),
        perturbed_sphere(2, 1.0, 0.1, l=2),
        horo_contact_body(1, 1.0),
        horo_contact_body(2, 1.0),
    ]
    for state in bodies:
        rr = radii(state)
        assert rr.rho_minus <= rr.rho_plus + 1e-12
        if curvature(state).min_kappa >= 1.0 - 1e-9:
            assert rr.rho_plus <= rr.rho_minus + math.log(2.0) + 1e-9


# ---------------------------------------------------------------------------
# ball-comparison gap


def test_af_gap_sphere_zero():
    assert abs(af_check(sphere(2, 1.0), 2, 0)) < 1e-8
    assert abs(af_check(sphere(1, 0.8, 256), 1, 0)) < 1e-8


def test_af_gap_positive_and_monotone():
    g_small = af_check(perturbed_sphere(2, 1.0, 0.05, l=2), 2, 0)
    g_large = af_check(perturbed_sphere(2, 1.0, 0.1, l=2), 2, 0)
    assert g_small > 1e-6
    assert g_large > g_small
    assert af_check(perturbed_circle(1.0, eps=0.1, m=2), 1, 0) > 1e-6


def test_af_requires_h_convexity():
    state = perturbed_circle(2.0, eps=0.3, m=3)  # min kappa ~ 0.68
    with pytest.raises(NotHConvex):
        af_check(state, 1, 0)
    with pytest.raises(OutOfRange):
        af_check(sphere(2, 1.0), 1, 1)


# ---------------------------------------------------------------------------
# measure bundles


def test_measure_set_json_round_trip():
    ms = measure_set(perturbed_circle(1.0, eps=0.05, m=2), t=0.75)
    back = MeasureSet.from_json(ms.to_json())
    assert back == ms
    assert len(ms.W) == 3 and len(ms.V) == 2
    assert ms.rho_minus <= ms.rho_plus


def test_measure_set_without_radii():
    ms = measure_set(sphere(2, 1.0), with_radii=False)
    assert math.isnan(ms.rho_minus) and math.isnan(ms.rho_plus)
    assert abs(ms.W[1] - ms.area / 3.0) < 1e-12


# ---------------------------------------------------------------------------
# property-based


@settings(max_examples=15, deadline=None)
@given(r0=st.floats(0.3, 2.5), n=st.integers(1, 3))
def test_random_sphere_consistency(r0, n):
    state = sphere(n, r0, 64 if n == 1 else 65)
    W = quermassintegrals(state)
    for k in range(n + 2):
        assert abs(W[k] - ball_W(n, k, r0)) <= 1e-8 * max(1.0, abs(ball_W(n, k, r0)))


@settings(max_examples=15, deadline=None)
@given(r=st.floats(0.1, 3.0), k=st.integers(0, 2))
def test_random_ball_inverse(r, k):
    assert abs(ball_W_inverse(2, k, ball_W(2, k, r)) - r) < 1e-9
