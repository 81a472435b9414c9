import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize_scalar

from kte.convex_cost import (BlackBoxCost, PowerCost, RadialCost, check_delta2, cost_from_dict, eval_cost,
                             gamma, legendre, one_sided_derivatives, radius_RL,
                             richardson_derivatives, young_phi, young_psi)
from kte.errors import InvalidOrder, InvalidSpec, NotSuperlinear, OutOfDomain, Unbounded
from kte.expr import parse

from _oracles import gamma_lp


# --- eval_cost -----------------------------------------------------------

def test_power_square_at_three():
    assert float(eval_cost(PowerCost(2), 3.0)) == 9.0


@pytest.mark.parametrize("spec", [PowerCost(2), PowerCost(1.5, dim=2), RadialCost(parse("s^2+s^4"), 2),
                                  RadialCost(parse("max(s^2, 3*s^3)"), 1)])
def test_cost_vanishes_at_origin(spec):
    assert float(eval_cost(spec, np.zeros(spec.dim))) == 0.0


def test_quartic_at_unit_radius(quartic2d):
    x = np.array([[math.cos(0.3), math.sin(0.3)]])
    assert quartic2d.L(x)[0] == pytest.approx(2.0, rel=1e-14)


def test_weighted_lp_norm_power():
    spec = PowerCost(2, dim=2, norm="lp", norm_p=1.0, weights=[1.0, 2.0])
    assert spec.L(np.array([[1.0, -1.0]]))[0] == pytest.approx(9.0)


def test_blackbox_out_of_domain():
    spec = BlackBoxCost.from_function(lambda x: x[:, 0] ** 2, [np.linspace(-2, 2, 41)])
    with pytest.raises(OutOfDomain):
        spec.L(np.array([[3.0]]))


def test_nonconvex_table_rejected():
    with pytest.raises(InvalidSpec):
        BlackBoxCost.from_function(lambda x: np.sqrt(np.abs(x[:, 0])), [np.linspace(-2, 2, 41)])


@pytest.mark.parametrize("text", ["s^0.5", "s-s^2", "-s^2", "exp(s)", "s^2+"])
def test_grammar_rejects(text):
    with pytest.raises(InvalidSpec):
        RadialCost(parse(text), 1)


def test_cost_round_trip():
    for d in ({"kind": "power", "p": 2, "norm": "euclidean", "dim": 1}, {"kind": "radial", "V": "s^2+s^4", "dim": 2}):
        spec = cost_from_dict(d)
        again = cost_from_dict(spec.to_dict())
        x = np.random.default_rng(0).normal(size=(5, spec.dim))
        np.testing.assert_array_equal(spec.L(x), again.L(x))


# --- legendre ------------------------------------------------------------

def test_power_square_conjugate():
    assert legendre(PowerCost(2)).value(np.array([[2.0]]))[0] == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("spec", [PowerCost(3), PowerCost(1.5, dim=2), RadialCost(parse("s^2+s^4"), 1)])
def test_conjugate_at_zero(spec):
    assert legendre(spec).value(np.zeros((1, spec.dim)))[0] == 0.0


def test_quartic_conjugate_brute_force(quartic):
    s = np.arange(0.0, 4.0 + 5e-6, 1e-5)
    brute = float(np.max(s - (s ** 2 + s ** 4)))
    assert quartic.conjugate.value(np.array([[1.0]]))[0] == pytest.approx(brute, abs=1e-6)


def test_linear_power_has_no_conjugate():
    with pytest.raises(NotSuperlinear):
        PowerCost(1).conjugate


def test_blackbox_conjugate_matches_analytic():
    spec = BlackBoxCost.from_function(lambda x: x[:, 0] ** 2, [np.linspace(-4, 4, 801)])
    y = np.array([[-1.5], [0.5], [2.0]])
    np.testing.assert_allclose(spec.conjugate.value(y), y[:, 0] ** 2 / 4, atol=1e-4)
    with pytest.raises(OutOfDomain):
        spec.conjugate.value(np.array([[100.0]]))


# --- young_phi / psi ------------------------------------------------------

@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_power_profile(p):
    r = np.array([0.0, 0.3, 1.0, 2.5])
    np.testing.assert_allclose(young_phi(PowerCost(p), r), r ** p, rtol=1e-15)


@pytest.mark.parametrize("spec", [PowerCost(2.5), RadialCost(parse("s^2+s^4"), 1),
                                  RadialCost(parse("max(s^2, 2*s^3)"), 1)])
def test_profile_at_one(spec):
    assert young_phi(spec, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_quartic_profile_at_two(quartic):
    assert young_phi(quartic, 2.0) == pytest.approx(16.0, rel=1e-12)


def test_quartic_profile_brute_force(quartic):
    # sup over s of V(rs)/V(s) on a fine grid, independent of the implementation
    s = np.logspace(-6, 6, 200_001)
    V = lambda u: u ** 2 + u ** 4
    for r in (0.3, 0.9, 1.7, 5.0):
        brute = float(np.max(V(r * s) / V(s)))
        assert young_phi(quartic, r) == pytest.approx(brute, rel=1e-6)


def test_max_tree_profile_scan():
    spec = RadialCost(parse("max(s^2, 2*s^3)"), 1)
    s = np.logspace(-6, 6, 200_001)
    V = lambda u: np.maximum(u ** 2, 2 * u ** 3)
    for r in (0.5, 2.0):
        assert young_phi(spec, r) == pytest.approx(float(np.max(V(r * s) / V(s))), rel=1e-6)


def test_psi_definition(quartic):
    r = np.array([0.2, 1.0, 3.0])
    np.testing.assert_allclose(young_psi(quartic, r), 1.0 / young_phi(quartic, 1.0 / r), rtol=1e-15)
    assert young_psi(quartic, 0.0) == 0.0


# --- one-sided derivatives ---------------------------------------------

def test_power_derivatives():
    assert one_sided_derivatives(PowerCost(3).profile) == (3.0, 3.0)


def test_quartic_derivatives(quartic):
    pm, pp = one_sided_derivatives(quartic.profile)
    assert (pm, pp) == pytest.approx((2.0, 4.0), abs=1e-12)


def test_richardson_on_kinked_profile():
    pm, pp, err = richardson_derivatives(lambda r: np.maximum(r ** 2, r ** 4))
    assert pm == pytest.approx(2.0, abs=1e-6) and pp == pytest.approx(4.0, abs=1e-6)


def test_blackbox_derivatives_flagged():
    spec = BlackBoxCost.from_function(lambda x: x[:, 0] ** 2 + x[:, 0] ** 4, [np.linspace(-3, 3, 1201)])
    prof = spec.profile
    assert not prof.exact
    assert prof.p_minus >= 1.0
    assert prof.p_minus == pytest.approx(2.0, abs=2e-1)
    assert prof.p_plus == pytest.approx(4.0, abs=2e-1)


# --- gamma -------------------------------------------------------------

@pytest.mark.parametrize("p", [1.0, 2.0, 3.7])
def test_gamma_equal_exponents(p):
    assert gamma(p, p) == 1.0


def test_gamma_closed_form_two_one():
    # tangent to r^2 at r0 = 1/2 with slope 1: value 2 r0 - r0^2 at r = 1
    assert gamma(2.0, 1.0) == pytest.approx(0.75, abs=1e-12)


def test_gamma_lp_oracle():
    assert gamma(4.0, 2.0) == pytest.approx(gamma_lp(4.0, 2.0), abs=1e-5)


def test_gamma_invalid_order():
    with pytest.raises(InvalidOrder):
        gamma(1.5, 2.0)


@given(st.floats(1.0, 6.0), st.floats(0.0, 5.0))
def test_gamma_range(p0, extra):
    g = gamma(p0 + extra, p0)
    assert 0.0 < g <= 1.0


@given(st.floats(1.0, 4.0), st.floats(0.0, 3.0), st.floats(0.01, 2.0))
def test_gamma_nonincreasing_in_upper(p0, a, step):
    assert gamma(p0 + a + step, p0) <= gamma(p0 + a, p0) + 1e-12


# --- radius ------------------------------------------------------------

def test_radius_examples(quartic):
    assert radius_RL(PowerCost(2), 4.0) == pytest.approx(2.0, rel=1e-15)
    assert radius_RL(PowerCost(2), 0.0) == 0.0
    assert radius_RL(quartic, 2.0) == pytest.approx(1.0, rel=1e-14)


def test_radius_weighted_norm():
    spec = PowerCost(2, dim=2, norm="lp", norm_p=1.0, weights=[1.0, 2.0])
    r = spec.radius(9.0)
    # sublevel set of (|x| + 2|y|)^2 <= 9: farthest Euclidean point is (3, 0)
    assert r == pytest.approx(3.0, rel=1e-12)


def test_radius_negative_rejected():
    with pytest.raises(ValueError):
        radius_RL(PowerCost(2), -1.0)


def test_blackbox_radius_and_unbounded():
    spec = BlackBoxCost.from_function(lambda x: x[:, 0] ** 2, [np.linspace(-2, 2, 81)])
    assert spec.radius(1.0) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(Unbounded):
        spec.radius(10.0)


# --- Delta_2 ------------------------------------------------------------

@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_delta2_power(p):
    d = check_delta2(PowerCost(p))
    assert d.sup_ratio == pytest.approx(p, rel=1e-5) and d.passes


def test_delta2_quartic(quartic):
    d = check_delta2(quartic)
    assert d.sup_ratio == pytest.approx(4.0, rel=1e-5)
    assert d.sup_ratio <= quartic.profile.p_plus * (1 + 1e-3)
    assert d.passes


# --- property tests ------------------------------------------------------

COSTS = [PowerCost(1.5), PowerCost(2.0), PowerCost(3.0), PowerCost(2.5, dim=2),
         PowerCost(2.0, dim=2, norm="lp", norm_p=3.0, weights=[1.0, 0.5]),
         RadialCost(parse("s^2+s^4"), 1), RadialCost(parse("s^2+s^4"), 2),
         RadialCost(parse("max(s^2, 2*s^3)"), 1)]


@pytest.mark.parametrize("spec", COSTS, ids=lambda s: str(s.to_dict()))
def test_fenchel_young(spec):
    rng = np.random.default_rng(1)
    x = rng.normal(size=(10_000, spec.dim)) * rng.uniform(0.01, 3.0, size=(10_000, 1))
    y = rng.normal(size=(10_000, spec.dim)) * rng.uniform(0.01, 3.0, size=(10_000, 1))
    gap = spec.L(x) + spec.conjugate.value(y) - np.sum(x * y, axis=1)
    assert gap.min() >= -1e-9


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_power_biconjugate(p):
    spec = PowerCost(p)
    conj = spec.conjugate
    for x in np.linspace(-3, 3, 25):
        res = minimize_scalar(lambda y: conj.value(np.array([[y]]))[0] - x * y, bounds=(-60, 60),
                              method="bounded", options={"xatol": 1e-12})
        assert -res.fun == pytest.approx(abs(x) ** p, rel=1e-8, abs=1e-12)


@given(st.floats(1.1, 5.0), st.floats(0.01, 10.0), st.floats(-5.0, 5.0))
def test_power_conjugate_homogeneous(p, r, y):
    conj = PowerCost(p).conjugate
    q = p / (p - 1)
    a = conj.value(np.array([[r * y]]))[0]
    b = r ** q * conj.value(np.array([[y]]))[0]
    assert a == pytest.approx(b, rel=1e-10, abs=1e-300)


@pytest.mark.parametrize("spec", COSTS[5:], ids=lambda s: str(s.to_dict()))
def test_radial_biconjugate(spec):
    conj = spec.conjugate
    s = np.linspace(0.0, 3.0, 31)
    t = np.linspace(0.0, 200.0, 400_001)
    x = np.zeros((t.size, spec.dim))
    x[:, 0] = t
    cs = conj.value(x)
    bi = np.max(s[None, :] * t[:, None] - cs[:, None], axis=0)
    pts = np.zeros((s.size, spec.dim))
    pts[:, 0] = s
    L = spec.L(pts)
    assert np.all(np.abs(bi - L) <= 1e-6 * (1 + L) + 1e-6)


def _profile_props(spec, r, s):
    prof = spec.profile
    pr, ps, prs = prof.phi(r), prof.phi(s), prof.phi(r * s)
    assert prs <= pr * ps * (1 + 1e-8) + 1e-300
    if r <= 1:
        assert pr <= r ** prof.p_minus * (1 + 1e-8) + 1e-300
        assert prof.psi(r) >= r ** prof.p_plus * (1 - 1e-8)
    else:
        assert pr <= r ** prof.p_plus * (1 + 1e-8)
        assert prof.psi(r) >= r ** prof.p_minus * (1 - 1e-8)
    assert prof.psi(r) <= pr * (1 + 1e-8) + 1e-300


@pytest.mark.parametrize("spec", [COSTS[0], COSTS[5], COSTS[7]], ids=["power", "quartic", "maxtree"])
@given(r=st.floats(1e-3, 1e3), s=st.floats(1e-3, 1e3))
def test_profile_submultiplicative_and_bounds(spec, r, s):
    _profile_props(spec, r, s)


@pytest.mark.parametrize("spec", COSTS, ids=lambda s: str(s.to_dict()))
def test_profile_shape(spec):
    prof = spec.profile
    r = np.linspace(0.0, 4.0, 401)
    phi = np.asarray(prof.phi(r))
    assert phi[0] == 0.0
    assert prof.phi(1.0) == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(phi) >= -1e-12)
    assert np.all(phi[:-2] - 2 * phi[1:-1] + phi[2:] >= -1e-9)
    assert 1.0 <= prof.p_minus <= prof.p_plus
    assert (prof.gamma == 1.0) == (prof.p_plus == prof.p_minus)


def test_conjugate_delta2_bounds(quartic):
    # profile of L* by a brute-force ray scan, then one-sided Richardson at 1
    s = np.logspace(-5, 5, 20_001)
    conj = lambda t: quartic.conjugate.value(t[:, None])
    base = conj(s)

    def phi(r):
        return np.array([float(np.max(conj(rr * s) / base)) for rr in np.atleast_1d(r)])

    pm, pp, _ = richardson_derivatives(phi)
    prof = quartic.profile
    assert pp <= prof.p_minus / (prof.p_minus - 1) + 2e-2
    assert pm <= prof.p_plus / (prof.p_plus - 1) + 2e-2
