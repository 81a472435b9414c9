import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kte.bvp import (N_NODES, PROBE_END, delta_integral, interpolation_constant, solve_delta, solve_theta)
from kte.convex_cost import PowerCost, RadialCost
from kte.expr import parse

QUARTIC = RadialCost(parse("s^2+s^4"), 1).profile
PROFILES = {"square": PowerCost(2).profile, "cube": PowerCost(3).profile, "quartic": QUARTIC}


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_delta_power(p, c):
    assert solve_delta(c, PowerCost(p).profile) == pytest.approx((c * p) ** p, rel=1e-10)


def test_delta_square_unit():
    assert solve_delta(1.0, PowerCost(2).profile) == pytest.approx(4.0, rel=1e-10)


@pytest.mark.parametrize("name", list(PROFILES))
def test_delta_solves_its_equation(name):
    prof = PROFILES[name]
    for c in (0.3, 1.0, 2.5):
        d = solve_delta(c, prof)
        assert abs(delta_integral(d, prof) - 1 / c) <= 1e-9


def test_delta_increasing():
    assert solve_delta(2.0, QUARTIC) > solve_delta(1.0, QUARTIC)
    vals = [solve_delta(c, QUARTIC) for c in np.linspace(0.2, 3.0, 8)]
    assert np.all(np.diff(vals) > 0)


@pytest.mark.parametrize("name", list(PROFILES))
@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_delta_constant_bound(name, c):
    prof = PROFILES[name]
    assert solve_delta(c, prof) <= prof.A_thm12 * float(prof.phi(c)) * (1 + 1e-12)


def test_delta_rejects_nonpositive_c():
    with pytest.raises(ValueError):
        solve_delta(0.0, QUARTIC)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_theta_power_closed_form(p):
    sol = solve_theta(1.0, PowerCost(p).profile)
    t = np.linspace(0, 1, 10001)
    assert np.max(np.abs(sol.theta(t) - (1 - (1 - t) ** p))) <= 1e-6
    tp = np.linspace(0, PROBE_END, 1001)
    assert np.max(np.abs(sol.theta_prime(tp) - p * (1 - tp) ** (p - 1))) <= 1e-6 * p


@pytest.mark.parametrize("name", list(PROFILES))
@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_theta_solution_properties(name, c):
    prof = PROFILES[name]
    sol = solve_theta(c, prof)
    assert abs(sol.R_one - 1.0) <= 1e-7
    assert sol.residual_sup <= 1e-6
    assert sol.theta(0.0) == 0.0 and sol.theta(1.0) == 1.0
    # stored state is v = -log(1 - theta); theta itself rounds to 1 for large v
    assert np.all(np.diff(sol.v_nodes) > 0) and np.all(np.diff(sol.tau_nodes) < 0)
    nodes = -np.expm1(-sol.v_nodes)
    below = nodes < 1 - 1e-14
    assert np.all(np.diff(nodes[below]) > 0) and np.all(np.diff(nodes) >= 0)
    t = np.linspace(0, PROBE_END, 10_000)
    cap = float(prof.phi_inv(sol.delta)) / c
    assert np.max(sol.theta_prime(t)) <= cap * (1 + 1e-6)
    y = np.linspace(0, PROBE_END, 10_000)
    u = sol.U(y)
    assert np.all(u > 0) and np.all(np.diff(u) <= 1e-12 * u[:-1])


@pytest.mark.parametrize("name", ["square", "quartic"])
def test_node_doubling(name):
    prof = PROFILES[name]
    a = solve_theta(1.0, prof)
    b = solve_theta(1.0, prof, n_nodes=2 * N_NODES - 1)
    t = np.linspace(0, 1, 20001)
    assert np.max(np.abs(a.theta(t) - b.theta(t))) <= 1e-6


@pytest.mark.parametrize("name", list(PROFILES))
def test_interpolation_constant(name):
    prof = PROFILES[name]
    for c in (0.5, 1.0, 2.0):
        sol = solve_theta(c, prof)
        val = interpolation_constant(sol, prof)
        assert abs(val - sol.delta) <= 1e-6
        assert val <= prof.A_thm12 * float(prof.phi(c)) + 1e-6


def test_interpolation_constant_square_unit():
    assert interpolation_constant(solve_theta(1.0, PowerCost(2).profile)) == pytest.approx(4.0, abs=1e-6)


@settings(max_examples=15)
@given(st.floats(0.1, 4.0), st.sampled_from(list(PROFILES)))
def test_residual_random_c(c, name):
    sol = solve_theta(c, PROFILES[name])
    assert sol.residual_sup <= 1e-6 and abs(sol.R_one - 1) <= 1e-7


def test_csv_round_trip(tmp_path):
    sol = solve_theta(1.0, QUARTIC)
    path = tmp_path / "theta.csv"
    sol.to_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (1001, 3)
    assert data[0, 1] == 0.0 and data[-1, 1] == 1.0
    assert np.all(np.diff(data[:, 1]) >= 0)


def test_tabulated_profile_matches_closed_form():
    # max(s^2, 2 s^3) has Young function max(r^2, r^3), the same as s^2 + s^3
    scanned = RadialCost(parse("max(s^2, 2*s^3)"), 1).profile
    closed = RadialCost(parse("s^2+s^3"), 1).profile
    assert not scanned.exact and closed.exact
    table = scanned.tabulated()
    assert table is scanned.tabulated()
    assert table.table_error <= 1e-3
    for c in (0.1, 1.0, 2.0):
        sol = solve_theta(c, scanned)
        exact = solve_delta(c, closed)
        # the table smooths the kink of Phi at r = 1 over one cell
        assert sol.delta == pytest.approx(exact, rel=10 * table.table_error)
        assert sol.residual_sup <= 1e-6
        assert sol.info["table_error"] == table.table_error
