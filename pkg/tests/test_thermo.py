from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlcthermo.circuits import diverging_loop, random_circuit, series_rlc, two_rc
from rlcthermo.dynamics import integrate_covariance, solve_stationary_lyapunov, stationary_mean
from rlcthermo.errors import InconsistentTopologyError
from rlcthermo.netlist import CircuitSpec, parse_netlist
from rlcthermo.statespace import inverse_hamiltonian_at
from rlcthermo.thermo import (
    energy_rate,
    entropy_production,
    heat_current_classical,
    parallel_rc_heat,
    thermo_sample,
    total_heat_rate,
    work_rates,
)

from conftest import natural


def conduction_heat(R, C, L, T1, T2):
    td, t0 = R * C, np.sqrt(L * C)
    return -0.5 * (T1 - T2) * td / (td**2 + t0**2)


@pytest.mark.parametrize("R, C, L, T1, T2", [(1, 1, 1, 2, 1), (0.3, 2.0, 0.7, 1.0, 4.0), (5.0, 0.1, 3.0, 10.0, 9.5)])
def test_static_conduction_closed_forms(R, C, L, T1, T2):
    m = natural(two_rc(R=R, C=C, L=L, T1=T1, T2=T2))
    S = solve_stationary_lyapunov(m)
    q = heat_current_classical(m, None, S)
    expect = conduction_heat(R, C, L, T1, T2)
    assert q[0] == pytest.approx(expect, rel=1e-9)
    assert q[1] == pytest.approx(-expect, rel=1e-9)
    ep = entropy_production(m, None, S)
    dT = T1 - T2
    assert ep.Sigma_dot == pytest.approx(dT**2 / (2 * T1 * T2) * R * C / ((R * C) ** 2 + L * C), rel=1e-9)
    assert abs(ep.dS_dt) < 1e-12


def test_parallel_rc_relaxation_form_agrees(conduction_model):
    m = conduction_model
    S = solve_stationary_lyapunov(m)
    q = heat_current_classical(m, None, S)
    assert parallel_rc_heat(m, S, "R1", "C1") == pytest.approx(q[0], rel=1e-12)
    assert parallel_rc_heat(m, S, "R2", "C2") == pytest.approx(q[1], rel=1e-12)


def test_regularized_loop_heat():
    R, L = 1.5, 0.1
    m = natural(diverging_loop(R1=R, R2=R, L=L, T1=2.0, T2=1.0))
    q = heat_current_classical(m, None, solve_stationary_lyapunov(m))
    np.testing.assert_allclose(q, [-R / (2 * L), R / (2 * L)], rtol=1e-10)


def test_inconsistent_topology_only_total_heat():
    m = natural(diverging_loop())
    S = solve_stationary_lyapunov(m)
    with pytest.raises(InconsistentTopologyError):
        heat_current_classical(m, None, S)
    rec = thermo_sample(m, None, S)
    assert rec.Qdot.shape == (1,) and rec.Sigma_dot is None
    assert abs(rec.Qdot[0]) < 1e-12


def test_equilibrium_has_no_currents(rng):
    for _ in range(10):
        T = float(rng.uniform(0.1, 5.0))
        spec = random_circuit(rng, kinds="RCL", consistent=True)
        spec = CircuitSpec(tuple(replace(e, temperature=T) if e.kind == "R" else e for e in spec.elements))
        m = natural(spec)
        if m.N_R == 0 or m.n == 0:
            continue
        S = T * inverse_hamiltonian_at(m, 0.0)
        q = heat_current_classical(m, None, S)
        scale = T * max(1.0, np.abs(m.A).max())
        assert np.abs(q).max() < 1e-12 * scale * m.n
        ep = entropy_production(m, None, S)
        assert abs(ep.Sigma_dot) < 1e-10 * scale


def test_joule_heating_series_source():
    V, R = 2.0, 0.5
    m = natural(parse_netlist(f"V1 1 0 V={V}\nR1 1 2 R={R} T=1\nL1 2 0 L=1\n"))
    # DC current V/R through the inductor at stationarity
    mu = stationary_mean(m)
    S = solve_stationary_lyapunov(m)
    q = heat_current_classical(m, mu, S)
    assert q[0] == pytest.approx(V**2 / R, rel=1e-12)
    ws, wd = work_rates(m, mu, S)
    assert ws == pytest.approx(V**2 / R, rel=1e-12) and wd == 0.0


def test_dc_steady_source_work_equals_heat():
    m = natural(series_rlc(R=0.7, L=1.3, C=2.0, T=1.5, V=3.0))
    mu = stationary_mean(m)
    S = solve_stationary_lyapunov(m)
    rec = thermo_sample(m, mu, S)
    assert abs(rec.Edot) < 1e-12
    assert rec.Wdot_s == pytest.approx(float(rec.Qdot.sum()), abs=1e-12)
    # capacitor blocks DC: no current, only thermal fluctuations remain
    assert abs(rec.Qdot[0]) < 1e-12


def test_displaced_thermal_state_relaxes_with_positive_entropy():
    m = natural(series_rlc(R=0.4, L=1.0, C=1.0, T=1.0))
    S0 = inverse_hamiltonian_at(m, 0.0)
    mean = np.array([2.0, -1.0])
    rec = thermo_sample(m, mean, S0)
    # the fluctuation part is thermal, the mean pays Ohmic loss
    i = mean[1] / 1.0
    assert rec.Qdot[0] == pytest.approx(0.4 * i**2, rel=1e-12)
    assert rec.Edot == pytest.approx(-rec.Qdot[0], rel=1e-12)
    assert rec.Sigma_dot > 0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), sources=st.booleans())
def test_energy_balance_random_states(seed, sources):
    rng = np.random.default_rng(seed)
    m = natural(random_circuit(rng, sources=sources))
    if m.n == 0:
        return
    X = rng.normal(size=(m.n, m.n))
    S = X @ X.T + 0.1 * np.eye(m.n)
    mean = rng.normal(size=m.n)
    t = float(rng.uniform(0, 3))
    rec = thermo_sample(m, mean, S, t, entropy=False)
    scale = max(1.0, abs(rec.Edot), np.abs(rec.Qdot).sum(), abs(rec.Wdot_s), abs(rec.Wdot_d))
    assert abs(rec.balance_residual) < 1e-10 * scale
    assert float(rec.Qdot.sum()) == pytest.approx(total_heat_rate(m, mean, S, t=t), rel=1e-10, abs=1e-12 * scale)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    wd=st.floats(0.1, 3.0),
    dC=st.floats(0.0, 0.6),
    theta=st.floats(0, 2 * np.pi),
    T1=st.floats(0.5, 3.0),
    T2=st.floats(0.5, 3.0),
)
def test_entropy_sum_rule_and_signs(seed, wd, dC, theta, T1, T2):
    rng = np.random.default_rng(seed)
    m = natural(two_rc(R=0.8, C=1.0, L=1.2, T1=T1, T2=T2, dC=dC, wd=wd, theta=theta))
    X = rng.normal(size=(3, 3))
    S = X @ X.T + 0.2 * np.eye(3)
    mean = rng.normal(size=3)
    t = float(rng.uniform(0, 10))
    ep = entropy_production(m, mean, S, t)
    total = ep.Sigma_ad + ep.Sigma_nad + ep.Sigma_nad_prime
    assert total == pytest.approx(ep.Sigma_dot, rel=1e-9, abs=1e-12)
    assert ep.Sigma_gaussian == pytest.approx(ep.Sigma_dot, rel=1e-9, abs=1e-12)
    assert ep.Sigma_dot >= -1e-12
    assert ep.Sigma_ad >= -1e-12 and ep.Sigma_nad >= -1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), T=st.floats(0.1, 5.0), wd=st.floats(0.1, 3.0))
def test_isothermal_cross_term_vanishes(seed, T, wd):
    rng = np.random.default_rng(seed)
    m = natural(two_rc(R=1.1, C=1.0, L=0.9, T1=T, T2=T, dC=0.3, wd=wd, theta=1.0))
    X = rng.normal(size=(3, 3))
    S = X @ X.T + 0.2 * np.eye(3)
    ep = entropy_production(m, rng.normal(size=3), S, float(rng.uniform(0, 5)))
    assert abs(ep.Sigma_nad_prime) < 1e-10 * max(1.0, ep.Sigma_dot)


def test_transient_record_consistency():
    m = natural(two_rc(R=0.6, C=1.0, L=1.0, T1=1.5, T2=1.0, dC=0.3, wd=0.8, theta=np.pi / 2))
    sol = integrate_covariance(m, 0.5 * np.eye(3), (0.0, 20.0), dt=0.005, save_every=200, mean0=np.ones(3))
    for t, mu, S in zip(sol.times, sol.mean, sol.sigma):
        rec = thermo_sample(m, mu, S, t)
        assert abs(rec.balance_residual) < 1e-10 * max(1.0, abs(rec.Edot))
        assert rec.Sigma_dot >= 0
        assert rec.Edot == pytest.approx(energy_rate(m, mu, S, t=t), rel=1e-12, abs=1e-14)
