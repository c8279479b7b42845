import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlcthermo.circuits import diverging_loop, random_circuit, series_rlc, two_rc
from rlcthermo.dynamics import (
    floquet_stability,
    integrate_covariance,
    integrate_mean,
    sample_langevin,
    solve_stationary_lyapunov,
    stationary_mean,
)
from rlcthermo.errors import InconsistentTopologyError, InstabilityError, NoStationaryState
from rlcthermo.netlist import parse_netlist
from rlcthermo.statespace import energy, hamiltonian_at, inverse_hamiltonian_at
from rlcthermo.thermo import heat_current_classical

from conftest import natural


def printed_sigma(R, C, L, T1, T2):
    """Closed-form stationary covariance of the symmetric two-RC circuit."""
    Tbar, dT = 0.5 * (T1 + T2), T1 - T2
    H0inv = np.diag([C, C, L])
    pattern = np.array([[1, 0, -R], [0, -1, R], [-R, R, 0]])
    return Tbar * H0inv + 0.5 * dT * C * L / (C * R**2 + L) * pattern


def test_rc_relaxation():
    m = natural(parse_netlist("C1 1 0 C=1\nR1 1 0 R=1 T=1\n"))
    t, x = integrate_mean(m, np.array([1.0]), (0.0, 5.0), dt=1e-3)
    assert np.abs(x[:, 0] - np.exp(-t)).max() < 1e-8


def test_lc_energy_conserved():
    m = natural(parse_netlist("C1 1 0 C=1\nL1 1 0 L=1\n"))
    x0 = np.array([1.0, 0.3])
    period = 2 * np.pi
    t, x = integrate_mean(m, x0, (0.0, 100 * period), dt=period / 400, save_every=400)
    E = np.array([energy(m, xi) for xi in x])
    assert np.abs(E / E[0] - 1).max() < 1e-8


def test_dc_source_charges_capacitor():
    m = natural(parse_netlist("V1 1 0 V=2\nR1 1 2 R=1 T=1\nC1 2 0 C=3\n"))
    t, x = integrate_mean(m, np.zeros(1), (0.0, 60.0), dt=1e-2)
    assert x[-1, 0] == pytest.approx(6.0, rel=1e-6)
    assert stationary_mean(m)[0] == pytest.approx(6.0, rel=1e-12)


def test_instability_reported():
    # negative effective damping cannot be built from passive parts, so
    # drive an undamped LC at parametric resonance instead
    spec = parse_netlist(".drive wd=2\nC1 1 0 C=1 A1=0.6\nL1 1 0 L=1\n")
    m = natural(spec)
    with pytest.raises(InstabilityError) as exc:
        integrate_mean(m, np.array([1.0, 0.0]), (0.0, 3000.0), dt=0.01)
    assert exc.value.time is not None


def test_thermal_fixed_point():
    m = natural(two_rc(R=1.5, C=0.8, L=1.2, T1=1.7, T2=1.7))
    S0 = 1.7 * inverse_hamiltonian_at(m, 0.0)
    sol = integrate_covariance(m, S0, (0.0, 20.0), dt=0.01, save_every=100)
    assert np.abs(sol.sigma - S0).max() < 1e-10


def test_conduction_covariance_long_time():
    R, C, L, T1, T2 = 1.3, 0.7, 1.9, 2.0, 1.2
    m = natural(two_rc(R=R, C=C, L=L, T1=T1, T2=T2))
    sol = integrate_covariance(m, np.zeros((3, 3)), (0.0, 80.0), dt=0.01, save_every=1000)
    np.testing.assert_allclose(sol.sigma[-1], printed_sigma(R, C, L, T1, T2), atol=1e-9)
    assert sol.kind == "transient"


def test_zero_temperature_stays_zero():
    m = natural(two_rc())
    sol = integrate_covariance(m, np.zeros((3, 3)), (0.0, 5.0), dt=0.01, temperatures=[0.0, 0.0])
    assert not sol.sigma.any()


def test_covariance_symmetric_psd_along_path(rng):
    m = natural(two_rc(R=0.4, C=1.0, L=2.0, T1=3.0, T2=0.5, dC=0.4, wd=0.9, theta=1.0))
    X = rng.normal(size=(3, 3))
    sol = integrate_covariance(m, X @ X.T, (0.0, 30.0), dt=0.01, save_every=50)
    for S in sol.sigma:
        assert np.array_equal(S, S.T)
        assert np.linalg.eigvalsh(S).min() >= -1e-10 * np.abs(S).max()


def test_forcing_invariance():
    plain = natural(series_rlc(R=0.5, L=1.0, C=2.0, T=1.0))
    forced = natural(parse_netlist(".drive wd=1.3\nV1 1 3 Adc=0.5 A1=2.0\nC1 1 0 C=2\nL1 2 0 L=1\nR1 3 2 R=0.5 T=1\n"))
    S0 = np.diag([0.3, 0.2])
    a = integrate_covariance(plain, S0, (0.0, 10.0), dt=0.01, save_every=100)
    b = integrate_covariance(forced, S0, (0.0, 10.0), dt=0.01, save_every=100, mean0=np.zeros(2))
    np.testing.assert_allclose(a.sigma, b.sigma, rtol=0, atol=1e-14)
    assert np.abs(b.mean).max() > 0.1


def test_lyapunov_isothermal(rng):
    for _ in range(5):
        m = natural(random_circuit(rng, kinds="RCL", consistent=True))
        if m.n == 0 or m.N_R == 0:
            continue
        T = float(m.temperatures[0])
        m = natural(_isothermal(m.spec, T))
        try:
            S = solve_stationary_lyapunov(m)
        except NoStationaryState:
            continue
        np.testing.assert_allclose(S, T * inverse_hamiltonian_at(m, 0.0), atol=1e-10 * T * np.abs(S).max())


def _isothermal(spec, T):
    from dataclasses import replace

    from rlcthermo.netlist import CircuitSpec

    return CircuitSpec(tuple(replace(e, temperature=T) if e.kind == "R" else e for e in spec.elements))


def test_lyapunov_conduction_printed_form():
    R, C, L, T1, T2 = 1.0, 1.0, 1.0, 2.0, 1.0
    m = natural(two_rc(R=R, C=C, L=L, T1=T1, T2=T2))
    S = solve_stationary_lyapunov(m)
    np.testing.assert_allclose(S, printed_sigma(R, C, L, T1, T2), rtol=1e-12, atol=1e-14)


def test_lyapunov_lossless_has_no_stationary_state():
    m = natural(parse_netlist("C1 1 0 C=1\nL1 1 0 L=1\n"))
    with pytest.raises(NoStationaryState):
        solve_stationary_lyapunov(m)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_lyapunov_residual(seed):
    m = natural(random_circuit(np.random.default_rng(seed), consistent=True))
    if m.n == 0:
        return
    try:
        S = solve_stationary_lyapunov(m)
    except NoStationaryState:
        return
    M = m.A @ hamiltonian_at(m, 0.0)
    N = m.noise_matrix()
    res = M @ S + S @ M.T + N
    assert np.abs(res).max() <= 1e-10 * max(np.abs(N).max(), 1e-300)
    assert np.linalg.eigvalsh(S).min() >= -1e-10 * np.abs(S).max()


def test_langevin_refuses_inconsistent_topology():
    m = natural(diverging_loop())
    with pytest.raises(InconsistentTopologyError):
        sample_langevin(m, np.zeros(1), (0.0, 1.0), 0.01, 10, seed=1)


def test_langevin_deterministic_and_block_invariant():
    m = natural(two_rc(T1=2.0, T2=1.0))
    a = sample_langevin(m, np.zeros(3), (0.0, 1.0), 0.01, 1100, seed=5, n_samples=3)
    b = sample_langevin(m, np.zeros(3), (0.0, 1.0), 0.01, 1100, seed=5, n_samples=3)
    assert np.array_equal(a.paths, b.paths) and np.array_equal(a.heat, b.heat)
    # the first block of trajectories does not depend on how many follow
    c = sample_langevin(m, np.zeros(3), (0.0, 1.0), 0.01, 1024, seed=5, n_samples=3)
    assert np.array_equal(a.paths[:1024], c.paths)
    d = sample_langevin(m, np.zeros(3), (0.0, 1.0), 0.01, 1100, seed=6, n_samples=3)
    assert not np.array_equal(a.paths, d.paths)


def test_langevin_isothermal_no_net_heat():
    m = natural(two_rc(T1=1.0, T2=1.0))
    S = solve_stationary_lyapunov(m)
    ens = sample_langevin(m, np.zeros(3), (0.0, 5.0), 0.01, 4000, seed=11, n_samples=6, sigma0=S)
    rate, se = ens.heat_rate(0, -1)
    assert np.all(np.abs(rate) < 3 * se)


def test_langevin_conduction_and_step_bias(conduction_model):
    m = conduction_model
    S = solve_stationary_lyapunov(m)
    q_exact = heat_current_classical(m, None, S)
    np.testing.assert_allclose(q_exact, [-0.25, 0.25], rtol=1e-12)
    runs = {}
    for dt in (0.02, 0.002):
        ens = sample_langevin(m, np.zeros(3), (0.0, 10.0), dt, 4000, seed=3, n_samples=3, sigma0=S)
        runs[dt] = ens.heat_rate(0, -1)
    rate, se = runs[0.002]
    assert np.all(np.abs(rate - q_exact) < 3 * se)
    # Euler-Maruyama bias is first order in the step
    assert np.all(np.abs(runs[0.02][0] - q_exact) > np.abs(rate - q_exact))


def test_stability_undriven_multipliers():
    m = natural(two_rc(R=1.0, C=1.0, L=1.0, wd=None))
    period = 2 * np.pi / 0.5
    rep = floquet_stability(m, wd=0.5)
    lam = np.linalg.eigvals(m.A @ hamiltonian_at(m, 0.0))
    np.testing.assert_allclose(np.sort_complex(rep.multipliers), np.sort_complex(np.exp(lam * period)), atol=1e-9)
    assert rep.stable


def test_stability_large_slow_drive():
    m = natural(two_rc(dC=0.5, wd=2 * np.pi * 1e-2, theta=np.pi / 2))
    assert floquet_stability(m).stable


def test_parametric_resonance_unstable():
    # weakly damped series RLC, capacitance modulated at twice its frequency
    spec = parse_netlist(".drive wd=2\nC1 1 0 C=1 A1=0.5\nL1 1 2 L=1\nR1 2 0 R=0.01 T=1\n")
    m = natural(spec)
    rep = floquet_stability(m)
    assert not rep.stable
    assert np.abs(rep.multipliers).max() > 1.2
    # direct long-time integration grows without bound
    t, x = integrate_mean(m, np.array([1.0, 0.0]), (0.0, 40 * np.pi), dt=0.005, save_every=200)
    assert np.abs(x[-1]).max() > 100 * np.abs(x[0]).max()
