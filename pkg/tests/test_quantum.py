import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from rlcthermo.circuits import overdamped_pair, series_rlc, two_rc, underdamped_pair
from rlcthermo.dynamics import integrate_covariance, solve_stationary_lyapunov
from rlcthermo.errors import ModelError
from rlcthermo.floquet import cycle_average, fourier_hamiltonian, solve_generalized_lyapunov
from rlcthermo.netlist import parse_netlist
from rlcthermo.quantum import (
    NoiseSpectrum,
    default_cutoff,
    ghat_fourier,
    ghat_static,
    heat_periodic_quantum,
    heat_static_quantum,
    planck_weight,
    quantum_covariance_transient,
    quantum_stationary_covariance,
    thermal_weight,
    threshold_temperature,
    transfer_periodic,
    transfer_static,
)
from rlcthermo.statespace import hamiltonian_at
from rlcthermo.thermo import heat_current_classical

from conftest import natural


def f12_overdamped(w, R1, R2, C, Cp):
    """Closed-form transfer function of the overdamped pair."""
    den = (1j * w * C + 1 / R1) * (1j * w * Cp + 1 / R1 + 1 / R2) - 1 / R1**2
    return np.abs(1j * w * C / den) ** 2 / (np.pi * R1 * R2)


def f12_underdamped(w, R1, R2, C, Cp, L):
    z1 = 1j * w * L + 1 / (1j * w * C) + R1 + R2
    z2 = 1 / (1j * w * Cp) + R2
    return R1 * R2 / np.pi * np.abs((1 / (1j * w * Cp)) / (z1 * z2 - R2**2)) ** 2


def by_name(model, values):
    return dict(zip(model.resistor_names, values))


# noise spectrum


@settings(max_examples=50, deadline=None)
@given(w=st.floats(1e-6, 1e4), T=st.floats(1e-3, 1e3))
def test_thermal_weight_bounds_and_parity(w, T):
    q = thermal_weight(w, T)
    assert q == thermal_weight(-w, T)
    assert q >= max(T, 0.5 * w) * (1 - 1e-12)
    assert q <= T + 0.5 * w + 1e-12
    assert planck_weight(w, T) == pytest.approx(q - 0.5 * w, rel=1e-9, abs=1e-12 * q)


def test_thermal_weight_limits():
    assert thermal_weight(0.0, 2.5) == pytest.approx(2.5, rel=1e-15)
    np.testing.assert_allclose(thermal_weight([1.0, 3.0], 0.0), [0.5, 1.5])
    assert planck_weight(0.0, 2.5) == pytest.approx(2.5)
    assert planck_weight(3.0, 0.0) == 0.0
    spec = NoiseSpectrum(np.array([1.0, 2.0]), cutoff=100.0)
    w = np.array([0.0, 0.5, 4.0])
    np.testing.assert_allclose(spec(w), spec(-w))
    np.testing.assert_allclose(spec(np.zeros(1)), np.full((1, 2), 1 / (2 * np.pi)))


# Green's functions


def test_static_green_function():
    m = natural(two_rc(R=0.7, C=1.2, L=0.8))
    w = np.array([-2.0, 0.3, 5.0])
    G = ghat_static(m, w)
    M = m.A @ hamiltonian_at(m, 0.0)
    for wi, Gi in zip(w, G):
        np.testing.assert_allclose(Gi @ (1j * wi * np.eye(3) - M), np.eye(3), atol=1e-13)
    np.testing.assert_allclose(ghat_static(m, -w), G.conj(), atol=1e-15)


def test_fourier_blocks_pairing():
    m = natural(two_rc(dC=0.3, wd=0.3, theta=1.0))
    w = np.linspace(-3, 3, 7)
    g = ghat_fourier(m, omega=w)
    np.testing.assert_allclose(g.blocks[::-1], np.conj(g.blocks[:, ::-1]), atol=1e-14)
    mir = g.mirrored()
    np.testing.assert_allclose(mir.blocks, g.blocks[::-1], atol=1e-14)


def test_fourier_blocks_match_time_domain():
    wd = 0.3
    m = natural(two_rc(dC=0.3, wd=wd, theta=1.0))
    om = np.array([0.7, -1.3])
    g = ghat_fourier(m, omega=om)
    period = 2 * np.pi / wd

    def rhs(t, y):
        G = y.reshape(2, 3, 3)
        M = m.A @ hamiltonian_at(m, t)
        return (np.eye(3)[None] - (1j * om[:, None, None] * np.eye(3) - M) @ G).ravel()

    t_end = 30 * period + 1.234
    sol = solve_ivp(rhs, (0, t_end), np.zeros(18, complex), rtol=1e-11, atol=1e-13, method="DOP853")
    np.testing.assert_allclose(sol.y[:, -1].reshape(2, 3, 3), g.at_time(t_end), atol=1e-10)


def test_perturbative_blocks_second_order_error():
    w = np.linspace(-3, 3, 7)
    errs = []
    for dC in (0.02, 0.04):
        m = natural(two_rc(dC=dC, wd=0.3, theta=1.0))
        a = ghat_fourier(m, omega=w)
        b = ghat_fourier(m, omega=w, perturbative=True, j_max=a.j_max)
        errs.append(np.abs(a.blocks - b.blocks).max())
    assert errs[1] / errs[0] == pytest.approx(4.0, rel=0.05)


# static transport


def test_overdamped_transfer_function_closed_form():
    R1, R2, C, Cp = 1.3, 0.7, 0.9, 1.6
    m = natural(overdamped_pair(R1, R2, C, Cp))
    w = np.geomspace(1e-2, 1e2, 20)
    g = transfer_static(m, omega=w)
    i, j = m.resistor_names.index("R1"), m.resistor_names.index("R2")
    expect = f12_overdamped(w, R1, R2, C, Cp)
    np.testing.assert_allclose(g.F[:, i, j], expect, rtol=1e-10)
    np.testing.assert_allclose(g.F[:, j, i], expect, rtol=1e-10)
    np.testing.assert_allclose(g.F.sum(axis=1), 0.0, atol=1e-16)


def test_underdamped_transfer_function_closed_form():
    R1, R2, C, Cp, L = 1.3, 0.7, 0.9, 1.6, 0.05
    m = natural(underdamped_pair(R1, R2, C, Cp, L))
    w = np.geomspace(1e-2, 1e2, 20)
    g = transfer_static(m, omega=w)
    i, j = m.resistor_names.index("R1"), m.resistor_names.index("R2")
    np.testing.assert_allclose(g.F[:, i, j], f12_underdamped(w, R1, R2, C, Cp, L), rtol=1e-10)
    # the diagonal from the sum rule agrees with the direct evaluation
    np.testing.assert_allclose(g.F[:, [0, 1], [0, 1]], g.diag_direct, atol=1e-14)


def test_overdamped_limit_of_heat_current():
    T1, T2 = 0.05, 0.2
    mb = natural(overdamped_pair(T1=T1, T2=T2))
    qb = by_name(mb, heat_static_quantum(mb))
    assert qb["R1"] > 0 > qb["R2"]
    diffs = []
    for L in (1e-1, 1e-2, 1e-3, 1e-4):
        ma = natural(underdamped_pair(L=L, T1=T1, T2=T2))
        qa = by_name(ma, heat_static_quantum(ma))
        diffs.append(abs(qa["R1"] - qb["R1"]))
    assert all(b < a for a, b in zip(diffs, diffs[1:]))
    assert diffs[-1] < 1e-3 * abs(qb["R1"])


def test_static_high_temperature_matches_classical():
    m = natural(two_rc(T1=100.0, T2=80.0))
    q = heat_static_quantum(m)
    qc = heat_current_classical(m, None, solve_stationary_lyapunov(m))
    np.testing.assert_allclose(q, qc, rtol=1e-4)
    np.testing.assert_allclose(q.sum(), 0.0, atol=1e-12)
    g = transfer_static(m)
    np.testing.assert_allclose(heat_static_quantum(m, grid=g), q, rtol=1e-8)


def test_static_equal_temperatures_no_flow():
    m = natural(two_rc(T1=0.3, T2=0.3))
    np.testing.assert_allclose(heat_static_quantum(m), 0.0, atol=1e-15)


def test_static_heat_with_dc_source_adds_joule_term():
    m = natural(parse_netlist("V1 1 0 V=2\nR1 1 2 R=0.5 T=0.1\nL1 2 3 L=1\nC1 3 0 C=1\nR2 3 0 R=1 T=0.1\n"))
    q = by_name(m, heat_static_quantum(m))
    # DC current 2 / 1.5 through both resistors
    assert q["R1"] == pytest.approx(0.5 * (2 / 1.5) ** 2, rel=1e-9)
    assert q["R2"] == pytest.approx(1.0 * (2 / 1.5) ** 2, rel=1e-9)


def test_static_transfer_refuses_driven_circuit():
    with pytest.raises(ModelError):
        transfer_static(natural(two_rc(dC=0.1, wd=1.0)))


# periodic transport


@pytest.fixture(scope="module")
def crossover_grid():
    m = natural(two_rc(R=2.0, T1=100.0, T2=100.0, dC=0.1, wd=2 * np.pi * 1e-2, theta=np.pi / 2))
    return m, transfer_periodic(m)


def test_periodic_sum_rule_and_classical_limit(crossover_grid):
    m, g = crossover_grid
    np.testing.assert_allclose(g.F[:, [0, 1], [0, 1]], g.diag_direct, atol=1e-14)
    q = g.heat(m.temperatures)
    ca = cycle_average(m, solve_generalized_lyapunov(m))
    np.testing.assert_allclose(q, ca.Qdot, rtol=1e-4)
    np.testing.assert_allclose(heat_periodic_quantum(m, grid=g), q)


def test_periodic_threshold_temperature(crossover_grid):
    m, g = crossover_grid
    Ts = threshold_temperature(g)
    assert 0 < Ts < 10
    # heating below, cooling above
    assert g.heat(np.full(2, 0.5 * Ts))[0] > 0
    assert g.heat(np.full(2, 2.0 * Ts))[0] < 0


def test_periodic_cutoff_convergence(crossover_grid):
    m, g = crossover_grid
    g2 = transfer_periodic(m, cutoff=2 * g.cutoff)
    T = np.array([1.0, 1.0])
    h1, h2 = g.heat(T), g2.heat(T)
    assert np.abs(h1 - h2).max() < 1e-6 * np.abs(h1).max()


def test_periodic_refuses_sources():
    m = natural(parse_netlist(".drive wd=1\nV1 1 0 V=1\nR1 1 2 R=1 T=1\nC1 2 0 C=1 A1=0.1\n"))
    with pytest.raises(ModelError):
        heat_periodic_quantum(m)


# covariance


def test_stationary_covariance_classical_limit():
    m = natural(series_rlc(T=500.0))
    q = quantum_stationary_covariance(m)
    c = solve_stationary_lyapunov(m)
    np.testing.assert_allclose(np.diag(q), np.diag(c), rtol=2e-3)


def test_zero_temperature_flux_variance_grows_with_log_cutoff():
    m = natural(series_rlc(T=1.0))
    v = [quantum_stationary_covariance(m, cutoff=L, temperatures=[0.0]) for L in (1e2, 1e3, 1e4)]
    # charge variance converges, flux variance increases by the same amount per decade
    assert v[2][0, 0] == pytest.approx(v[1][0, 0], rel=1e-5)
    d1, d2 = v[1][1, 1] - v[0][1, 1], v[2][1, 1] - v[1][1, 1]
    assert d2 == pytest.approx(d1, rel=1e-3)
    assert d1 == pytest.approx(np.log(10) / np.pi * 1.0, rel=1e-2)


def test_quantum_transient_relaxes_to_stationary():
    m = natural(series_rlc(T=0.2))
    sq = quantum_stationary_covariance(m)
    s = quantum_covariance_transient(m, np.zeros((2, 2)), (0, 40), dt=0.005, save_every=1000)
    np.testing.assert_allclose(s.sigma[-1], sq, atol=1e-6 * np.abs(sq).max())


def test_quantum_transient_high_temperature():
    m = natural(series_rlc(T=500.0))
    s = quantum_covariance_transient(m, np.zeros((2, 2)), (0, 15), dt=0.01, save_every=250)
    c = integrate_covariance(m, np.zeros((2, 2)), (0, 15), 0.01, save_every=250)
    late = s.times >= 10.0
    assert late.sum() == 3
    for a, b in zip(s.sigma[late], c.sigma[late]):
        assert np.abs(a - b).max() < 1e-2 * np.abs(b).max()


def test_default_cutoff_scales():
    m = natural(series_rlc(T=1.0))
    assert default_cutoff(m) == pytest.approx(200.0)
    assert default_cutoff(m, temperatures=[1e3]) == pytest.approx(4e4)
    d = natural(two_rc(dC=0.1, wd=3.0))
    assert default_cutoff(d, j_max=10) >= 200 * 30
    assert fourier_hamiltonian(d).k_max > 0
