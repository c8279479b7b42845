import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlcthermo.circuits import two_rc
from rlcthermo.dynamics import integrate_covariance, solve_stationary_lyapunov
from rlcthermo.errors import InstabilityError, NumericalError, TruncationWarning
from rlcthermo.floquet import (
    cycle_average,
    fourier_hamiltonian,
    periodic_covariance,
    solve_generalized_lyapunov,
    two_rc_analytic,
)
from rlcthermo.netlist import parse_netlist
from rlcthermo.statespace import hamiltonian_at
from rlcthermo.thermo import heat_current_classical

from conftest import natural


def driven(**kw):
    base = dict(R=1.0, C=1.0, L=1.0, T1=1.0, T2=1.0, dC=0.05, wd=1.0, theta=np.pi / 2)
    base.update(kw)
    return natural(two_rc(**base))


def test_fourier_blocks_reconstruct_hamiltonian():
    m = driven(dC=0.4, wd=0.7, theta=1.3)
    fh = fourier_hamiltonian(m)
    t = np.linspace(0, 2 * np.pi / 0.7, 37)
    np.testing.assert_allclose(fh.reconstruct(t).real, hamiltonian_at(m, t), atol=1e-12)
    # H(t) real: H_{-k} = conj(H_k)
    for k in range(1, fh.k_max + 1):
        np.testing.assert_allclose(fh[-k], fh[k].conj(), atol=1e-15)
    assert not fh[fh.k_max + 1].any()


def test_block_solution_matches_direct_propagation():
    m = driven()
    fc = solve_generalized_lyapunov(m)
    sol = periodic_covariance(m, n_samples=17)
    for t, S in zip(sol.times, sol.sigma):
        np.testing.assert_allclose(fc.sigma(t), S, atol=1e-11)
    assert fc.max_imag() < 1e-10


@settings(max_examples=15, deadline=None)
@given(
    dC=st.floats(0.0, 0.6),
    wd=st.floats(0.05, 3.0),
    theta=st.floats(0, 2 * np.pi),
    T2=st.floats(0.5, 2.0),
)
def test_reconstruction_real_symmetric(dC, wd, theta, T2):
    m = driven(dC=dC, wd=wd, theta=theta, T2=T2, R=0.8, L=1.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        fc = solve_generalized_lyapunov(m)
    assert fc.max_imag() < 1e-10
    t = np.linspace(0, 2 * np.pi / wd, 9)
    S = fc.sigma(t)
    np.testing.assert_allclose(S, np.swapaxes(S, 1, 2), atol=1e-14)
    assert np.all(np.linalg.eigvalsh(S) > 0)


def test_reference_split_does_not_change_result():
    m = driven(dC=0.3, wd=0.6, T1=1.3, T2=0.9)
    a = solve_generalized_lyapunov(m)
    b = solve_generalized_lyapunov(m, T_ref=0.0)
    t = np.linspace(0, 2 * np.pi / 0.6, 11)
    np.testing.assert_allclose(a.sigma(t), b.sigma(t), atol=1e-12)


def test_truncation_order_converged():
    m = driven(dC=0.5, wd=2 * np.pi * 1e-2)
    fc = solve_generalized_lyapunov(m)
    fc2 = solve_generalized_lyapunov(m, K=fc.K + 2)
    q1, q2 = cycle_average(m, fc).Qdot, cycle_average(m, fc2).Qdot
    assert np.abs(q1 - q2).max() < 1e-8 * np.abs(q1).max()


def test_truncation_warning_when_too_short():
    m = driven(dC=0.8, wd=0.05, T1=2.0)
    fh = fourier_hamiltonian(m, k_max=2)
    with pytest.warns(TruncationWarning):
        fc = solve_generalized_lyapunov(m, fourier_H=fh, K=3)
    assert fc.boundary_weight > 1e-6


def test_undriven_reduces_to_static():
    m = natural(two_rc(R=1.0, C=1.0, L=1.0, T1=2.0, T2=1.0))
    fc = solve_generalized_lyapunov(m)
    np.testing.assert_allclose(fc.sigma(0.0), solve_stationary_lyapunov(m), atol=1e-13)
    ca = cycle_average(m, fc)
    np.testing.assert_allclose(ca.Qdot, heat_current_classical(m, None, solve_stationary_lyapunov(m)), atol=1e-13)
    assert ca.Wdot == 0.0


def test_floquet_and_transient_cycle_averages_agree():
    wd = 0.9
    m = driven(R=0.7, L=1.3, T1=1.4, dC=0.3, wd=wd, theta=1.0)
    period = 2 * np.pi / wd
    sol = integrate_covariance(m, np.eye(3), (0.0, 52 * period), period / 400)
    a = cycle_average(m, sol)
    b = cycle_average(m, solve_generalized_lyapunov(m))
    np.testing.assert_allclose(a.Qdot, b.Qdot, rtol=1e-5)
    assert a.Wdot == pytest.approx(b.Wdot, rel=1e-5)
    assert b.closure < 1e-12


def test_transient_average_needs_whole_periods():
    m = driven(wd=1.0)
    sol = integrate_covariance(m, np.eye(3), (0.0, 7.0), 0.01)
    with pytest.raises(NumericalError):
        cycle_average(m, sol)


def test_energy_closure_over_cycle():
    m = driven(dC=0.4, wd=0.3, T1=1.0, T2=1.2)
    ca = cycle_average(m, solve_generalized_lyapunov(m))
    assert ca.Wdot == pytest.approx(float(ca.Qdot.sum()), rel=1e-10)
    assert ca.heat("R2") == ca.Qdot[1]


def test_stability_check_refuses_parametric_resonance():
    m = natural(parse_netlist(".drive wd=2\nC1 1 0 C=1 A1=0.5\nL1 1 2 L=1\nR1 2 0 R=0.01 T=1\n"))
    with pytest.raises(InstabilityError):
        solve_generalized_lyapunov(m, check_stability=True)


# closed forms


def test_analytic_isothermal_optimum_is_half_maximum():
    for td, t0 in [(1.0, 1.0), (2.0, 1.0), (0.5, 3.0)]:
        p = two_rc_analytic(td, 1.0, t0**2, 0.05, 1e-3, np.pi / 2, 1.0)
        expect = 2 * td / (td**2 + t0**2) / (1 + 2 * (t0 / td) ** 2)
        assert p.wd_max == pytest.approx(expect, rel=1e-14)
        assert p.wd_opt == p.wd_max / 2


def test_analytic_isothermal_limit_is_continuous():
    iso = two_rc_analytic(1.0, 1.0, 1.0, 0.05, 0.01, np.pi / 2, 1.0)
    near = two_rc_analytic(1.0, 1.0, 1.0, 0.05, 0.01, np.pi / 2, 1.0, 1.0 + 1e-13)
    for name in ("W", "Q1", "Q2"):
        assert getattr(near, name) == pytest.approx(getattr(iso, name), rel=1e-6)


@pytest.mark.parametrize("wd", [1e-3, 1e-2])
def test_perturbative_cycle_matches_closed_form(wd):
    m = driven(wd=wd)
    ca = cycle_average(m, solve_generalized_lyapunov(m))
    p = two_rc_analytic(1.0, 1.0, 1.0, 0.05, wd, np.pi / 2, 1.0)
    assert ca.Wdot == pytest.approx(p.W, rel=0.02)
    assert ca.Qdot[0] == pytest.approx(p.Q1, rel=0.02)
    assert ca.Qdot[1] == pytest.approx(p.Q2, rel=0.02)
    assert ca.CoP == pytest.approx(p.CoP, rel=0.05)


def test_cooling_sign_change_in_perturbative_window():
    p = two_rc_analytic(1.0, 1.0, 1.0, 0.05, 1.0, np.pi / 2, 1.0)

    def q1(wd):
        m = driven(wd=wd)
        return cycle_average(m, solve_generalized_lyapunov(m)).Qdot[0]

    assert q1(p.wd_opt) < 0
    assert q1(2 * p.wd_max) > 0


def test_non_isothermal_cop_below_carnot():
    T1, T2 = 1.0, 1.01
    carnot = T1 / (T2 - T1)
    for wd in np.geomspace(0.02, 0.5, 7):
        m = driven(R=3.0, dC=0.6, wd=wd, T1=T1, T2=T2)
        ca = cycle_average(m, solve_generalized_lyapunov(m))
        assert not ca.CoP > carnot


def test_max_cop_is_percent_level_of_carnot():
    T1, gap = 1.0, 5e-3
    best = 0.0
    for wd in np.geomspace(1e-3, 1.0, 31):
        m = driven(R=3.0, dC=0.6, wd=wd, T1=T1, T2=T1 * (1 + gap))
        ca = cycle_average(m, solve_generalized_lyapunov(m))
        if np.isfinite(ca.CoP):
            best = max(best, ca.CoP)
    ratio = best * gap / T1
    assert 1e-3 < ratio < 1e-1
