"""Heat, work, energy balance and entropy production for Gaussian states.

Sign convention: ``Qdot_r > 0`` means energy flows into resistor ``r``, so
that ``dE/dt = -sum_r Qdot_r + Wdot_s + Wdot_d``. Cooling resistor 1 reads
``Qdot_1 < 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import lyapunov_vec
from .errors import NoStationaryState, NumericalError
from .statespace import (
    StateSpaceModel,
    hamiltonian_at,
    hamiltonian_rate,
    port_to_branch,
    resistor_port_solve,
)

__all__ = [
    "ThermoSample",
    "covariance_rate",
    "heat_current_classical",
    "parallel_rc_heat",
    "total_heat_rate",
    "work_rates",
    "energy_rate",
    "entropy_production",
    "thermo_sample",
]


def _moments(model, mean, sigma):
    n = model.n
    mean = np.zeros(n) if mean is None else np.asarray(mean, dtype=float).reshape(n)
    sigma = np.zeros((n, n)) if sigma is None else np.asarray(sigma, dtype=float).reshape(n, n)
    return mean, sigma


def _sources(model, s, t):
    return model.sources(t) if s is None else np.asarray(s, dtype=float)


def covariance_rate(model: StateSpaceModel, sigma, t: float = 0.0, temperatures=None) -> np.ndarray:
    """Right-hand side of the covariance equation at time ``t``."""
    M = model.A @ hamiltonian_at(model, t)
    sigma = np.asarray(sigma, dtype=float)
    return M @ sigma + sigma @ M.T + model.noise_matrix(temperatures)


def heat_current_classical(model: StateSpaceModel, mean, sigma, t: float = 0.0, s=None) -> np.ndarray:
    """Mean heat current into each resistor (port order), in watt.

    ``<Qdot_r> = <j_r><v_r> + Tr[(H sigma H - kb T_r H) D_r]``.

    Raises
    ------
    InconsistentTopologyError
        If ``Q_RR != 0``: local currents diverge in the white-noise limit.
    """
    model.require_consistent()
    mean, sigma = _moments(model, mean, sigma)
    H = hamiltonian_at(model, t)
    p = resistor_port_solve(model, mean, _sources(model, s, t), t)
    j, v = port_to_branch(model, p)
    Hc = model.c @ H  # rows: c_r^T H
    fluct = np.einsum("ri,ij,rj->r", Hc, sigma, Hc) - model.units.kb * model.temperatures * np.einsum(
        "ri,ri->r", Hc, model.c
    )
    return j * v + fluct


def parallel_rc_heat(model: StateSpaceModel, sigma, resistor: str, capacitor: str, mean=None, t: float = 0.0) -> float:
    """Relaxation form ``[<q^2>/(2C) - kb T/2] / (R C / 2)`` for an RC cell.

    Valid when ``resistor`` sits directly across ``capacitor`` and nothing
    else dissipates through that resistor. Used as an independent check.
    """
    i = model.capacitor_names.index(capacitor)
    r = model.resistor_names.index(resistor)
    mean, sigma = _moments(model, mean, sigma)
    C = 1.0 / hamiltonian_at(model, t)[i, i]
    R = model.resistances[r]
    q2 = sigma[i, i] + mean[i] ** 2
    return (q2 / (2 * C) - 0.5 * model.units.kb * model.temperatures[r]) / (R * C / 2)


def total_heat_rate(model: StateSpaceModel, mean, sigma=None, s=None, t: float = 0.0, sigma_rate=None) -> float:
    """Total dissipated power ``<Qdot> = Qdot(<x>) - Tr[H dsigma/dt] / 2``.

    Well defined for every topology (also when ``Q_RR != 0``). The first
    term is ``p^T R p`` for the deterministic port vector ``p`` at the mean.
    ``sigma_rate`` defaults to the covariance equation's right-hand side.
    """
    mean, sig = _moments(model, mean, sigma)
    p = resistor_port_solve(model, mean, _sources(model, s, t), t)
    det = float(p @ model.Rmat @ p)
    if sigma is None:
        return det
    H = hamiltonian_at(model, t)
    rate = covariance_rate(model, sig, t) if sigma_rate is None else np.asarray(sigma_rate)
    return det - 0.5 * float(np.trace(H @ rate))


def work_rates(model: StateSpaceModel, mean, sigma=None, s=None, t: float = 0.0) -> tuple[float, float]:
    """Source and drive work rates ``(Wdot_s, Wdot_d)`` in watt.

    ``Wdot_s = gE^T Bs s + (Msd s + 2 Md gE)^T alpha^T R alpha Msd s`` with
    ``gE = H <x>``; ``Wdot_d = <x>^T dH/dt <x> / 2 + Tr[dH/dt sigma] / 2``.
    """
    mean, sig = _moments(model, mean, sigma)
    s = _sources(model, s, t)
    H = hamiltonian_at(model, t)
    g = H @ mean
    if s.size:
        a = model.alpha
        w = model.Msd @ s
        ws = float(g @ model.Bs @ s + (w + 2 * model.Md @ g) @ (a.T @ model.Rmat @ a) @ w)
    else:
        ws = 0.0
    if model.is_driven:
        dH = hamiltonian_rate(model, t)
        wd = 0.5 * float(mean @ dH @ mean + np.trace(dH @ sig))
    else:
        wd = 0.0
    return ws, wd


def energy_rate(model: StateSpaceModel, mean, sigma, s=None, t: float = 0.0) -> float:
    """Analytic ``d<E>/dt`` from the moment equations."""
    mean, sig = _moments(model, mean, sigma)
    s = _sources(model, s, t)
    H = hamiltonian_at(model, t)
    dmean = model.A @ H @ mean + (model.Bs @ s if s.size else 0.0)
    out = float(mean @ H @ dmean) + 0.5 * float(np.trace(H @ covariance_rate(model, sig, t)))
    if model.is_driven:
        dH = hamiltonian_rate(model, t)
        out += 0.5 * float(mean @ dH @ mean + np.trace(dH @ sig))
    return out


def _expect_bilinear(A1, a1, A2, a2, D, mean, sigma):
    # E[(A1 x + a1)^T D (A2 x + a2)] for x ~ N(mean, sigma)
    u = A1 @ mean + a1
    w = A2 @ mean + a2
    return float(np.trace(A1 @ sigma @ A2.T @ D) + u @ D @ w)


@dataclass(frozen=True)
class EntropyProduction:
    """Entropy production rate and its Gaussian decomposition (watt/kelvin).

    The decomposition fields are ``None`` when the frozen stationary state
    does not exist at ``t``.
    """

    Sigma_dot: float
    dS_dt: float
    Sigma_ad: float | None = None
    Sigma_nad: float | None = None
    Sigma_nad_prime: float | None = None
    Sigma_gaussian: float | None = None


def entropy_production(
    model: StateSpaceModel,
    mean,
    sigma,
    t: float = 0.0,
    s=None,
    decompose: bool = True,
) -> EntropyProduction:
    """Total entropy production and adiabatic/non-adiabatic split.

    ``Sigma_dot = kb Tr[sigma^-1 dsigma/dt] / 2 + sum_r <Qdot_r>/T_r``. The
    split uses the probability currents ``j_r = H x + kb T_r grad log p``
    evaluated in closed form for Gaussian ``p`` and for the frozen
    stationary ``p_st`` (mean ``mu_st``, covariance ``sigma_st`` at ``H(t)``):

    * ``Sigma_ad = sum_r <j_r^st D_r j_r^st> / T_r``
    * ``Sigma_nad = sum_r <dj_r D_r dj_r> / T_r`` with ``dj_r = j_r - j_r^st``
    * ``Sigma_nad_prime = 2 sum_r <dj_r D_r j_r^st> / T_r``

    so that the three parts add up to ``Sigma_dot``.
    """
    mean, sigma = _moments(model, mean, sigma)
    kb = model.units.kb
    try:
        sinv = np.linalg.inv(sigma)
    except np.linalg.LinAlgError:
        raise NumericalError("covariance is singular; entropy undefined") from None
    dsig = covariance_rate(model, sigma, t)
    dS = 0.5 * kb * float(np.trace(sinv @ dsig))
    heats = heat_current_classical(model, mean, sigma, t, s)
    T = model.temperatures
    total = dS + float(np.sum(heats / T))
    if not decompose:
        return EntropyProduction(total, dS)
    H = hamiltonian_at(model, t)
    M = model.A @ H
    try:
        sig_st = lyapunov_vec(M, model.noise_matrix())
        sst_inv = np.linalg.inv(sig_st)
        svec = _sources(model, s, t)
        mu_st = -np.linalg.solve(M, model.Bs @ svec) if svec.size else np.zeros(model.n)
    except (NoStationaryState, np.linalg.LinAlgError):
        return EntropyProduction(total, dS)
    ad = nad = cross = gauss = 0.0
    for r in range(model.N_R):
        D = np.outer(model.c[r], model.c[r])
        kT = kb * T[r]
        A_st, a_st = H - kT * sst_inv, kT * sst_inv @ mu_st
        A_d, a_d = kT * (sst_inv - sinv), kT * (sinv @ mean - sst_inv @ mu_st)
        A_j, a_j = H - kT * sinv, kT * sinv @ mean
        ad += _expect_bilinear(A_st, a_st, A_st, a_st, D, mean, sigma) / T[r]
        nad += _expect_bilinear(A_d, a_d, A_d, a_d, D, mean, sigma) / T[r]
        cross += 2.0 * _expect_bilinear(A_d, a_d, A_st, a_st, D, mean, sigma) / T[r]
        gauss += _expect_bilinear(A_j, a_j, A_j, a_j, D, mean, sigma) / T[r]
    return EntropyProduction(total, dS, ad, nad, cross, gauss)


@dataclass(frozen=True)
class ThermoSample:
    """Thermodynamic record at one time (SI: watt, watt/kelvin)."""

    t: float
    Qdot: np.ndarray
    Wdot_s: float
    Wdot_d: float
    Edot: float
    Sigma_dot: float | None
    Sigma_ad: float | None = None
    Sigma_nad: float | None = None
    Sigma_nad_prime: float | None = None

    @property
    def balance_residual(self) -> float:
        return self.Edot + float(np.sum(self.Qdot)) - self.Wdot_s - self.Wdot_d


def thermo_sample(model: StateSpaceModel, mean, sigma, t: float = 0.0, s=None, entropy: bool = True) -> ThermoSample:
    """All thermodynamic rates of a Gaussian state.

    For circuits with ``Q_RR != 0`` only the total heat is reported (as a
    one-element ``Qdot``) and the entropy fields are ``None``.
    """
    ws, wd = work_rates(model, mean, sigma, s, t)
    edot = energy_rate(model, mean, sigma, s, t)
    if not model.thermo_consistent:
        q = np.array([total_heat_rate(model, mean, sigma, s, t)])
        return ThermoSample(t, q, ws, wd, edot, None)
    q = heat_current_classical(model, mean, sigma, t, s)
    if entropy:
        ep = entropy_production(model, mean, sigma, t, s)
        return ThermoSample(t, q, ws, wd, edot, ep.Sigma_dot, ep.Sigma_ad, ep.Sigma_nad, ep.Sigma_nad_prime)
    return ThermoSample(t, q, ws, wd, edot, None)
