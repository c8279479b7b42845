"""Periodic steady states of driven circuits.

The covariance of a stable, periodically driven circuit converges to a
periodic ``sigma(t)``. It is written as ``sigma = kb T_ref H(t)^-1 + delta(t)``
with ``delta(t) = sum_{k,k'} S_{k,k'} exp(i (k - k') wd t)``; the blocks solve
the generalized Lyapunov equation

    AA S + S AA^dagger + F = 0,    AA_{jl} = A H_{j-l} - i j wd delta_{jl}

where the forcing ``F`` carries ``sum_r 2 kb (T_r - T_ref) D_r`` in the
central block and ``-kb T_ref d(H^-1)/dt`` in the first block column/row.
With ``T_ref = 0`` this is the plain equation with ``2 kb T_r D_r`` in the
central block; a reference temperature removes the large equilibrium part
and keeps small heat currents free of cancellation error.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from ._linalg import kron_sum, ordered_product, rk4_linear_steps, sym
from .dynamics import CovarianceSolution, floquet_stability, integrate_covariance
from .errors import InstabilityError, NumericalError, TruncationWarning
from .statespace import StateSpaceModel, hamiltonian_at, hamiltonian_rate, inverse_hamiltonian_at

__all__ = [
    "FourierOperator",
    "FloquetCovariance",
    "CycleAverage",
    "TwoRCPrediction",
    "fourier_hamiltonian",
    "solve_generalized_lyapunov",
    "periodic_covariance",
    "cycle_average",
    "two_rc_analytic",
]

_NGRID = 1024
_TAIL = 1e-12


@dataclass(frozen=True)
class FourierOperator:
    """Fourier blocks ``H_k`` (``|k| <= k_max``) of a periodic matrix.

    ``coeffs[k + k_max]`` holds ``H_k``; ``inverse[k + k_max]`` holds the
    blocks of ``H^-1 = diag(Cmat, Lmat)``, which are exact for cosine drives.
    """

    wd: float
    k_max: int
    coeffs: np.ndarray
    inverse: np.ndarray

    def __getitem__(self, k: int) -> np.ndarray:
        if abs(k) > self.k_max:
            return np.zeros(self.coeffs.shape[1:], dtype=complex)
        return self.coeffs[k + self.k_max]

    def reconstruct(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.arange(-self.k_max, self.k_max + 1)
        ph = np.exp(1j * self.wd * t[..., None] * k)
        return np.einsum("...k,kij->...ij", ph, self.coeffs)


def _dft_blocks(samples: np.ndarray) -> np.ndarray:
    # samples on an N-point period grid -> coefficients c_k for k = 0..N-1 (FFT order)
    return np.fft.fft(samples, axis=0) / samples.shape[0]


def fourier_hamiltonian(model: StateSpaceModel, k_max: int | None = None, n_grid: int = _NGRID) -> FourierOperator:
    """Discrete Fourier transform of ``H(t)`` over one drive period.

    ``k_max`` defaults to the smallest order whose discarded tail is below
    ``1e-12 * ||H_0||``.
    """
    wd = model.drive_frequency
    if wd is None:
        # undriven circuits: a single static block
        H0 = hamiltonian_at(model, 0.0).astype(complex)
        inv = inverse_hamiltonian_at(model, 0.0).astype(complex)
        return FourierOperator(1.0, 0, H0[None], inv[None])
    t = np.arange(n_grid) * (2 * np.pi / wd / n_grid)
    c = _dft_blocks(hamiltonian_at(model, t))
    ci = _dft_blocks(inverse_hamiltonian_at(model, t))
    norms = np.linalg.norm(c, axis=(1, 2))
    half = n_grid // 2
    if k_max is None:
        ref = norms[0]
        k_max = half - 1
        for k in range(half):
            tail = norms[k + 1 : half].sum() + norms[half + 1 : n_grid - k].sum()
            if tail < _TAIL * ref:
                k_max = k
                break
    k_max = int(min(k_max, half - 1))
    idx = np.arange(-k_max, k_max + 1) % n_grid
    return FourierOperator(wd, k_max, c[idx], ci[idx])


@dataclass
class FloquetCovariance:
    """Block solution of the generalized Lyapunov equation.

    Attributes
    ----------
    S : (2K+1, 2K+1, n, n) complex array
        Blocks of ``delta`` (the deviation from ``kb T_ref H^-1``).
    T_ref : float
        Reference temperature used in the split.
    """

    wd: float
    K: int
    S: np.ndarray
    T_ref: float
    kb: float
    hinv: np.ndarray  # Fourier blocks of H^-1, index k + kh
    kh: int
    boundary_weight: float

    def blocks(self) -> np.ndarray:
        """Blocks of ``sigma`` itself (``delta`` plus the reference part)."""
        out = self.S.copy()
        K = self.K
        for m in range(-self.kh, self.kh + 1):
            if abs(m) > K:
                continue
            blk = self.kb * self.T_ref * self.hinv[m + self.kh]
            if m >= 0:
                out[m + K, K] += blk
            else:
                out[K, -m + K] += blk
        return out

    def _diagonals(self) -> np.ndarray:
        K = self.K
        n = self.S.shape[-1]
        d = np.zeros((4 * K + 1, n, n), dtype=complex)
        for j in range(2 * K + 1):
            for l in range(2 * K + 1):
                d[j - l + 2 * K] += self.S[j, l]
        return d

    def delta(self, t) -> np.ndarray:
        """Deviation ``delta(t)`` (real part) on scalar or array ``t``."""
        t = np.asarray(t, dtype=float)
        K = self.K
        m = np.arange(-2 * K, 2 * K + 1)
        ph = np.exp(1j * self.wd * t[..., None] * m)
        out = np.einsum("...m,mij->...ij", ph, self._diagonals())
        return out

    def sigma(self, t) -> np.ndarray:
        """Reconstructed periodic covariance ``sigma(t)``."""
        t = np.asarray(t, dtype=float)
        m = np.arange(-self.kh, self.kh + 1)
        ph = np.exp(1j * self.wd * t[..., None] * m)
        ref = np.einsum("...m,mij->...ij", ph, self.hinv)
        return (self.kb * self.T_ref * ref + self.delta(t)).real

    def max_imag(self, n_grid: int = 256) -> float:
        t = np.arange(n_grid) * (2 * np.pi / self.wd / n_grid)
        return float(np.abs(self.delta(t).imag).max())


def solve_generalized_lyapunov(
    model: StateSpaceModel,
    fourier_H: FourierOperator | None = None,
    K: int | None = None,
    T_ref: float | None = None,
    temperatures=None,
    check_stability: bool = False,
) -> FloquetCovariance:
    """Periodic covariance from the truncated block Lyapunov equation.

    Parameters
    ----------
    fourier_H : FourierOperator, optional
        Defaults to :func:`fourier_hamiltonian` with automatic ``k_max``.
    K : int, optional
        Block truncation, default ``k_max + 4``.
    T_ref : float, optional
        Reference temperature for the equilibrium split (default: mean of
        the resistor temperatures). ``0`` gives the plain block equation.

    Raises
    ------
    InstabilityError
        If ``check_stability`` is set and the Floquet multipliers leave the
        unit disk.
    NumericalError
        If the block system is singular.

    Warns
    -----
    TruncationWarning
        If the outermost blocks carry more than ``1e-6`` of the solution norm.
    """
    if fourier_H is None:
        fourier_H = fourier_hamiltonian(model)
    fh = fourier_H
    if check_stability and model.drive_frequency is not None:
        rep = floquet_stability(model)
        if not rep.stable:
            raise InstabilityError("periodic drive is unstable (parametric resonance)")
    kh = fh.k_max
    K = kh + 4 if K is None else int(K)
    if K < kh:
        raise ValueError("K must be at least k_max")
    n = model.n
    T = model.temperatures if temperatures is None else np.asarray(temperatures, dtype=float)
    kb = model.units.kb
    if T_ref is None:
        T_ref = float(np.mean(T)) if T.size else 0.0
    wd = fh.wd
    nb = 2 * K + 1
    big = np.zeros((nb * n, nb * n), dtype=complex)
    AH = np.einsum("ij,kjl->kil", model.A, fh.coeffs)
    for j in range(nb):
        for l in range(nb):
            m = j - l
            if abs(m) <= kh:
                big[j * n : (j + 1) * n, l * n : (l + 1) * n] = AH[m + kh]
        big[j * n : (j + 1) * n, j * n : (j + 1) * n] -= 1j * (j - K) * wd * np.eye(n)
    F = np.zeros_like(big)
    Q = 2.0 * kb * np.einsum("r,ri,rj->ij", T - T_ref, model.c, model.c)
    F[K * n : (K + 1) * n, K * n : (K + 1) * n] = Q
    if T_ref != 0.0:
        khi = (fh.inverse.shape[0] - 1) // 2
        for m in range(1, min(khi, K) + 1):
            Fm = -kb * T_ref * (1j * m * wd) * fh.inverse[m + khi]
            F[(K + m) * n : (K + m + 1) * n, K * n : (K + 1) * n] = Fm
            F[K * n : (K + 1) * n, (K + m) * n : (K + m + 1) * n] = Fm.conj().T
    try:
        X = sla.solve_continuous_lyapunov(big, -F)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError("generalized Lyapunov system is singular") from exc
    if not np.all(np.isfinite(X)):
        raise NumericalError("generalized Lyapunov system is singular")
    X = 0.5 * (X + X.conj().T)
    S = X.reshape(nb, n, nb, n).transpose(0, 2, 1, 3)
    total = np.linalg.norm(S)
    edge = np.sqrt(
        np.linalg.norm(S[0]) ** 2
        + np.linalg.norm(S[-1]) ** 2
        + np.linalg.norm(S[1:-1, 0]) ** 2
        + np.linalg.norm(S[1:-1, -1]) ** 2
    )
    weight = float(edge / total) if total > 0 else 0.0
    if weight > 1e-6:
        warnings.warn(f"Floquet truncation K={K}: boundary blocks carry {weight:.1e} of the norm", TruncationWarning)
    khi = (fh.inverse.shape[0] - 1) // 2
    return FloquetCovariance(wd, K, S, float(T_ref), kb, fh.inverse, khi, weight)


def periodic_covariance(model: StateSpaceModel, steps_per_period: int | None = None, n_samples: int = 257) -> CovarianceSolution:
    """Periodic covariance by direct time stepping (independent of Fourier blocks).

    The one-period RK4 propagator of the vectorized covariance equation
    gives the fixed point ``sigma(0) = Phi sigma(0) + w``; the equation is
    then integrated over one period from that point.
    """
    wd = model.drive_frequency
    if wd is None:
        raise ValueError("model is not driven")
    period = 2 * np.pi / wd
    if steps_per_period is None:
        steps_per_period = int(np.ceil(period / model.default_dt()))
    steps_per_period = int(np.ceil(steps_per_period / (n_samples - 1)) * (n_samples - 1))
    h = period / steps_per_period
    n = model.n
    d = n * n
    q = model.noise_matrix().reshape(-1, order="F")
    P = np.eye(d + 1)
    for k0 in range(0, steps_per_period, 32768):
        k1 = min(steps_per_period, k0 + 32768)
        k = np.arange(k0, k1)
        stages = []
        for f in (0.0, 0.5, 1.0):
            M = model.A @ hamiltonian_at(model, h * (k + f))
            L = np.zeros((len(k), d + 1, d + 1))
            L[:, :d, :d] = np.einsum("ij,kab->kiajb", np.eye(n), M).reshape(len(k), d, d) + np.einsum(
                "kij,ab->kiajb", M, np.eye(n)
            ).reshape(len(k), d, d)
            L[:, :d, d] = q
            stages.append(L)
        P = ordered_product(rk4_linear_steps(stages[0], stages[1], stages[2], h)) @ P
    Phi, w = P[:d, :d], P[:d, d]
    try:
        v = np.linalg.solve(np.eye(d) - Phi, w)
    except np.linalg.LinAlgError:
        raise NumericalError("no periodic covariance (multiplier on the unit circle)") from None
    S0 = sym(v.reshape(n, n, order="F"))
    sol = integrate_covariance(model, S0, (0.0, period), h, save_every=steps_per_period // (n_samples - 1))
    sol.kind = "floquet"
    return sol


@dataclass(frozen=True)
class CycleAverage:
    """Period-averaged heat currents (port order), work rate and CoP."""

    Qdot: np.ndarray
    Wdot: float
    CoP: float
    closure: float
    resistor_names: tuple = ()

    def heat(self, name: str) -> float:
        return float(self.Qdot[self.resistor_names.index(name)])


def _cop(q1: float, w: float) -> float:
    return abs(q1) / w if (q1 < 0 and w > 0) else float("nan")


def _target_index(model, target):
    if target is None:
        target = next(el.name for el in model.spec.elements if el.kind == "R")
    return model.resistor_names.index(target)


def cycle_average(
    model: StateSpaceModel,
    solution,
    target: str | None = None,
    n_grid: int | None = None,
    tol: float = 1e-5,
) -> CycleAverage:
    """Average heat and work rates over one period of the periodic state.

    Parameters
    ----------
    solution : FloquetCovariance or CovarianceSolution
        A Floquet block solution, or a transient covering at least two whole
        periods with uniform sampling (the last period is used and compared
        with the one before).
    target : str, optional
        Resistor whose cooling defines the CoP (default: first resistor).
    """
    model.require_consistent()
    wd = model.drive_frequency
    kb = model.units.kb
    T = model.temperatures
    r1 = _target_index(model, target)
    if wd is None:
        wd = 1.0
    if isinstance(solution, FloquetCovariance):
        fc = solution
        if n_grid is None:
            n_grid = max(256, 8 * (2 * fc.K + fc.kh) + 1)
        t = np.arange(n_grid) * (2 * np.pi / fc.wd / n_grid)
        H = hamiltonian_at(model, t)
        dlt = fc.delta(t).real
        HdH = H @ dlt @ H
        heat = np.einsum("ri,tij,rj->tr", model.c, HdH, model.c) - kb * (T - fc.T_ref)[None, :] * np.einsum(
            "ri,tij,rj->tr", model.c, H, model.c
        )
        Q = heat.mean(axis=0)
        if model.is_driven:
            dH = hamiltonian_rate(model, t)
            W = 0.5 * float(np.mean(np.einsum("tij,tji->t", dH, dlt)))
        else:
            W = 0.0
        closure = _closure(Q, W)
        return CycleAverage(Q, W, _cop(Q[r1], W), closure, model.resistor_names)
    sol = solution
    return _transient_average(model, sol, r1, tol)


def _closure(Q, W):
    scale = max(np.abs(Q).max(initial=0.0), abs(W), 1e-300)
    return abs(W - float(np.sum(Q))) / scale


def _transient_average(model, sol, r1, tol):
    from .thermo import heat_current_classical, work_rates

    wd = model.drive_frequency
    period = 2 * np.pi / wd if wd else None
    times = sol.times
    dts = np.diff(times)
    h = dts[0]
    if period is None:
        idx = [len(times) - 1]
        Q = heat_current_classical(model, sol.mean[-1], sol.sigma[-1], times[-1])
        W = work_rates(model, sol.mean[-1], sol.sigma[-1], None, times[-1])[1]
        return CycleAverage(Q, W, _cop(Q[r1], W), _closure(Q, W), model.resistor_names)
    per = int(round(period / h))
    if abs(per * h - period) > 1e-6 * period or len(times) < 2 * per + 1:
        raise NumericalError("transient must cover two whole periods with a sampling that divides the period")

    def average(i0):
        qs, ws = [], []
        for i in range(i0, i0 + per):
            qs.append(heat_current_classical(model, sol.mean[i], sol.sigma[i], times[i]))
            ws.append(work_rates(model, sol.mean[i], sol.sigma[i], None, times[i])[1])
        return np.mean(qs, axis=0), float(np.mean(ws))

    end = len(times) - 1
    Q, W = average(end - per)
    Qp, Wp = average(end - 2 * per)
    scale = max(np.abs(Q).max(), abs(W), 1e-300)
    if max(np.abs(Q - Qp).max(), abs(W - Wp)) > tol * scale:
        raise NumericalError("transient has not converged to a periodic state")
    return CycleAverage(Q, W, _cop(Q[r1], W), _closure(Q, W), model.resistor_names)


@dataclass(frozen=True)
class TwoRCPrediction:
    """Closed-form, lowest-order predictions for the driven two-RC circuit.

    Heat currents follow the sign convention of :mod:`rlcthermo.thermo`.
    ``wd_min`` is the non-isothermal cooling threshold (``nan`` when
    ``T1 >= T2``); ``wd_min_printed`` evaluates the same threshold with a
    single power of ``2C/dC`` as it is sometimes quoted.
    """

    tau_d: float
    tau_0: float
    a: float
    W: float
    W_dissipative: float
    Q1: float
    Q2: float
    Q_conduction: float
    CoP: float
    wd_max: float
    wd_opt: float
    wd_min: float
    wd_min_printed: float
    carnot: float
    perturbative: bool


def two_rc_analytic(R, C, L, dC, wd, theta, T1, T2=None, kb: float = 1.0) -> TwoRCPrediction:
    """Lowest-order cycle averages of the two-RC circuit under capacitive drive.

    Parameters
    ----------
    R, C, L : float
        Resistance, mean capacitance and coupling inductance (both cells equal).
    dC : float
        Drive amplitude of both capacitances.
    wd : float
        Drive angular frequency.
    theta : float
        Phase lag of the second capacitor.
    T1, T2 : float
        Resistor temperatures (``T2`` defaults to ``T1``).
    """
    T2 = T1 if T2 is None else T2
    td = R * C
    t0 = np.sqrt(L * C)
    s2 = td**2 + t0**2
    a = (dC / (2 * C)) ** 2
    dT = T1 - T2
    Tbar = 0.5 * (T1 + T2)
    st, ct = np.sin(theta), np.cos(theta)
    X = a * td**4 / s2**2
    W2 = kb * Tbar * wd**2 * td * a * (td**2 * (1 + ct) / 2 + t0**2) / s2
    W = -0.5 * kb * dT * wd * X * st + W2
    cond = 0.5 * kb * dT * td / s2
    corr = 0.5 * kb * dT * td**3 / s2 * a * (ct * (2 * td**2 + t0**2) - 2 * td**2 - 3 * t0**2) / s2**2
    Q1 = -cond - corr - 0.5 * kb * T1 * wd * X * st + W2 / 2
    Q2 = cond + corr + 0.5 * kb * T2 * wd * X * st + W2 / 2
    shape = st / (1 + ct + 2 * (t0 / td) ** 2) if (1 + ct + 2 * (t0 / td) ** 2) != 0 else np.inf
    wmax = 2 * td / s2 * shape
    if dT == 0:
        cop = (td / wd) / s2 * shape - 0.5
    else:
        cop = float("nan")
    wmin = wmin_p = float("nan")
    carnot = float("inf") if T2 <= T1 else T1 / (T2 - T1)
    if T1 < T2 and st != 0:
        gap = abs(dT) / T1
        lin = td / s2 + td**3 * a * (ct * (2 * td**2 + t0**2) - 2 * td**2 - 3 * t0**2) / s2**3
        wmin = gap * lin / (X * st)
        wmin_p = gap * (2 * C / dC * s2 / td**3 - (2 * td**2 + 3 * t0**2) / (td * s2))
        cop = (1 - wmin / wd) * T1 / (T2 - T1)
    pert = bool(dC / C <= 0.2 and wd * max(td, t0) <= 0.1)
    return TwoRCPrediction(
        tau_d=td,
        tau_0=t0,
        a=a,
        W=W,
        W_dissipative=W2,
        Q1=Q1,
        Q2=Q2,
        Q_conduction=-cond,
        CoP=cop,
        wd_max=wmax,
        wd_opt=wmax / 2,
        wd_min=wmin,
        wd_min_printed=wmin_p,
        carnot=carnot,
        perturbative=pert,
    )
