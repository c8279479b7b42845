"""Time evolution of means, covariances and sampled trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import check_finite, lyapunov_residual, lyapunov_vec, ordered_product, rk4_linear_steps, sym
from .errors import InstabilityError, NoStationaryState, NumericalError
from .statespace import StateSpaceModel, hamiltonian_at

__all__ = [
    "CovarianceSolution",
    "TrajectoryEnsemble",
    "StabilityReport",
    "integrate_mean",
    "integrate_covariance",
    "solve_stationary_lyapunov",
    "stationary_mean",
    "sample_langevin",
    "floquet_stability",
]

# number of RK4 steps whose stage matrices are precomputed at once
_CHUNK = 4096
_BLOWUP = 1e12
_LANGEVIN_BLOCK = 1024


@dataclass
class CovarianceSolution:
    """Sampled first and second moments.

    Attributes
    ----------
    times : (T,) array
    mean : (T, n) array
    sigma : (T, n, n) array
    kind : {"transient", "stationary", "floquet"}
    """

    times: np.ndarray
    mean: np.ndarray
    sigma: np.ndarray
    kind: str = "transient"


def _grid(t_span, dt):
    t0, t1 = map(float, t_span)
    if not dt > 0:
        raise ValueError("dt must be positive")
    nsteps = max(1, int(round((t1 - t0) / dt)))
    return t0, (t1 - t0) / nsteps, nsteps


def _drift_stages(model, t0, h, k0, k1):
    """Drift ``A H`` at start, midpoint and end of steps ``k0..k1-1``."""
    k = np.arange(k0, k1)
    if not model.is_driven:
        M = model.A @ hamiltonian_at(model, 0.0)
        return (np.broadcast_to(M, (len(k),) + M.shape),) * 3
    out = []
    for frac in (0.0, 0.5, 1.0):
        out.append(model.A @ hamiltonian_at(model, t0 + h * (k + frac)))
    return tuple(out)


def _forcing_stages(model, t0, h, k0, k1):
    k = np.arange(k0, k1)
    out = []
    for frac in (0.0, 0.5, 1.0):
        s = model.sources(t0 + h * (k + frac))
        out.append(s @ model.Bs.T if s.shape[-1] else np.zeros((len(k), model.n)))
    return tuple(out)


def _save_indices(nsteps, save_every):
    save_every = max(1, int(save_every))
    idx = list(range(0, nsteps + 1, save_every))
    if idx[-1] != nsteps:
        idx.append(nsteps)
    return idx


def integrate_mean(model: StateSpaceModel, x0, t_span, dt: float | None = None, save_every: int = 1):
    """Classical RK4 for ``d<x>/dt = A H(t) <x> + Bs s(t)``.

    Returns
    -------
    times : (T,) array
    mean : (T, n) array

    Raises
    ------
    InstabilityError
        At the first non-finite value or once the norm exceeds ``1e12``
        times its initial scale.
    """
    dt = model.default_dt() if dt is None else dt
    t0, h, nsteps = _grid(t_span, dt)
    x = np.array(x0, dtype=float).reshape(model.n)
    scale = max(1.0, np.abs(x).max(initial=0.0))
    keep = set(_save_indices(nsteps, save_every))
    times, out = [t0], [x.copy()]
    for k0 in range(0, nsteps, _CHUNK):
        k1 = min(nsteps, k0 + _CHUNK)
        M0, Mh, M1 = _drift_stages(model, t0, h, k0, k1)
        b0, bh, b1 = _forcing_stages(model, t0, h, k0, k1)
        for i in range(k1 - k0):
            k1_ = M0[i] @ x + b0[i]
            k2_ = Mh[i] @ (x + 0.5 * h * k1_) + bh[i]
            k3_ = Mh[i] @ (x + 0.5 * h * k2_) + bh[i]
            k4_ = M1[i] @ (x + h * k3_) + b1[i]
            x = x + (h / 6.0) * (k1_ + 2 * k2_ + 2 * k3_ + k4_)
            step = k0 + i + 1
            if step in keep:
                check_finite(x, t0 + step * h, "mean")
                if np.abs(x).max(initial=0.0) > _BLOWUP * scale:
                    raise InstabilityError(f"mean blows up at t = {t0 + step * h:.6g}", time=t0 + step * h)
                times.append(t0 + step * h)
                out.append(x.copy())
    return np.array(times), np.array(out)


def integrate_covariance(
    model: StateSpaceModel,
    sigma0,
    t_span,
    dt: float | None = None,
    save_every: int = 1,
    mean0=None,
    temperatures=None,
) -> CovarianceSolution:
    """RK4 on ``dsigma/dt = M sigma + sigma M^T + sum_r 2 kb T_r D_r``, ``M = A H(t)``.

    The covariance is re-symmetrized after every step. If ``mean0`` is
    given the mean is co-integrated (with sources); otherwise the stored
    mean is zero.

    Raises
    ------
    InstabilityError
        On non-finite values or when the norm grows by more than 1e12.
    """
    dt = model.default_dt() if dt is None else dt
    t0, h, nsteps = _grid(t_span, dt)
    n = model.n
    S = sym(np.array(sigma0, dtype=float).reshape(n, n))
    Q = model.noise_matrix(temperatures)
    scale = max(np.abs(S).max(initial=0.0), np.abs(Q).max(initial=0.0) * max(model.timescales(), default=1.0), 1e-300)
    track = mean0 is not None
    x = np.array(mean0, dtype=float).reshape(n) if track else np.zeros(n)
    keep = set(_save_indices(nsteps, save_every))
    times, sig, mus = [t0], [S.copy()], [x.copy()]
    for k0 in range(0, nsteps, _CHUNK):
        k1 = min(nsteps, k0 + _CHUNK)
        M0, Mh, M1 = _drift_stages(model, t0, h, k0, k1)
        if track:
            b0, bh, b1 = _forcing_stages(model, t0, h, k0, k1)
        for i in range(k1 - k0):
            a0, am, a1 = M0[i], Mh[i], M1[i]
            K1 = a0 @ S
            K1 = K1 + K1.T + Q
            Y = S + 0.5 * h * K1
            K2 = am @ Y
            K2 = K2 + K2.T + Q
            Y = S + 0.5 * h * K2
            K3 = am @ Y
            K3 = K3 + K3.T + Q
            Y = S + h * K3
            K4 = a1 @ Y
            K4 = K4 + K4.T + Q
            S = S + (h / 6.0) * (K1 + 2 * K2 + 2 * K3 + K4)
            S = 0.5 * (S + S.T)
            if track:
                q1 = a0 @ x + b0[i]
                q2 = am @ (x + 0.5 * h * q1) + bh[i]
                q3 = am @ (x + 0.5 * h * q2) + bh[i]
                q4 = a1 @ (x + h * q3) + b1[i]
                x = x + (h / 6.0) * (q1 + 2 * q2 + 2 * q3 + q4)
            step = k0 + i + 1
            if step in keep:
                t = t0 + step * h
                check_finite(S, t, "covariance")
                if np.abs(S).max(initial=0.0) > _BLOWUP * scale:
                    raise InstabilityError(f"covariance blows up at t = {t:.6g} (parametric resonance?)", time=t)
                times.append(t)
                sig.append(S.copy())
                mus.append(x.copy())
    return CovarianceSolution(np.array(times), np.array(mus), np.array(sig), "transient")


def solve_stationary_lyapunov(model: StateSpaceModel, temperatures=None, t: float = 0.0) -> np.ndarray:
    """Stationary covariance from ``M s + s M^T + sum_r 2 kb T_r D_r = 0``.

    Uses the Kronecker-sum vectorization (dense, ``O(n^6)``); fine for the
    desk-scale circuits this package targets.

    Raises
    ------
    NoStationaryState
        If ``A H`` is not Hurwitz.
    """
    M = model.A @ hamiltonian_at(model, t)
    Q = model.noise_matrix(temperatures)
    S = lyapunov_vec(M, Q)
    if model.n and np.abs(Q).max() > 0:
        res = lyapunov_residual(M, S, Q)
        if res > 1e-10:
            raise NumericalError(f"Lyapunov residual {res:.2e} exceeds tolerance")
    return S


def stationary_mean(model: StateSpaceModel, s=None, t: float = 0.0) -> np.ndarray:
    """Fixed point ``-(A H)^-1 Bs s`` for constant sources."""
    if s is None:
        s = model.sources(t)
    s = np.asarray(s, dtype=float)
    if not s.size:
        return np.zeros(model.n)
    M = model.A @ hamiltonian_at(model, t)
    try:
        return -np.linalg.solve(M, model.Bs @ s)
    except np.linalg.LinAlgError:
        raise NoStationaryState("drift matrix is singular; no stationary mean") from None


@dataclass
class TrajectoryEnsemble:
    """Euler-Maruyama sample of ``(x, Q_r)`` paths.

    Attributes
    ----------
    times : (T,) array of sample times
    paths : (n_traj, T, n) array of states
    heat : (n_traj, T, N_R) array of cumulative heats (joule)
    """

    seed: int
    n_traj: int
    dt: float
    times: np.ndarray
    paths: np.ndarray
    heat: np.ndarray
    resistor_names: tuple = field(default=())

    def mean(self, i: int = -1):
        """Ensemble mean state and its standard error at sample ``i``."""
        x = self.paths[:, i, :]
        return x.mean(axis=0), x.std(axis=0, ddof=1) / np.sqrt(self.n_traj)

    def covariance(self, i: int = -1):
        """Ensemble covariance at sample ``i`` with elementwise standard errors."""
        x = self.paths[:, i, :]
        d = x - x.mean(axis=0)
        prod = d[:, :, None] * d[:, None, :]
        cov = prod.sum(axis=0) / (self.n_traj - 1)
        se = prod.std(axis=0, ddof=1) / np.sqrt(self.n_traj)
        return cov, se

    def heat_rate(self, i0: int = 0, i1: int = -1):
        """Mean heat current per resistor over samples ``i0..i1`` with standard errors."""
        span = self.times[i1] - self.times[i0]
        rates = (self.heat[:, i1, :] - self.heat[:, i0, :]) / span
        return rates.mean(axis=0), rates.std(axis=0, ddof=1) / np.sqrt(self.n_traj)


def _psd_factor(sigma):
    # factor F with F F^T = sigma for positive semidefinite sigma
    lam, V = np.linalg.eigh(0.5 * (sigma + sigma.T))
    if lam.min(initial=0.0) < -1e-10 * max(lam.max(initial=0.0), 1e-300):
        raise ValueError("initial covariance is not positive semidefinite")
    return V * np.sqrt(np.clip(lam, 0.0, None))


def _block_rng(seed: int, block: int) -> np.random.Generator:
    # one independent stream per fixed-size block of trajectory indices
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block),))))


def sample_langevin(
    model: StateSpaceModel,
    x0,
    t_span,
    dt: float,
    n_traj: int,
    seed: int,
    n_samples: int = 101,
    sigma0=None,
) -> TrajectoryEnsemble:
    """Euler-Maruyama integration of the Ito system for ``(x, Q_r)``.

    ``dx = (A H x + Bs s) dt + sum_r sqrt(2 kb T_r) c_r dW_r`` and
    ``dQ_r = (y_r^2 - kb T_r c_r^T H c_r) dt - sqrt(2 kb T_r) y_r dW_r`` with
    ``y_r = sqrt(R_rr) [alpha (Msd s + Md H x)]_r`` (equal to ``x^T H c_r``
    without sources). The same Wiener increment drives both updates.

    Parameters
    ----------
    x0 : array
        Initial mean state.
    sigma0 : array, optional
        If given, initial states are drawn from ``N(x0, sigma0)``.
    n_samples : int
        Number of stored, evenly spaced sample times.

    Notes
    -----
    Trajectories are processed in blocks of 1024 consecutive indices, each
    with its own stream seeded from ``(seed, block index)``; results do not
    depend on execution order.
    """
    model.require_consistent()
    t0, h, nsteps = _grid(t_span, dt)
    n, nr = model.n, model.N_R
    kb = model.units.kb
    T = model.temperatures
    amp = np.sqrt(2.0 * kb * T) * np.sqrt(h)
    sqrtR = np.sqrt(np.diag(model.Rmat))
    sample_steps = np.unique(np.linspace(0, nsteps, max(2, n_samples)).round().astype(int))
    times = t0 + h * sample_steps
    paths = np.zeros((n_traj, len(sample_steps), n))
    heat = np.zeros((n_traj, len(sample_steps), nr))
    driven = model.is_driven
    sourced = model.has_sources
    H_static = hamiltonian_at(model, 0.0)
    L0 = _psd_factor(sigma0) if sigma0 is not None else None
    alphaMd = model.alpha @ model.Md
    alphaMsd = model.alpha @ model.Msd
    for block, start in enumerate(range(0, n_traj, _LANGEVIN_BLOCK)):
        stop = min(n_traj, start + _LANGEVIN_BLOCK)
        m = stop - start
        rng = _block_rng(seed, block)
        x = np.broadcast_to(np.asarray(x0, float), (m, n)).copy()
        if L0 is not None:
            x += rng.standard_normal((m, n)) @ L0.T
        Q = np.zeros((m, nr))
        si = 0
        if sample_steps[0] == 0:
            paths[start:stop, 0] = x
            si = 1
        H = H_static
        for k in range(nsteps):
            t = t0 + k * h
            if driven:
                H = hamiltonian_at(model, t)
            grad = x @ H  # H symmetric
            y = grad @ alphaMd.T
            drift = grad @ model.A.T
            if sourced:
                s = model.sources(t)
                y = y + s @ alphaMsd.T
                drift = drift + s @ model.Bs.T
            y = y * sqrtR
            dW = rng.standard_normal((m, nr))
            corr = np.einsum("ri,ij,rj->r", model.c, H, model.c)
            Q += (y * y - kb * T * corr) * h - amp * y * dW
            x = x + drift * h + (amp * dW) @ model.c
            if si < len(sample_steps) and k + 1 == sample_steps[si]:
                if not np.all(np.isfinite(x)):
                    raise InstabilityError(f"trajectory blew up at t = {t + h:.6g}", time=t + h)
                paths[start:stop, si] = x
                heat[start:stop, si] = Q
                si += 1
    return TrajectoryEnsemble(int(seed), int(n_traj), h, times, paths, heat, model.resistor_names)


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    multipliers: np.ndarray
    monodromy: np.ndarray


def monodromy(model: StateSpaceModel, wd: float | None = None, steps: int | None = None) -> np.ndarray:
    """One-period propagator of ``y' = A H(t) y`` via batched RK4 steps."""
    wd = model.drive_frequency if wd is None else wd
    if wd is None:
        raise ValueError("a drive frequency is required")
    period = 2 * np.pi / wd
    if steps is None:
        scales = list(model.timescales()) + [period]
        steps = max(512, int(np.ceil(period / (min(scales) / 200.0))))
    h = period / steps
    P = np.eye(model.n)
    for k0 in range(0, steps, 65536):
        k1 = min(steps, k0 + 65536)
        k = np.arange(k0, k1)
        if model.is_driven:
            M = [model.A @ hamiltonian_at(model, h * (k + f)) for f in (0.0, 0.5, 1.0)]
        else:
            M = [np.broadcast_to(model.A @ hamiltonian_at(model, 0.0), (len(k), model.n, model.n))] * 3
        P = ordered_product(rk4_linear_steps(M[0], M[1], M[2], h)) @ P
    return P


def floquet_stability(model: StateSpaceModel, wd: float | None = None, steps: int | None = None) -> StabilityReport:
    """Floquet multipliers of the drift over one drive period.

    Stable iff every multiplier has modulus below ``1 - 1e-9``.
    """
    P = monodromy(model, wd, steps)
    mult = np.linalg.eigvals(P) if model.n else np.array([])
    stable = bool(np.all(np.abs(mult) < 1 - 1e-9))
    return StabilityReport(stable, mult, P)
