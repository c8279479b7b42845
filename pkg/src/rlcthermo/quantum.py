"""Heat currents with quantum (symmetrized) Johnson-Nyquist noise.

The noise of resistor ``r`` has the spectral weight ``hbar w (N_r(w) + 1/2)``
with Planck occupation ``N_r``. Heat currents are frequency integrals of
transfer functions built from ``G(w) = (i w - A H)^-1`` (undriven) or from
the Fourier blocks ``G_j(w)`` of the periodic Green's function (driven):

    i (w + j wd) G_j = delta_{j0} + A sum_k H_k G_{j-k}.

Integrands are even in ``w``; integrals over ``[-cutoff, cutoff]`` are
evaluated as twice the integral over ``[0, cutoff]`` with composite
Gauss-Legendre panels refined adaptively.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .dynamics import CovarianceSolution, stationary_mean
from .errors import ModelError, NumericalError, QuadratureError, TruncationWarning
from .floquet import FourierOperator, fourier_hamiltonian
from .statespace import StateSpaceModel, hamiltonian_at, port_to_branch, resistor_port_solve

__all__ = [
    "NoiseSpectrum",
    "GreenFunctionFourier",
    "TransferFunctionGrid",
    "thermal_weight",
    "planck_weight",
    "default_cutoff",
    "ghat_static",
    "ghat_fourier",
    "transfer_static",
    "transfer_periodic",
    "heat_static_quantum",
    "heat_periodic_quantum",
    "threshold_temperature",
    "quantum_stationary_covariance",
    "quantum_covariance_transient",
    "adaptive_frequency_grid",
]

_GL_ORDER = 16
_PANELS_PER_DECADE = 6


def _temps(T):
    return np.atleast_1d(np.asarray(T, dtype=float))


def thermal_weight(omega, T, hbar: float = 1.0, kb: float = 1.0) -> np.ndarray:
    """``hbar w (N(w) + 1/2) = (hbar |w| / 2) coth(hbar |w| / 2 kb T)``.

    Even in ``w``; equals ``kb T`` at ``w = 0`` and ``hbar |w| / 2`` at ``T = 0``.
    Broadcasts ``omega`` against ``T``.
    """
    w = np.abs(np.asarray(omega, dtype=float))
    T = np.asarray(T, dtype=float)
    half = 0.5 * hbar * w
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x = half / (kb * T)
        small = x < 1e-4
        xc = np.where(small, 1.0, x)
        core = np.where(small, 1.0 + x * x / 3.0, xc / np.tanh(xc))
        out = np.where(T > 0, kb * T * core, half)
    return out


def planck_weight(omega, T, hbar: float = 1.0, kb: float = 1.0) -> np.ndarray:
    """``hbar w N(w)`` for ``w >= 0`` (``kb T`` at ``w = 0``, zero at ``T = 0``)."""
    w = np.abs(np.asarray(omega, dtype=float))
    T = np.asarray(T, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x = hbar * w / (kb * T)
        small = x < 1e-8
        val = np.where(small, kb * T * (1.0 - 0.5 * x), hbar * w / np.expm1(np.where(small, 1.0, x)))
        out = np.where(T > 0, val, 0.0)
    return np.nan_to_num(out, nan=0.0, posinf=0.0)


@dataclass(frozen=True)
class NoiseSpectrum:
    """Per-resistor spectra ``S_r(w) = hbar w (N_r + 1/2) / (2 pi kb T_r)``."""

    temperatures: np.ndarray
    cutoff: float
    hbar: float = 1.0
    kb: float = 1.0

    def weight(self, omega) -> np.ndarray:
        """``hbar w (N_r + 1/2)``, shape ``(len(omega), N_R)``."""
        w = np.asarray(omega, dtype=float)[..., None]
        return thermal_weight(w, self.temperatures, self.hbar, self.kb)

    def __call__(self, omega) -> np.ndarray:
        T = np.asarray(self.temperatures, dtype=float)
        with np.errstate(divide="ignore"):
            return self.weight(omega) / (2 * np.pi * self.kb * T)


def _rates(model: StateSpaceModel) -> float:
    M = model.A @ hamiltonian_at(model, 0.0)
    lam = np.abs(np.linalg.eigvals(M)) if model.n else np.zeros(1)
    return float(max(lam.max(initial=0.0), 1e-300))


def default_cutoff(model: StateSpaceModel, temperatures=None, j_max: int = 0) -> float:
    """``200 x`` the largest circuit frequency scale (relaxation/oscillation
    rates, ``j_max wd`` and ``kb T / hbar``)."""
    T = model.temperatures if temperatures is None else _temps(temperatures)
    u = model.units
    scales = [_rates(model)]
    if model.drive_frequency is not None:
        scales.append(max(j_max, 1) * model.drive_frequency)
    scale = max(scales)
    therm = 40.0 * u.kb * float(np.max(T, initial=0.0)) / u.hbar
    return float(max(200.0 * scale, therm))


# --- Green's functions -----------------------------------------------------


def ghat_static(model: StateSpaceModel, omega, t: float = 0.0) -> np.ndarray:
    """``G(w) = (i w - A H)^-1``, batched over ``omega``.

    Raises
    ------
    NumericalError
        If ``i w - A H`` is singular (an undamped mode at ``w``).
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    M = model.A @ hamiltonian_at(model, t)
    mats = 1j * w[:, None, None] * np.eye(model.n) - M
    try:
        G = np.linalg.solve(mats, np.broadcast_to(np.eye(model.n, dtype=complex), mats.shape))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("undamped mode: i w - A H is singular") from exc
    if not np.all(np.isfinite(G)):
        raise NumericalError("undamped mode: i w - A H is singular")
    return G if np.ndim(omega) else G[0]


@dataclass
class GreenFunctionFourier:
    """Fourier blocks ``G_j(w)``; ``blocks[i, j + j_max]`` belongs to ``omega[i]``.

    The blocks obey ``G_j(-w) = conj(G_{-j}(w))``, which is what the reality
    ``G(t, -w) = conj(G(t, w))`` requires; :meth:`mirrored` applies it.
    """

    omega: np.ndarray
    wd: float
    j_max: int
    blocks: np.ndarray

    def block(self, j: int) -> np.ndarray:
        return self.blocks[:, j + self.j_max]

    def at_time(self, t: float) -> np.ndarray:
        """``G(t, w) = sum_j G_j(w) exp(i j wd t)`` on the grid."""
        j = np.arange(-self.j_max, self.j_max + 1)
        ph = np.exp(1j * j * self.wd * t)
        return np.einsum("j,wjab->wab", ph, self.blocks)

    def mirrored(self) -> "GreenFunctionFourier":
        """Blocks at ``-omega`` from the pairing relation."""
        return GreenFunctionFourier(-self.omega, self.wd, self.j_max, np.conj(self.blocks[:, ::-1]))


def _block_operator(model, fh: FourierOperator, omega, J):
    n = model.n
    nb = 2 * J + 1
    kh = fh.k_max
    base = np.zeros((nb * n, nb * n), dtype=complex)
    AH = np.einsum("ij,kjl->kil", model.A, fh.coeffs)
    for j in range(nb):
        for l in range(nb):
            m = j - l
            if abs(m) <= kh:
                base[j * n : (j + 1) * n, l * n : (l + 1) * n] = -AH[m + kh]
    diag = np.repeat(np.arange(-J, J + 1) * fh.wd, n)
    return base, diag


def _solve_blocks(model, fh, omega, J, chunk=64):
    n = model.n
    nb = 2 * J + 1
    base, diag = _block_operator(model, fh, omega, J)
    rhs = np.zeros((nb * n, n), dtype=complex)
    rhs[J * n : (J + 1) * n] = np.eye(n)
    out = np.empty((len(omega), nb, n, n), dtype=complex)
    idx = np.arange(nb * n)
    for i0 in range(0, len(omega), chunk):
        w = omega[i0 : i0 + chunk]
        mats = np.broadcast_to(base, (len(w),) + base.shape).copy()
        mats[:, idx, idx] += 1j * (w[:, None] + diag[None, :])
        try:
            X = np.linalg.solve(mats, np.broadcast_to(rhs, (len(w),) + rhs.shape))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular Green's function block system") from exc
        out[i0 : i0 + chunk] = X.reshape(len(w), nb, n, n)
    return out


def ghat_fourier(
    model: StateSpaceModel,
    fourier_H: FourierOperator | None = None,
    omega=None,
    j_max: int | None = None,
    perturbative: bool = False,
    check: bool = True,
    tol: float = 1e-8,
) -> GreenFunctionFourier:
    """Fourier blocks of the periodic Green's function on a frequency grid.

    Parameters
    ----------
    j_max : int, optional
        Block truncation, default ``k_max + 4``.
    perturbative : bool
        First order in ``H_k`` (``k != 0``):
        ``G_j = G0(w + j wd) A H_j G0(w)``, ``G_0 = G0(w)``.
    check : bool
        Compare with ``j_max + 2`` on a subsample of the grid and warn with
        :class:`TruncationWarning` when blocks shift by more than ``tol``.
    """
    fh = fourier_hamiltonian(model) if fourier_H is None else fourier_H
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    J = fh.k_max + 4 if j_max is None else int(j_max)
    n = model.n
    if perturbative:
        M0 = model.A @ fh[0].real
        eye = np.eye(n)

        def g0(w):
            return np.linalg.inv(1j * w[:, None, None] * eye - M0)

        G0 = g0(omega)
        blocks = np.zeros((len(omega), 2 * J + 1, n, n), dtype=complex)
        blocks[:, J] = G0
        for j in range(-J, J + 1):
            if j == 0 or abs(j) > fh.k_max:
                continue
            blocks[:, j + J] = g0(omega + j * fh.wd) @ (model.A @ fh[j]) @ G0
        return GreenFunctionFourier(omega, fh.wd, J, blocks)
    blocks = _solve_blocks(model, fh, omega, J)
    if check and len(omega):
        sub = np.unique(np.linspace(0, len(omega) - 1, min(16, len(omega))).astype(int))
        wider = _solve_blocks(model, fh, omega[sub], J + 2)[:, 2:-2]
        shift = np.abs(wider - blocks[sub]).max()
        scale = np.abs(blocks[sub]).max()
        if shift > tol * scale:
            warnings.warn(f"Green's function truncation j_max={J}: shift {shift / scale:.1e}", TruncationWarning)
    return GreenFunctionFourier(omega, fh.wd, J, blocks)


# --- adaptive quadrature ---------------------------------------------------


@dataclass
class _Quadrature:
    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    panels: np.ndarray


def adaptive_frequency_grid(
    func, cutoff: float, scale: float, tol: float = 1e-10, max_panels: int = 4000, floor=None, rel_floor: float = 0.0
):
    """Composite Gauss-Legendre grid on ``[0, cutoff]`` refined on ``func``.

    ``func`` maps a 1-d frequency array to values of shape ``(len(w), ...)``.
    Panels start logarithmically spaced from ``1e-6 scale``; a panel is split
    while its estimate differs from the sum over its halves by more than its
    share of ``tol`` times the integral (componentwise, with ``floor`` as the
    absolute scale of each component and ``rel_floor`` times the largest
    component as a common lower bound).

    Returns nodes, weights and the function values at the nodes.
    """
    x, wq = np.polynomial.legendre.leggauss(_GL_ORDER)
    lo = min(1e-6 * scale, 1e-3 * cutoff)
    decades = max(np.log10(cutoff / lo), 1.0)
    edges = np.concatenate([[0.0], np.geomspace(lo, cutoff, int(np.ceil(decades * _PANELS_PER_DECADE)) + 1)])

    def panel(a, b):
        nodes = 0.5 * (b - a) * x + 0.5 * (a + b)
        vals = func(nodes)
        wts = 0.5 * (b - a) * wq
        return nodes, wts, vals, np.tensordot(wts, vals, axes=(0, 0))

    def halves(a, b):
        m = 0.5 * (a + b)
        return panel(a, m), panel(m, b)

    pending = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
    done = []  # (a, b, nodes, weights, values, integral)
    est = {}
    for _ in range(60):
        new = []
        for a, b in pending:
            whole = est.pop((a, b), None)
            if whole is None:
                whole = panel(a, b)
            h1, h2 = halves(a, b)
            new.append((a, b, whole, h1, h2))
        total = sum(d[5] for d in done) + sum(h1[3] + h2[3] for *_, h1, h2 in new)
        ref = np.abs(total)
        if floor is not None:
            ref = np.maximum(ref, floor)
        if rel_floor:
            ref = np.maximum(ref, rel_floor * np.max(ref))
        ref = np.where(ref > 0, ref, 1e-300)
        share = tol * ref / (len(done) + len(new))
        pending = []
        for a, b, whole, h1, h2 in new:
            err = np.abs(whole[3] - (h1[3] + h2[3]))
            if np.all(err <= share) or (b - a) < 1e-13 * cutoff:
                done.append((a, b, np.concatenate([h1[0], h2[0]]), np.concatenate([h1[1], h2[1]]),
                             np.concatenate([h1[2], h2[2]]), h1[3] + h2[3]))
            else:
                m = 0.5 * (a + b)
                est[(a, m)] = h1
                est[(m, b)] = h2
                pending += [(a, m), (m, b)]
        if not pending:
            break
        if len(done) + len(pending) > max_panels:
            raise QuadratureError(f"frequency quadrature did not converge within {max_panels} panels")
    else:
        raise QuadratureError("frequency quadrature did not converge")
    done.sort(key=lambda d: d[0])
    nodes = np.concatenate([d[2] for d in done])
    wts = np.concatenate([d[3] for d in done])
    vals = np.concatenate([d[4] for d in done])
    return _Quadrature(nodes, wts, vals, np.array([[d[0], d[1]] for d in done]))


# --- transfer functions ----------------------------------------------------


@dataclass
class TransferFunctionGrid:
    """Transfer functions on nonnegative frequencies (even extension implied).

    Attributes
    ----------
    omega, weights : arrays
        Quadrature nodes on ``[0, cutoff]`` and weights (weights are ``None``
        for user-supplied grids).
    F : (len(omega), N_R, N_R) array
        ``f_{r,r'}`` (static) or its cycle average ``F_{r,r'}`` (driven).
    Fbar : (len(omega), N_R) array
        Column sums from the sum rule (zero for static circuits).
    diag_direct : array or None
        Diagonal evaluated directly from the Green's function (cross-check).
    """

    omega: np.ndarray
    F: np.ndarray
    Fbar: np.ndarray
    kind: str
    resistor_names: tuple
    cutoff: float | None = None
    weights: np.ndarray | None = None
    diag_direct: np.ndarray | None = None
    units: object = field(default=None, repr=False)
    tail: "TransferFunctionGrid | None" = field(default=None, repr=False)

    def integrand(self, temperatures) -> np.ndarray:
        """``sum_r' hbar w F_{r,r'} (N_r' + 1/2)`` at the nodes, shape
        ``(len(omega), ..., N_R)`` for temperatures of shape ``(..., N_R)``."""
        T = np.asarray(temperatures, dtype=float)
        return _heat_integrand(self.omega, self.F, self.Fbar, T, self.kind, self.units)

    def heat(self, temperatures, tail: bool = True) -> np.ndarray:
        """Fluctuation part of the heat currents (watt), ``2 int_0^cutoff``.

        With ``tail`` the integral beyond the cutoff is added from a power
        law ``g(w) ~ w^-p`` fitted at ``cutoff/4, cutoff/2, cutoff``; it is
        skipped for components without a clean power-law decay (``p <= 1.5``
        or exponents differing by more than 0.1).
        """
        if self.weights is None:
            raise ValueError("grid has no quadrature weights")
        out = 2.0 * np.tensordot(self.weights, self.integrand(temperatures), axes=(0, 0))
        if tail and self.tail is not None:
            out = out + 2.0 * _tail_integral(self.tail.omega, self.tail.integrand(temperatures))
        return out


def _tail_integral(w, g):
    # w = (c/4, c/2, c); g[i] integrand values there
    with np.errstate(divide="ignore", invalid="ignore"):
        p1 = np.log2(g[0] / g[1])
        p2 = np.log2(g[1] / g[2])
        ok = (np.sign(g[0]) == np.sign(g[2])) & (np.sign(g[1]) == np.sign(g[2])) & (g[2] != 0)
        ok &= np.isfinite(p1) & np.isfinite(p2) & (p2 > 1.5) & (np.abs(p1 - p2) < 0.1)
        val = np.where(ok, g[2] * w[2] / (p2 - 1.0), 0.0)
    return np.nan_to_num(val)


def _heat_integrand(omega, F, Fbar, T, kind, units):
    hbar, kb = units.hbar, units.kb
    w = omega.reshape((-1,) + (1,) * T.ndim)
    R = F.shape[-1]
    off = F.copy()
    idx = np.arange(R)
    off[:, idx, idx] = 0.0
    Fx = off.reshape((len(omega),) + (1,) * (T.ndim - 1) + (R, R))
    if kind == "static":
        # N differences only; the 1/2 terms cancel identically
        p = planck_weight(w, T, hbar, kb)  # (W, ..., R)
        return np.einsum("...ab,...b->...a", Fx, p) - np.einsum("...ab,...a->...a", Fx, p)
    q = thermal_weight(w, T, hbar, kb)
    Fb = Fbar.reshape((len(omega),) + (1,) * (T.ndim - 1) + (R,))
    return Fb * q + np.einsum("...ab,...b->...a", Fx, q) - np.einsum("...ba,...a->...a", Fx, q)


def _static_values(model, omega):
    G = ghat_static(model, np.atleast_1d(omega))
    H = hamiltonian_at(model, 0.0)
    Y = np.einsum("ri,wij->wrj", model.c @ H, G)  # c_r^T H G
    amp = np.einsum("wrj,sj->wrs", Y, model.c)  # c_r^T H G c_s
    f = np.abs(amp) ** 2 / np.pi
    R = model.N_R
    idx = np.arange(R)
    f[:, idx, idx] = 0.0
    f[:, idx, idx] = -f.sum(axis=1)
    direct = np.abs(amp[:, idx, idx]) ** 2 / np.pi - amp[:, idx, idx].real / np.pi
    return f, direct


def transfer_static(model: StateSpaceModel, omega=None, cutoff: float | None = None, tol: float = 1e-10) -> TransferFunctionGrid:
    """Static transfer functions ``f_{r,r'}(w) = |c_r^T H G(w) c_r'|^2 / pi``.

    The diagonal is fixed by ``f_{r,r} = -sum_{r' != r} f_{r',r}``; the direct
    diagonal ``|c_r^T H G c_r|^2 / pi - Re c_r^T H G c_r / pi`` is kept for
    comparison. Without ``omega`` an adaptive grid on ``[0, cutoff]`` is built.
    """
    if model.is_driven:
        raise ModelError("transfer_static needs an undriven circuit")
    if omega is not None:
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        f, d = _static_values(model, w)
        return TransferFunctionGrid(w, f, np.zeros(f.shape[:2]), "static", model.resistor_names, cutoff, None, d, model.units)
    cutoff = default_cutoff(model) if cutoff is None else float(cutoff)
    scale = _rates(model)

    def func(w):
        f, _ = _static_values(model, w)
        return (f * (w + scale)[:, None, None]).reshape(len(w), -1)

    q = adaptive_frequency_grid(func, cutoff, scale, tol)
    f, d = _static_values(model, q.nodes)
    tail = transfer_static(model, cutoff * np.array([0.25, 0.5, 1.0]), cutoff)
    return TransferFunctionGrid(q.nodes, f, np.zeros(f.shape[:2]), "static", model.resistor_names, cutoff, q.weights, d, model.units, tail)


def _periodic_values(model, fh, omega, J, check=True):
    gf = ghat_fourier(model, fh, omega, J, check=check)
    G = gf.blocks  # (W, nb, n, n)
    kh = fh.k_max
    nb = 2 * J + 1
    n = model.n
    Hk = fh.coeffs
    # Y_p = sum_{k + j = p} H_k G_j for p in [-(J + kh), J + kh]
    P = J + kh
    Y = np.zeros((len(omega), 2 * P + 1, n, n), dtype=complex)
    for k in range(-kh, kh + 1):
        Y[:, k - J + P : k - J + P + nb] += np.einsum("ab,wjbc->wjac", Hk[k + kh], G)
    amp = np.einsum("ri,wpij,sj->wprs", model.c, Y, model.c)  # c_r^T Y_p c_s
    F = (np.abs(amp) ** 2).sum(axis=1) / np.pi
    R = model.N_R
    idx = np.arange(R)
    direct = F[:, idx, idx] - amp[:, P, idx, idx].real / np.pi
    # sum rule: (1/2pi) sum_{j,k} i k wd c^T G_j^dag H_k G_{j-k} c
    Gc = np.einsum("wjab,sb->wjsa", G, model.c)  # G_j c_s
    Fbar = np.zeros((len(omega), R))
    for k in range(-kh, kh + 1):
        if k == 0:
            continue
        lo, hi = max(-J, -J + k), min(J, J + k)
        if lo > hi:
            continue
        a = Gc[:, lo + J : hi + 1 + J]  # G_j c, j in [lo, hi]
        b = Gc[:, lo - k + J : hi - k + 1 + J]  # G_{j-k} c
        term = np.einsum("wjsa,ab,wjsb->ws", a.conj(), Hk[k + kh], b)
        Fbar += (1j * k * fh.wd * term).real / (2 * np.pi)
    F[:, idx, idx] = 0.0
    F[:, idx, idx] = Fbar - F.sum(axis=1)
    return F, Fbar, direct


def transfer_periodic(
    model: StateSpaceModel,
    omega=None,
    fourier_H: FourierOperator | None = None,
    j_max: int | None = None,
    cutoff: float | None = None,
    tol: float = 1e-10,
) -> TransferFunctionGrid:
    """Cycle-averaged transfer functions ``F_{r,r'}(w)`` of a driven circuit.

    Off-diagonal entries are the period averages of ``|c_r^T H(t) G(t,w) c_r'|^2 / pi``
    (Parseval over the blocks ``Y_p = sum_{k+j=p} H_k G_j``); the diagonal
    follows from the sum rule ``Fbar_r'``. The direct diagonal is kept in
    ``diag_direct``.
    """
    if not model.is_driven:
        return transfer_static(model, omega, cutoff, tol)
    fh = fourier_hamiltonian(model) if fourier_H is None else fourier_H
    J = fh.k_max + 4 if j_max is None else int(j_max)
    if omega is not None:
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        F, Fb, d = _periodic_values(model, fh, w, J)
        return TransferFunctionGrid(w, F, Fb, "periodic", model.resistor_names, cutoff, None, d, model.units)
    cutoff = default_cutoff(model, j_max=J) if cutoff is None else float(cutoff)
    scale = _rates(model)

    def func(w):
        F, Fb, _ = _periodic_values(model, fh, w, J, check=False)
        g = (w + scale)[:, None]
        R = model.N_R
        off = F.reshape(len(w), -1) * g
        return np.concatenate([off, Fb * g], axis=1).reshape(len(w), R * R + R)

    # Fbar is much smaller than F; give it its own absolute floor
    probe = func(np.geomspace(1e-3 * scale, 10 * scale, 64))
    floor = np.abs(probe).max(axis=0) * 1e-4 + 1e-300
    q = adaptive_frequency_grid(func, cutoff, scale, tol, floor=floor)
    F, Fb, d = _periodic_values(model, fh, q.nodes, J)
    tw = cutoff * np.array([0.25, 0.5, 1.0])
    tail = transfer_periodic(model, tw, fh, J, cutoff)
    return TransferFunctionGrid(q.nodes, F, Fb, "periodic", model.resistor_names, cutoff, q.weights, d, model.units, tail)


# --- heat currents ---------------------------------------------------------


def _mean_term(model):
    if not model.has_sources:
        return np.zeros(model.N_R)
    x = stationary_mean(model)
    j, v = port_to_branch(model, resistor_port_solve(model, x, model.sources(0.0), 0.0))
    return j * v


def heat_static_quantum(
    model: StateSpaceModel,
    cutoff: float | None = None,
    temperatures=None,
    grid: TransferFunctionGrid | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """Landauer-Buttiker heat currents of an undriven circuit (port order).

    ``<Qdot_r> = <j_r><v_r> + 2 sum_r' int_0^cutoff hbar w f_{r,r'} (N_r' - N_r) dw``.
    ``temperatures`` may carry extra leading dimensions for sweeps.
    """
    model.require_consistent()
    if model.is_driven:
        raise ModelError("heat_static_quantum needs an undriven circuit")
    T = model.temperatures if temperatures is None else np.asarray(temperatures, dtype=float)
    if grid is None:
        cutoff = default_cutoff(model, T) if cutoff is None else float(cutoff)
        scale = _rates(model)
        u = model.units

        def func(w):
            f, _ = _static_values(model, w)
            return _heat_integrand(w, f, None, T, "static", u).reshape(len(w), -1)

        q = adaptive_frequency_grid(func, cutoff, scale, tol, floor=_static_floor(model, T, cutoff, scale))
        fluct = 2.0 * np.tensordot(q.weights, q.values, axes=(0, 0)).reshape(T.shape)
    else:
        fluct = grid.heat(T)
    return _mean_term(model) + fluct


def _static_floor(model, T, cutoff, scale):
    # absolute scale per component: classical conductance times the spread of kb T
    u = model.units
    spread = float(np.ptp(T, axis=-1).max()) if np.ndim(T) else 0.0
    base = u.kb * max(spread, 1e-300) * scale * 1e-6
    return base


def heat_periodic_quantum(
    model: StateSpaceModel,
    cutoff: float | None = None,
    temperatures=None,
    grid: TransferFunctionGrid | None = None,
    j_max: int | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """Cycle-averaged heat currents with quantum noise (port order).

    ``<Qdot_r>_c = 2 sum_r' int_0^cutoff hbar w F_{r,r'} (N_r' + 1/2) dw``
    written as ``Fbar_r q_r + sum_{r' != r} (F_{r,r'} q_r' - F_{r',r} q_r)``
    with ``q = hbar w (N + 1/2)``; the zero-point terms are kept.
    ``temperatures`` may have leading sweep dimensions; the transfer grid is
    computed once and reused.
    """
    model.require_consistent()
    if not model.is_driven:
        return heat_static_quantum(model, cutoff, temperatures, grid, tol)
    if model.has_sources:
        raise ModelError("periodic quantum heat currents are implemented for circuits without sources")
    T = model.temperatures if temperatures is None else np.asarray(temperatures, dtype=float)
    if grid is None:
        grid = transfer_periodic(model, j_max=j_max, cutoff=cutoff, tol=tol)
    return grid.heat(T)


def threshold_temperature(grid: TransferFunctionGrid, target: int = 0, T_range=(1e-3, 1e3), n_scan: int = 61, ratios=None):
    """Temperature where the cycle-averaged heat of resistor ``target`` changes sign.

    All resistors share the temperature (times ``ratios`` if given). Returns
    ``nan`` when no sign change is found on a log scan of ``T_range``.
    """
    R = len(grid.resistor_names)
    ratios = np.ones(R) if ratios is None else np.asarray(ratios, dtype=float)
    Ts = np.geomspace(*T_range, n_scan)
    q = grid.heat(Ts[:, None] * ratios)[:, target]
    s = np.sign(q)
    hits = np.nonzero(s[:-1] * s[1:] < 0)[0]
    if hits.size == 0:
        return float("nan")
    i = hits[-1]
    return float(
        optimize.brentq(lambda T: grid.heat(T * ratios)[target], Ts[i], Ts[i + 1], xtol=1e-12 * Ts[i], rtol=1e-12)
    )


# --- covariance ------------------------------------------------------------


def quantum_stationary_covariance(model: StateSpaceModel, cutoff: float | None = None, temperatures=None, tol: float = 1e-10) -> np.ndarray:
    """``sigma = (2/pi) Re sum_r int_0^cutoff hbar w (N_r + 1/2) G D_r G^dag dw``.

    Parameters
    ----------
    cutoff : float, optional
        High-frequency cutoff; flux variances of circuits without series
        capacitance grow logarithmically with it at ``T = 0``.
    """
    if model.is_driven:
        raise ModelError("quantum_stationary_covariance needs an undriven circuit")
    T = model.temperatures if temperatures is None else _temps(temperatures)
    cutoff = default_cutoff(model, T) if cutoff is None else float(cutoff)
    u = model.units
    scale = _rates(model)

    def func(w):
        G = ghat_static(model, w)
        Gc = np.einsum("wij,rj->wri", G, model.c)
        q = thermal_weight(w[:, None], T, u.hbar, u.kb)
        return np.einsum("wr,wri,wrj->wij", q, Gc, Gc.conj()).real.reshape(len(w), -1)

    q = adaptive_frequency_grid(func, cutoff, scale, tol, rel_floor=1e-6)
    n = model.n
    return (2.0 / np.pi) * np.tensordot(q.weights, q.values, axes=(0, 0)).reshape(n, n)


def quantum_covariance_transient(
    model: StateSpaceModel,
    sigma0,
    t_span,
    dt: float | None = None,
    cutoff: float | None = None,
    omega=None,
    weights=None,
    save_every: int = 1,
    temperatures=None,
) -> CovarianceSolution:
    """Covariance with quantum noise, co-integrating ``G(t, w)`` on a grid.

    ``dG/dt = 1 - (i w - A H(t)) G`` (``G(0) = 0``) is advanced with an
    exponential midpoint step; the covariance obeys

        dsigma/dt = M sigma + sigma M^T + sum_r (J_r D_r + D_r J_r^T),
        J_r(t) = (2/pi) Re int_0^cutoff hbar w (N_r + 1/2) G(t, w) dw

    with Heun steps. ``omega``/``weights`` default to the adaptive grid of
    the static covariance integral (at ``H(0)``).
    """
    T = model.temperatures if temperatures is None else _temps(temperatures)
    u = model.units
    n = model.n
    if omega is None:
        cutoff = default_cutoff(model, T) if cutoff is None else float(cutoff)
        scale = _rates(model)

        def func(w):
            G = ghat_static(model, w)
            Gc = np.einsum("wij,rj->wri", G, model.c)
            qq = thermal_weight(w[:, None], T, u.hbar, u.kb)
            return np.einsum("wr,wri,wrj->wij", qq, Gc, Gc.conj()).real.reshape(len(w), -1)

        quad = adaptive_frequency_grid(func, cutoff, scale, 1e-8, rel_floor=1e-6)
        omega, weights = quad.nodes, quad.weights
    omega = np.asarray(omega, dtype=float)
    weights = np.asarray(weights, dtype=float)
    qw = thermal_weight(omega[:, None], T, u.hbar, u.kb) * weights[:, None] * (2.0 / np.pi)  # (W, R)
    t0, t1 = map(float, t_span)
    dt = model.default_dt() if dt is None else float(dt)
    nsteps = max(1, int(np.ceil((t1 - t0) / dt - 1e-9)))
    h = (t1 - t0) / nsteps
    D = np.einsum("ri,rj->rij", model.c, model.c)
    G = np.zeros((len(omega), n, n), dtype=complex)
    eye = np.eye(n)

    def forcing(G):
        Jr = np.einsum("wr,wij->rij", qw, G).real
        out = np.einsum("rij,rjk->ik", Jr, D)
        return out + out.T

    def rhs(t, s, Q):
        M = model.A @ hamiltonian_at(model, t)
        return M @ s + s @ M.T + Q

    sigma = np.array(sigma0, dtype=float)
    times, sig_out = [t0], [sigma.copy()]
    Q = forcing(G)
    static = not model.is_driven
    if static:
        lam, V = np.linalg.eig(model.A @ hamiltonian_at(model, t0))
        Vi = np.linalg.inv(V)
    for k in range(nsteps):
        t = t0 + k * h
        if not static:
            lam, V = np.linalg.eig(model.A @ hamiltonian_at(model, t + 0.5 * h))
            Vi = np.linalg.inv(V)
        z = 1j * omega[:, None] - lam[None, :]  # (W, n)
        e = np.exp(-z * h)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(np.abs(z * h) < 1e-8, h, (1.0 - e) / z)
        G = np.einsum("ab,wb,bc,wcd->wad", V, e, Vi, G) + np.einsum("ab,wb,bc->wac", V, phi, Vi)
        Qn = forcing(G)
        k1 = rhs(t, sigma, Q)
        k2 = rhs(t + h, sigma + h * k1, Qn)
        sigma = sigma + 0.5 * h * (k1 + k2)
        sigma = 0.5 * (sigma + sigma.T)
        Q = Qn
        if not np.all(np.isfinite(sigma)):
            raise NumericalError(f"quantum covariance blew up at t = {t + h:.6g}")
        if (k + 1) % save_every == 0 or k + 1 == nsteps:
            times.append(t + h)
            sig_out.append(sigma.copy())
    times = np.array(times)
    return CovarianceSolution(times, np.zeros((len(times), n)), np.array(sig_out), "quantum")
