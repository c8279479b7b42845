"""Linear state-space model of an RLC network.

The state is ``x = (q, phi)``: capacitor charges followed by inductor fluxes,
both in normal-tree order. The energy is ``E = x^T H x / 2`` with
``H = diag(Cmat, Lmat)^-1`` and the drift reads

    dx/dt = A H x + Bs s + sum_r sqrt(2 kb T_r) c_r xi_r

where ``A = Mc - Md^T alpha Md`` and ``Bs = Ms - Md^T alpha Msd``. Each
resistor ``r`` injects noise along the single vector ``c_r`` so that
``D_r = c_r c_r^T`` and ``sum_r D_r = -sym(A)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .errors import InconsistentTopologyError, ModelError, RLCError
from .netlist import CircuitSpec
from .topology import (
    CircuitGraph,
    LoopCutsetMatrices,
    NormalTreeDecomposition,
    ThermoConsistencyReport,
    analyze,
)
from .units import SI, Units

__all__ = ["StateSpaceModel", "assemble", "build_model", "hamiltonian_at", "energy", "resistor_port_solve"]

_TOL = 1e-12


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Immutable container for every matrix of the linear dynamics.

    Resistors are indexed in port order: link resistors first, then twig
    resistors, matching ``(j_Rl, v_Rt)``. ``resistor_names``,
    ``temperatures`` and ``resistances`` follow that order. Sources follow
    ``s = (v_E, j_I)``.
    """

    spec: CircuitSpec
    graph: CircuitGraph
    tree: NormalTreeDecomposition
    matrices: LoopCutsetMatrices
    consistency: ThermoConsistencyReport
    units: Units
    capacitor_names: tuple
    inductor_names: tuple
    resistor_names: tuple
    source_names: tuple
    n_rl: int
    resistances: np.ndarray
    temperatures: np.ndarray
    Rmat: np.ndarray  # diag(R_l, 1/R_t)
    alpha: np.ndarray
    Mc: np.ndarray
    Ms: np.ndarray
    Md: np.ndarray
    Msd: np.ndarray
    A: np.ndarray
    Bs: np.ndarray
    c: np.ndarray  # (N_R, n) noise vectors c_r
    L0: np.ndarray  # static inductance matrix with couplings
    drive_frequency: float | None
    _cap_drives: tuple = field(repr=False)
    _ind_drives: tuple = field(repr=False)
    _waveforms: tuple = field(repr=False)

    # sizes
    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def N_C(self) -> int:
        return len(self.capacitor_names)

    @property
    def N_L(self) -> int:
        return len(self.inductor_names)

    @property
    def N_R(self) -> int:
        return len(self.resistor_names)

    @property
    def N_E(self) -> int:
        return self.tree.count("twig", "E")

    @property
    def N_I(self) -> int:
        return self.tree.count("link", "I")

    @property
    def state_names(self) -> tuple:
        return tuple(f"q_{n}" for n in self.capacitor_names) + tuple(f"phi_{n}" for n in self.inductor_names)

    @property
    def D(self) -> np.ndarray:
        """Per-resistor diffusion matrices ``D_r = c_r c_r^T``, shape (N_R, n, n)."""
        return np.einsum("ri,rj->rij", self.c, self.c)

    @property
    def C_noise(self) -> np.ndarray:
        """Matrices ``C_r = Md^T alpha R^{1/2} Pi_r`` stacked as (N_R, n, N_R)."""
        out = np.zeros((self.N_R, self.n, self.N_R))
        for r in range(self.N_R):
            out[r, :, r] = self.c[r]
        return out

    def noise_matrix(self, temperatures=None) -> np.ndarray:
        """``sum_r 2 kb T_r D_r``."""
        T = self.temperatures if temperatures is None else np.asarray(temperatures, float)
        return 2.0 * self.units.kb * np.einsum("r,ri,rj->ij", T, self.c, self.c)

    @property
    def is_driven(self) -> bool:
        return any(d is not None for d in self._cap_drives + self._ind_drives)

    @property
    def has_sources(self) -> bool:
        return len(self.source_names) > 0

    @property
    def thermo_consistent(self) -> bool:
        return self.consistency.qrr_zero

    def require_consistent(self) -> None:
        if not self.consistency.qrr_zero:
            raise InconsistentTopologyError(
                "local heat currents are ill defined for this circuit: " + self.consistency.message()
            )

    def timescales(self) -> np.ndarray:
        """Characteristic times ``1/|lambda|`` of the static drift ``A H0``."""
        lam = np.linalg.eigvals(self.A @ hamiltonian_at(self, 0.0, static=True)) if self.n else np.array([])
        lam = lam[np.abs(lam) > 0]
        return 1.0 / np.abs(lam)

    def default_dt(self) -> float:
        """``min(time scales, drive period) / 200``."""
        scales = list(self.timescales())
        if self.drive_frequency is not None and (self.is_driven or self.has_sources):
            scales.append(2 * np.pi / self.drive_frequency)
        if not scales:
            return 1e-3
        return min(scales) / 200.0

    # matrix-valued functions of time
    def capacitances(self, t):
        t = np.asarray(t, dtype=float)
        vals = []
        for name, d in zip(self.capacitor_names, self._cap_drives):
            if d is None:
                vals.append(np.full(t.shape, self.spec.element(name).value))
            else:
                vals.append(d.value(t, self.drive_frequency))
        return np.stack(vals, axis=-1) if vals else np.zeros(t.shape + (0,))

    def sources(self, t):
        """Source vector ``s(t) = (v_E, j_I)``."""
        t = np.asarray(t, dtype=float)
        vals = [w.value(t, self.drive_frequency) for w in self._waveforms]
        return np.stack(vals, axis=-1) if vals else np.zeros(t.shape + (0,))


def assemble(
    spec: CircuitSpec,
    graph: CircuitGraph,
    tree: NormalTreeDecomposition,
    m: LoopCutsetMatrices,
    report: ThermoConsistencyReport,
    units: Units = SI,
) -> StateSpaceModel:
    """Build a :class:`StateSpaceModel` from the topology and element values."""
    edges = graph.edges
    el = [spec.elements[edges[i].element_index] for i in tree.order]
    twig_cls, link_cls = tree.twig_classes, tree.link_classes
    bt = len(twig_cls)
    twig_els = el[:bt]
    link_els = el[bt:]
    caps = [e for e, c in zip(twig_els, twig_cls) if c == "C"]
    rts = [e for e, c in zip(twig_els, twig_cls) if c == "R"]
    vs = [e for e, c in zip(twig_els, twig_cls) if c == "E"]
    rls = [e for e, c in zip(link_els, link_cls) if c == "R"]
    inds = [e for e, c in zip(link_els, link_cls) if c == "L"]
    cur = [e for e, c in zip(link_els, link_cls) if c == "I"]
    nC, nL, nRl, nRt = len(caps), len(inds), len(rls), len(rts)

    Q = {k: v.astype(float) for k, v in m.blocks.items()}
    Mc = np.block([[np.zeros((nC, nC)), -Q["CL"]], [Q["CL"].T, np.zeros((nL, nL))]])
    Ms = np.block(
        [
            [np.zeros((nC, len(vs))), -Q["CI"]],
            [Q["EL"].T, np.zeros((nL, len(cur)))],
        ]
    )
    Md = np.block([[-Q["CR"].T, np.zeros((nRl, nL))], [np.zeros((nRt, nC)), Q["RL"]]])
    Msd = np.block([[-Q["ER"].T, np.zeros((nRl, len(cur)))], [np.zeros((nRt, len(vs))), Q["RI"]]])

    r_l = np.array([e.value for e in rls])
    r_t = np.array([e.value for e in rts])
    Rmat = np.diag(np.concatenate([r_l, 1.0 / r_t]))
    if report.qrr_zero:
        alpha = np.diag(1.0 / np.diag(Rmat)) if Rmat.size else np.zeros((0, 0))
    else:
        alpha_inv = np.block([[np.diag(r_l), -Q["RR"].T], [Q["RR"], np.diag(1.0 / r_t)]])
        lu = sla.lu_factor(alpha_inv)
        alpha = sla.lu_solve(lu, np.eye(nRl + nRt))
    A = _project_blocks(Mc - Md.T @ alpha @ Md, nC)
    Bs = Ms - Md.T @ alpha @ Msd
    sqrtR = np.sqrt(np.diag(Rmat))
    c = (Md.T @ alpha * sqrtR[None, :]).T  # row r: Md^T alpha e_r sqrt(R_rr)

    # inductance matrix including mutual couplings
    ind_index = {e.name: k for k, e in enumerate(inds)}
    L0 = np.diag([e.value for e in inds]) if nL else np.zeros((0, 0))
    for k_el in spec.couplings():
        i, j = ind_index[k_el.node_a], ind_index[k_el.node_b]
        L0[i, j] += k_el.value
        L0[j, i] += k_el.value
    if nL and np.linalg.eigvalsh(L0).min() <= 0:
        raise ModelError("inductance matrix is not positive definite")

    model = StateSpaceModel(
        spec=spec,
        graph=graph,
        tree=tree,
        matrices=m,
        consistency=report,
        units=units,
        capacitor_names=tuple(e.name for e in caps),
        inductor_names=tuple(e.name for e in inds),
        resistor_names=tuple(e.name for e in rls + rts),
        source_names=tuple(e.name for e in vs + cur),
        n_rl=nRl,
        resistances=np.concatenate([r_l, r_t]),
        temperatures=np.array([e.temperature for e in rls + rts], dtype=float),
        Rmat=Rmat,
        alpha=alpha,
        Mc=Mc,
        Ms=Ms,
        Md=Md,
        Msd=Msd,
        A=A,
        Bs=Bs,
        c=c,
        L0=L0,
        drive_frequency=spec.drive_frequency,
        _cap_drives=tuple(e.drive if e.is_driven else None for e in caps),
        _ind_drives=tuple(e.drive if e.is_driven else None for e in inds),
        _waveforms=tuple(e.waveform for e in vs + cur),
    )
    _verify(model)
    return model


def _project_blocks(A, nC):
    """Impose the exact block structure ``[[s1, a], [-a^T, s2]]``.

    The structure holds analytically; when ``alpha`` comes from an LU solve
    the raw product carries round-off of order 1e-16 that is removed here
    after checking it is no larger than that.
    """
    scale = max(1.0, np.abs(A).max(initial=0.0))
    a = 0.5 * (A[:nC, nC:] - A[nC:, :nC].T)
    dev = max(
        np.abs(A[:nC, nC:] - a).max(initial=0.0),
        np.abs(_sym(A[:nC, :nC]) - A[:nC, :nC]).max(initial=0.0),
        np.abs(_sym(A[nC:, nC:]) - A[nC:, nC:]).max(initial=0.0),
    )
    if dev > _TOL * scale:
        raise RLCError("internal error: drift matrix lacks the symmetric/antisymmetric block form")
    out = A.copy()
    out[:nC, :nC] = _sym(A[:nC, :nC])
    out[nC:, nC:] = _sym(A[nC:, nC:])
    out[:nC, nC:] = a
    out[nC:, :nC] = -a.T
    return out


def _verify(model: StateSpaceModel) -> None:
    A = model.A
    scale = max(1.0, np.abs(A).max(initial=0.0))
    fd = model.D.sum(axis=0) + _sym(A) if model.N_R else _sym(A)
    if np.abs(fd).max(initial=0.0) > _TOL * scale:
        raise RLCError("internal error: fluctuation-dissipation identity violated")
    alpha, R = model.alpha, model.Rmat
    if alpha.size:
        sym_part = _sym(alpha)
        ascale = max(1.0, np.abs(alpha).max())
        if np.abs(alpha @ R @ alpha.T - sym_part).max() > _TOL * ascale * max(1.0, np.abs(R).max()) ** 1:
            raise RLCError("internal error: alpha R alpha^T differs from sym(alpha)")
    nC = model.N_C
    if np.abs(_sym(A[:nC, :nC]) - A[:nC, :nC]).max(initial=0.0) > _TOL * scale:
        raise RLCError("internal error: capacitor block of A not symmetric")
    if np.abs(A[nC:, :nC] + A[:nC, nC:].T).max(initial=0.0) > _TOL * scale:
        raise RLCError("internal error: off-diagonal blocks of A not antisymmetric")


def build_model(spec: CircuitSpec, units: Units = SI) -> StateSpaceModel:
    """Parse-to-model pipeline: topology analysis followed by :func:`assemble`."""
    g, t, m, rep = analyze(spec)
    return assemble(spec, g, t, m, rep, units)


def inverse_hamiltonian_at(model: StateSpaceModel, t, static: bool = False):
    """``diag(Cmat(t), Lmat(t))`` for scalar or array ``t``."""
    t = np.asarray(t, dtype=float)
    n, nC = model.n, model.N_C
    out = np.zeros(t.shape + (n, n))
    for i, (name, d) in enumerate(zip(model.capacitor_names, model._cap_drives)):
        base = model.spec.element(name).value
        out[..., i, i] = base if (d is None or static) else d.value(t, model.drive_frequency)
    out[..., nC:, nC:] = model.L0
    for i, d in enumerate(model._ind_drives):
        if d is not None and not static:
            out[..., nC + i, nC + i] = d.value(t, model.drive_frequency) + 0.0 * t
    return out


def inverse_hamiltonian_rate(model: StateSpaceModel, t):
    """Time derivative of ``diag(Cmat(t), Lmat(t))``."""
    t = np.asarray(t, dtype=float)
    n, nC = model.n, model.N_C
    out = np.zeros(t.shape + (n, n))
    for i, d in enumerate(model._cap_drives):
        if d is not None:
            out[..., i, i] = d.derivative(t, model.drive_frequency)
    for i, d in enumerate(model._ind_drives):
        if d is not None:
            out[..., nC + i, nC + i] = d.derivative(t, model.drive_frequency)
    return out


def hamiltonian_at(model: StateSpaceModel, t, static: bool = False):
    """Energy matrix ``H(t) = diag(Cmat(t), Lmat(t))^-1``.

    Parameters
    ----------
    t : float or array
        Time(s); an array gives a stacked result of shape ``t.shape + (n, n)``.
    static : bool
        Ignore drives and return the base-value matrix.

    Raises
    ------
    ModelError
        If a drive makes a capacitance or the inductance matrix nonpositive.
    """
    inv = inverse_hamiltonian_at(model, t, static)
    if model.n == 0:
        return inv
    nC = model.N_C
    caps = np.diagonal(inv[..., :nC, :nC], axis1=-2, axis2=-1)
    if np.any(caps <= 0):
        raise ModelError("drive makes a capacitance nonpositive")
    out = np.zeros_like(inv)
    idx = np.arange(nC)
    out[..., idx, idx] = 1.0 / caps
    if model.N_L:
        lblock = inv[..., nC:, nC:]
        try:
            np.linalg.cholesky(lblock)
        except np.linalg.LinAlgError:
            raise ModelError("inductance matrix not positive definite") from None
        out[..., nC:, nC:] = np.linalg.inv(lblock)
    return out


def hamiltonian_rate(model: StateSpaceModel, t):
    """``dH/dt = -H d(H^-1)/dt H`` evaluated analytically from the drives."""
    H = hamiltonian_at(model, t)
    return -H @ inverse_hamiltonian_rate(model, t) @ H


def energy(model: StateSpaceModel, x, t: float = 0.0) -> float:
    """Stored energy ``x^T H(t) x / 2``."""
    x = np.asarray(x, dtype=float)
    H = hamiltonian_at(model, t)
    return 0.5 * float(x @ H @ x)


def resistor_port_solve(model: StateSpaceModel, x, s=None, t: float = 0.0) -> np.ndarray:
    """Deterministic resistor port vector ``(j_Rl, v_Rt)``.

    Solves ``alpha^-1 p = -Msd s - Md H x``. ``x`` may carry leading batch
    dimensions.
    """
    x = np.asarray(x, dtype=float)
    H = hamiltonian_at(model, t)
    rhs = -(x @ H.T) @ model.Md.T
    if s is None:
        s = model.sources(t)
    s = np.asarray(s, dtype=float)
    if s.size:
        rhs = rhs - s @ model.Msd.T
    return rhs @ model.alpha.T


def port_to_branch(model: StateSpaceModel, p) -> tuple[np.ndarray, np.ndarray]:
    """Convert port vectors to per-resistor currents and voltages."""
    p = np.asarray(p, dtype=float)
    nl = model.n_rl
    R = model.resistances
    j = np.concatenate([p[..., :nl], p[..., nl:] / R[nl:]], axis=-1)
    v = np.concatenate([p[..., :nl] * R[:nl], p[..., nl:]], axis=-1)
    return j, v


def source_port_values(model: StateSpaceModel, x, s=None, t: float = 0.0):
    """Currents through voltage sources and voltages across current sources.

    Returns ``(j_E, v_I)`` from Kirchhoff's laws on a deterministic state.
    """
    x = np.asarray(x, dtype=float)
    if s is None:
        s = model.sources(t)
    s = np.asarray(s, dtype=float)
    H = hamiltonian_at(model, t)
    grad = H @ x
    nC = model.N_C
    v_C, j_L = grad[:nC], grad[nC:]
    p = resistor_port_solve(model, x, s, t)
    nl = model.n_rl
    j_Rl, v_Rt = p[:nl], p[nl:]
    nE = model.N_E
    v_E, j_I = s[:nE], s[nE:]
    Q = model.matrices.blocks
    j_E = -(Q["ER"] @ j_Rl + Q["EL"] @ j_L + Q["EI"] @ j_I)
    v_I = Q["EI"].T @ v_E + Q["CI"].T @ v_C + Q["RI"].T @ v_Rt
    return j_E, v_I
