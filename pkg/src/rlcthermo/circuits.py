"""Ready-made circuits used by the tests, demos and command line.

All builders return :class:`~rlcthermo.netlist.CircuitSpec` objects (or
netlist text for the ``*_netlist`` helpers).
"""

from __future__ import annotations

import numpy as np

from .errors import ConditionViolation
from .netlist import CircuitSpec, DriveSpec, ElementSpec, WaveformSpec
from .topology import build_graph, find_normal_tree

__all__ = [
    "fig1_netlist",
    "diverging_loop",
    "two_rc",
    "overdamped_pair",
    "underdamped_pair",
    "series_rlc",
    "random_circuit",
]


def fig1_netlist(r4_first: bool = True) -> str:
    """Nine-element example network with every element type.

    Seven nodes; ``V1 C1 C2 R1 R2 R4`` form the normal tree when ``R4`` is
    listed before ``R3`` (ties between resistors go to the earlier line).
    """
    r3 = "R3 1 2 R=1.0 T=280.0"
    r4 = "R4 1 3 R=1.0 T=310.0"
    rs = [r4, r3] if r4_first else [r3, r4]
    lines = [
        "# nine-element network: one source of each kind, two capacitors,",
        "# four resistors at different temperatures and one inductor",
        "V1 0 2 V=1.0",
        "C1 4 3 C=1e-06",
        "C2 0 3 C=1e-06",
        "R1 5 4 R=1.0 T=300.0",
        "R2 2 6 R=1.0 T=320.0",
        *rs,
        "L1 1 5 L=0.001",
        "I1 6 5 I=0.1",
    ]
    return "\n".join(lines) + "\n"


def diverging_loop(R1=1.0, R2=1.0, C=1.0, T1=2.0, T2=1.0, L=None, Cp=None) -> CircuitSpec:
    """Capacitor in a loop with two resistors, optionally regularized.

    Without extras the two resistors close a loop once the capacitor is
    shorted, so local heat currents diverge. ``L`` adds a series inductor in
    the loop; ``Cp`` adds a capacitor in parallel with ``R2``.
    """
    els = [ElementSpec("C1", "C", "1", "0", C)]
    if L is None:
        els.append(ElementSpec("R1", "R", "1", "2", R1, T1))
    else:
        els.append(ElementSpec("L1", "L", "1", "3", L))
        els.append(ElementSpec("R1", "R", "3", "2", R1, T1))
    els.append(ElementSpec("R2", "R", "2", "0", R2, T2))
    if Cp is not None:
        els.append(ElementSpec("C2", "C", "2", "0", Cp))
    return CircuitSpec(tuple(els))


def two_rc(
    R=1.0,
    C=1.0,
    L=1.0,
    T1=1.0,
    T2=1.0,
    dC=0.0,
    wd=None,
    theta=0.0,
    R2=None,
    C2=None,
) -> CircuitSpec:
    """Two parallel RC cells joined by an inductor.

    State ordering is ``(q1, q2, phi)``. With ``dC != 0`` the capacitances are
    ``C + dC cos(wd t)`` and ``C2 + dC cos(wd t + theta)``.
    """
    R2 = R if R2 is None else R2
    C2 = C if C2 is None else C2
    d1 = d2 = None
    if dC:
        if wd is None:
            raise ValueError("a drive needs wd")
        d1 = DriveSpec(C, ((1, dC, 0.0),))
        d2 = DriveSpec(C2, ((1, dC, float(theta)),))
    els = (
        ElementSpec("C1", "C", "1", "0", C, drive=d1),
        ElementSpec("R1", "R", "1", "0", R, T1),
        ElementSpec("C2", "C", "0", "2", C2, drive=d2),
        ElementSpec("R2", "R", "0", "2", R2, T2),
        ElementSpec("L1", "L", "2", "1", L),
    )
    return CircuitSpec(els, wd if wd is not None else None)


def overdamped_pair(R1=1.0, R2=1.0, C=1.0, Cp=1.0, T1=1.0, T2=1.0) -> CircuitSpec:
    """``C`` in a loop with ``R1`` and ``R2``, ``Cp`` across ``R2``."""
    els = (
        ElementSpec("C1", "C", "1", "0", C),
        ElementSpec("R1", "R", "1", "2", R1, T1),
        ElementSpec("C2", "C", "2", "0", Cp),
        ElementSpec("R2", "R", "2", "0", R2, T2),
    )
    return CircuitSpec(els)


def underdamped_pair(R1=1.0, R2=1.0, C=1.0, Cp=1.0, L=1.0, T1=1.0, T2=1.0) -> CircuitSpec:
    """:func:`overdamped_pair` with an inductor in series in the main loop."""
    els = (
        ElementSpec("C1", "C", "1", "0", C),
        ElementSpec("L1", "L", "1", "3", L),
        ElementSpec("R1", "R", "3", "2", R1, T1),
        ElementSpec("C2", "C", "2", "0", Cp),
        ElementSpec("R2", "R", "2", "0", R2, T2),
    )
    return CircuitSpec(els)


def series_rlc(R=1.0, L=1.0, C=1.0, T=1.0, V=None) -> CircuitSpec:
    """Single loop R-L-C, optionally with a DC source in the loop."""
    els = [
        ElementSpec("C1", "C", "1", "0", C),
        ElementSpec("L1", "L", "1", "2", L),
    ]
    if V is None:
        els.append(ElementSpec("R1", "R", "2", "0", R, T))
    else:
        els.append(ElementSpec("R1", "R", "2", "3", R, T))
        els.append(ElementSpec("V1", "V", "3", "0", V, waveform=WaveformSpec(V)))
    return CircuitSpec(tuple(els))


def random_circuit(
    rng: np.random.Generator,
    n_nodes: int | None = None,
    n_extra: int | None = None,
    kinds: str = "RCL",
    sources: bool = False,
    consistent: bool | None = None,
    max_tries: int = 200,
) -> CircuitSpec:
    """Random connected circuit that admits a normal tree.

    Parameters
    ----------
    rng : numpy Generator
    n_nodes, n_extra : int, optional
        Node count and number of edges beyond a spanning tree.
    kinds : str
        Element letters to draw from.
    sources : bool
        Also sprinkle voltage and current sources.
    consistent : bool, optional
        If given, retry until the Q_RR = 0 verdict matches.
    """
    from .topology import build_matrices, check_thermo_consistency

    for _ in range(max_tries):
        n = int(n_nodes if n_nodes is not None else rng.integers(2, 7))
        extra = int(n_extra if n_extra is not None else rng.integers(0, n + 2))
        pool = list(kinds) + (["V", "I"] if sources else [])
        perm = rng.permutation(n)
        edges = []
        for k in range(1, n):
            edges.append((perm[k], perm[rng.integers(0, k)]))
        for _ in range(extra):
            a, b = rng.choice(n, size=2, replace=False)
            edges.append((a, b))
        els = []
        counts: dict = {}
        for a, b in edges:
            kind = pool[rng.integers(0, len(pool))]
            counts[kind] = counts.get(kind, 0) + 1
            name = f"{kind}{counts[kind]}"
            if rng.random() < 0.5:
                a, b = b, a
            if kind == "R":
                els.append(ElementSpec(name, "R", str(a), str(b), float(rng.uniform(0.2, 5.0)), float(rng.uniform(0.5, 3.0))))
            elif kind in ("C", "L"):
                els.append(ElementSpec(name, kind, str(a), str(b), float(rng.uniform(0.2, 5.0))))
            else:
                val = float(rng.uniform(-2.0, 2.0))
                els.append(ElementSpec(name, kind, str(a), str(b), val, waveform=WaveformSpec(val)))
        spec = CircuitSpec(tuple(els))
        try:
            g = build_graph(spec)
            t = find_normal_tree(g)
        except ConditionViolation:
            continue
        if consistent is not None:
            rep = check_thermo_consistency(g, build_matrices(g, t))
            if rep.qrr_zero != consistent:
                continue
        return spec
    raise RuntimeError("could not draw a valid random circuit")

