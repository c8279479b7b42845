"""Textual circuit format.

One element per line::

    # comment
    .drive wd=0.0628
    C1 1 0 C=1.0 A1=0.5 P1=0.0
    R1 1 0 R=1.0 T=2.0
    L1 2 1 L=1.0
    K K1 L1 L2 M=0.1
    V1 3 0 V=1.0 A1=0.2 P1=1.57

Values are plain SI decimals. Edges are oriented ``node_a -> node_b``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraphError, NetlistError

__all__ = [
    "DriveSpec",
    "WaveformSpec",
    "ElementSpec",
    "CircuitSpec",
    "parse_netlist",
    "serialize_netlist",
]

ELEMENT_KINDS = ("R", "C", "L", "V", "I")
_HARMONIC_KEY = re.compile(r"^([AP])([1-9][0-9]*)$")
_TOKEN = re.compile(r"\S+")
# grid used to certify positivity of a periodic drive over one period
_POSITIVITY_GRID = 4096


def _harmonic_sum(harmonics, phase_arg, derivative=False):
    out = np.zeros_like(phase_arg, dtype=float)
    for k, amp, ph in harmonics:
        if derivative:
            out = out - k * amp * np.sin(k * phase_arg + ph)
        else:
            out = out + amp * np.cos(k * phase_arg + ph)
    return out


@dataclass(frozen=True)
class DriveSpec:
    """Periodic modulation ``base + sum_k A_k cos(k wd t + P_k)``.

    Parameters
    ----------
    base : float
        Static value (farad or henry).
    harmonics : tuple of (int, float, float)
        ``(k, amplitude, phase)`` triples with ``k >= 1``, sorted by ``k``.
    """

    base: float
    harmonics: tuple = ()

    def value(self, t, wd: float):
        t = np.asarray(t, dtype=float)
        return self.base + _harmonic_sum(self.harmonics, wd * t)

    def derivative(self, t, wd: float):
        t = np.asarray(t, dtype=float)
        return wd * _harmonic_sum(self.harmonics, wd * t, derivative=True)

    def minimum(self) -> float:
        """Smallest value over one period, sampled on a fine grid."""
        u = np.linspace(0.0, 2 * np.pi, _POSITIVITY_GRID, endpoint=False)
        return float(np.min(self.base + _harmonic_sum(self.harmonics, u)))

    @property
    def is_static(self) -> bool:
        return all(a == 0.0 for _, a, _ in self.harmonics)


@dataclass(frozen=True)
class WaveformSpec:
    """Source waveform ``dc + sum_k A_k cos(k wd t + P_k)`` (volt or ampere)."""

    dc: float
    harmonics: tuple = ()

    def value(self, t, wd: float | None):
        t = np.asarray(t, dtype=float)
        if not self.harmonics:
            return self.dc + np.zeros_like(t)
        return self.dc + _harmonic_sum(self.harmonics, wd * t)


@dataclass(frozen=True)
class ElementSpec:
    """One netlist line.

    For ``kind == "K"`` the two node fields hold the names of the coupled
    inductors and ``value`` is the mutual inductance in henry.
    """

    name: str
    kind: str
    node_a: str
    node_b: str
    value: float
    temperature: float | None = None
    drive: DriveSpec | None = None
    waveform: WaveformSpec | None = None

    @property
    def is_driven(self) -> bool:
        return self.drive is not None and bool(self.drive.harmonics)


@dataclass(frozen=True)
class CircuitSpec:
    """Validated circuit: elements in file order plus the drive frequency."""

    elements: tuple
    drive_frequency: float | None = None
    nodes: tuple = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        if not elements:
            raise NetlistError("circuit has no elements")
        _validate_elements(elements, self.drive_frequency)
        nodes = []
        seen = set()
        for el in elements:
            if el.kind == "K":
                continue
            for nd in (el.node_a, el.node_b):
                if nd not in seen:
                    seen.add(nd)
                    nodes.append(nd)
        object.__setattr__(self, "nodes", tuple(nodes))

    # convenience views
    def branches(self):
        """Two-terminal elements (everything but K lines) in file order."""
        return [el for el in self.elements if el.kind != "K"]

    def couplings(self):
        return [el for el in self.elements if el.kind == "K"]

    def element(self, name: str) -> ElementSpec:
        for el in self.elements:
            if el.name == name:
                return el
        raise KeyError(name)

    @property
    def is_driven(self) -> bool:
        return any(el.is_driven for el in self.elements) or any(
            el.waveform is not None and el.waveform.harmonics for el in self.elements
        )

    def check_connected(self) -> None:
        """Raise :class:`DisconnectedGraphError` if the graph splits."""
        parent = {nd: nd for nd in self.nodes}

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for el in self.branches():
            parent[find(el.node_a)] = find(el.node_b)
        roots = {find(nd) for nd in self.nodes}
        if len(roots) > 1:
            groups: dict = {}
            for nd in self.nodes:
                groups.setdefault(find(nd), []).append(nd)
            desc = "; ".join("{" + ", ".join(g) + "}" for g in groups.values())
            raise DisconnectedGraphError(f"circuit graph is disconnected: components {desc}")


def _validate_elements(elements, wd):
    names = set()
    inductors = {}
    for el in elements:
        if el.name in names:
            raise NetlistError(f"duplicate element name {el.name!r}")
        names.add(el.name)
        if el.kind not in ELEMENT_KINDS + ("K",):
            raise NetlistError(f"unknown element kind {el.kind!r} for {el.name}")
        if el.kind != "K" and el.node_a == el.node_b:
            raise NetlistError(f"{el.name}: both terminals on node {el.node_a!r}")
        if not math.isfinite(el.value):
            raise NetlistError(f"{el.name}: value must be finite")
        if el.kind in ("R", "C", "L") and el.value <= 0:
            raise NetlistError(f"{el.name}: value must be positive, got {el.value!r}")
        if el.kind == "R":
            if el.temperature is None:
                raise NetlistError(f"{el.name}: resistor needs a temperature T=")
            if not el.temperature > 0:
                raise NetlistError(f"{el.name}: temperature must be positive")
        elif el.temperature is not None:
            raise NetlistError(f"{el.name}: temperature only valid on R")
        if el.drive is not None:
            if el.kind not in ("C", "L"):
                raise NetlistError(f"{el.name}: drive only valid on C or L")
            if el.drive.base != el.value:
                raise NetlistError(f"{el.name}: drive base differs from element value")
            if el.drive.minimum() <= 0:
                raise NetlistError(f"{el.name}: drive makes the value nonpositive")
        if el.waveform is not None and el.kind not in ("V", "I"):
            raise NetlistError(f"{el.name}: waveform only valid on V or I")
        if el.kind == "L":
            inductors[el.name] = el
    for el in elements:
        if el.kind == "K":
            for ref in (el.node_a, el.node_b):
                if ref not in inductors:
                    raise NetlistError(f"{el.name}: unknown inductor {ref!r}")
            if el.node_a == el.node_b:
                raise NetlistError(f"{el.name}: an inductor cannot couple to itself")
    harmonic = any(el.is_driven for el in elements) or any(
        el.waveform is not None and el.waveform.harmonics for el in elements
    )
    if harmonic and wd is None:
        raise NetlistError("harmonics present but no '.drive wd=' directive")
    if wd is not None and not (math.isfinite(wd) and wd > 0):
        raise NetlistError("drive frequency must be positive")
    _check_inductance_pd(elements, inductors)


def _check_inductance_pd(elements, inductors):
    names = list(inductors)
    if not names:
        return
    idx = {nm: i for i, nm in enumerate(names)}
    couplings = [el for el in elements if el.kind == "K"]
    if not couplings:
        return
    lmat = np.diag([inductors[nm].value for nm in names])
    for el in couplings:
        i, j = idx[el.node_a], idx[el.node_b]
        lmat[i, j] += el.value
        lmat[j, i] += el.value
    if np.linalg.eigvalsh(lmat).min() <= 0:
        raise NetlistError("mutual couplings make the inductance matrix indefinite")
    # driven self-inductances must keep the matrix definite along the cycle
    driven = [inductors[nm] for nm in names if inductors[nm].is_driven]
    if driven:
        u = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
        for ui in u:
            lt = lmat.copy()
            for el in driven:
                k = idx[el.name]
                lt[k, k] = el.drive.base + float(_harmonic_sum(el.drive.harmonics, np.array(ui)))
            if np.linalg.eigvalsh(lt).min() <= 0:
                raise NetlistError("driven inductance matrix loses definiteness")


def _parse_float(tok: str, lineno: int, col: int) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise NetlistError(f"cannot parse number {tok!r}", lineno, col) from None
    if not math.isfinite(val):
        raise NetlistError(f"non-finite number {tok!r}", lineno, col)
    return val


def _split_attrs(tokens, lineno):
    attrs = {}
    cols = {}
    for col, tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or not key or not val:
            raise NetlistError(f"expected key=value, got {tok!r}", lineno, col)
        if key in attrs:
            raise NetlistError(f"repeated attribute {key!r}", lineno, col)
        attrs[key] = val
        cols[key] = col
    return attrs, cols


def _harmonics(attrs, cols, lineno, name):
    amps, phases = {}, {}
    for key in list(attrs):
        m = _HARMONIC_KEY.match(key)
        if not m:
            continue
        k = int(m.group(2))
        val = _parse_float(attrs.pop(key), lineno, cols[key] + len(key) + 1)
        (amps if m.group(1) == "A" else phases)[k] = val
    for k in phases:
        if k not in amps:
            raise NetlistError(f"{name}: phase P{k} without amplitude A{k}", lineno, cols[f"P{k}"])
    return tuple((k, amps[k], phases.get(k, 0.0)) for k in sorted(amps))


def _parse_element(tokens, lineno):
    (c0, name), rest = tokens[0], tokens[1:]
    kind = name[0].upper()
    if kind not in ELEMENT_KINDS:
        raise NetlistError(f"unknown element type {name[0]!r}", lineno, c0)
    if len(rest) < 2:
        raise NetlistError(f"{name}: expected two nodes", lineno, c0)
    (ca, node_a), (cb, node_b) = rest[0], rest[1]
    for col, nd in ((ca, node_a), (cb, node_b)):
        if "=" in nd:
            raise NetlistError(f"{name}: expected a node name, got {nd!r}", lineno, col)
    if node_a == node_b:
        raise NetlistError(f"{name}: both terminals on node {node_a!r}", lineno, cb)
    attrs, cols = _split_attrs(rest[2:], lineno)
    end_col = tokens[-1][0]
    harmonics = _harmonics(attrs, cols, lineno, name)

    def take(key, required=True):
        if key not in attrs:
            if required:
                raise NetlistError(f"{name}: missing attribute {key}=", lineno, end_col)
            return None
        col = cols[key]
        return _parse_float(attrs.pop(key), lineno, col + len(key) + 1)

    temperature = None
    if "T" in attrs and kind != "R":
        raise NetlistError(f"{name}: temperature only valid on R", lineno, cols["T"])
    drive = waveform = None
    if kind in ("V", "I"):
        main = take(kind, required=False)
        adc = take("Adc", required=False)
        if main is not None and adc is not None:
            raise NetlistError(f"{name}: give either {kind}= or Adc=, not both", lineno, cols["Adc"])
        value = main if main is not None else (adc if adc is not None else None)
        if value is None:
            raise NetlistError(f"{name}: missing attribute {kind}=", lineno, end_col)
        waveform = WaveformSpec(value, harmonics)
    else:
        value = take(kind)
        if value <= 0:
            raise NetlistError(f"{name}: value must be positive", lineno, cols.get(kind, c0))
        if kind == "R":
            temperature = take("T", required=False)
            if temperature is None:
                raise NetlistError(f"{name}: missing temperature T=", lineno, end_col)
            if temperature <= 0:
                raise NetlistError(f"{name}: temperature must be positive", lineno, end_col)
            if harmonics:
                raise NetlistError(f"{name}: resistors cannot be driven", lineno, end_col)
        elif harmonics:
            drive = DriveSpec(value, harmonics)
    if attrs:
        key = next(iter(attrs))
        raise NetlistError(f"{name}: unknown attribute {key!r}", lineno, cols[key])
    return ElementSpec(name, kind, node_a, node_b, value, temperature, drive, waveform)


def _parse_coupling(tokens, lineno):
    if len(tokens) != 5:
        raise NetlistError("coupling line must read 'K <name> <L1> <L2> M=<value>'", lineno, tokens[0][0])
    (_, _), (cn, name), (c1, l1), (c2, l2), (cm, mtok) = tokens
    attrs, cols = _split_attrs([(cm, mtok)], lineno)
    if "M" not in attrs:
        raise NetlistError("coupling needs M=", lineno, cm)
    value = _parse_float(attrs["M"], lineno, cm + 2)
    return ElementSpec(name, "K", l1, l2, value)


def parse_netlist(text: str) -> CircuitSpec:
    """Parse netlist text into a validated :class:`CircuitSpec`.

    Raises
    ------
    NetlistError
        On syntax or semantic errors; carries 1-based line and column.
    DisconnectedGraphError
        If the elements do not form a connected graph.
    """
    elements = []
    wd = None
    wd_line = None
    seen = {}
    inductors = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = [(m.start() + 1, m.group()) for m in _TOKEN.finditer(raw)]
        head = tokens[0][1]
        if head.startswith("."):
            if head != ".drive":
                raise NetlistError(f"unknown directive {head!r}", lineno, tokens[0][0])
            if wd is not None:
                raise NetlistError(f"second .drive directive (first on line {wd_line})", lineno, tokens[0][0])
            attrs, cols = _split_attrs(tokens[1:], lineno)
            if set(attrs) != {"wd"}:
                raise NetlistError(".drive takes exactly one attribute wd=", lineno, tokens[0][0])
            wd = _parse_float(attrs["wd"], lineno, cols["wd"] + 3)
            if wd <= 0:
                raise NetlistError("drive frequency must be positive", lineno, cols["wd"])
            wd_line = lineno
            continue
        if head == "K":
            el = _parse_coupling(tokens, lineno)
            for col, ref in ((tokens[2][0], el.node_a), (tokens[3][0], el.node_b)):
                if ref not in inductors:
                    raise NetlistError(f"{el.name}: unknown inductor {ref!r}", lineno, col)
        else:
            el = _parse_element(tokens, lineno)
            if el.kind == "L":
                inductors.add(el.name)
        if el.name in seen:
            raise NetlistError(
                f"duplicate element name {el.name!r} (first on line {seen[el.name]})", lineno, tokens[0][0]
            )
        seen[el.name] = lineno
        elements.append(el)
    if not elements:
        raise NetlistError("netlist contains no elements")
    spec = CircuitSpec(tuple(elements), wd)
    spec.check_connected()
    return spec


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_harmonics(harmonics) -> list[str]:
    out = []
    for k, amp, ph in harmonics:
        out.append(f"A{k}={_fmt(amp)}")
        out.append(f"P{k}={_fmt(ph)}")
    return out


def serialize_netlist(spec: CircuitSpec) -> str:
    """Canonical text such that ``parse_netlist`` gives back ``spec``."""
    lines = []
    if spec.drive_frequency is not None:
        lines.append(f".drive wd={_fmt(spec.drive_frequency)}")
    for el in spec.elements:
        if el.kind == "K":
            lines.append(f"K {el.name} {el.node_a} {el.node_b} M={_fmt(el.value)}")
            continue
        parts = [el.name, el.node_a, el.node_b, f"{el.kind}={_fmt(el.value)}"]
        if el.kind == "R":
            parts.append(f"T={_fmt(el.temperature)}")
        if el.drive is not None:
            parts += _fmt_harmonics(el.drive.harmonics)
        if el.waveform is not None:
            parts += _fmt_harmonics(el.waveform.harmonics)
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"
