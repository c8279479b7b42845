"""Command-line front end: netlist in, CSV/JSON out.

Exit codes: 0 success, 1 usage error, 2 model error (bad netlist, topology
condition violation, diverging heat currents), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as rio
from .dynamics import (
    floquet_stability,
    integrate_covariance,
    sample_langevin,
    solve_stationary_lyapunov,
    stationary_mean,
)
from .errors import ModelError, NumericalError
from .floquet import cycle_average, solve_generalized_lyapunov
from .netlist import CircuitSpec, DriveSpec, parse_netlist
from .quantum import heat_periodic_quantum, heat_static_quantum, transfer_periodic, transfer_static
from .statespace import build_model, hamiltonian_at, inverse_hamiltonian_at
from .thermo import entropy_production, heat_current_classical, thermo_sample, total_heat_rate
from .topology import analyze
from .units import NATURAL, SI

__all__ = ["main", "run", "parse_range", "apply_drive", "set_parameter"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


_RANGE = re.compile(r"^\s*(?P<lo>[^:]+):(?P<hi>[^:]+):(?P<n>[^:]+)\s*$")
_LOGSPACE = re.compile(r"^\s*logspace\((?P<lo>[^,]+),(?P<hi>[^,]+),(?P<n>[^,)]+)\)\s*$")


def parse_range(text: str) -> np.ndarray:
    """``lo:hi:n`` (linear), ``logspace(lo,hi,n)`` (geometric, endpoints as
    values) or a single number."""
    for pat, fn in ((_RANGE, np.linspace), (_LOGSPACE, np.geomspace)):
        m = pat.match(text)
        if m:
            try:
                lo, hi, n = float(m["lo"]), float(m["hi"]), int(m["n"])
            except ValueError:
                raise UsageError(f"bad range {text!r}") from None
            if n < 1:
                raise UsageError(f"range {text!r} needs at least one point")
            if fn is np.geomspace and (lo <= 0 or hi <= 0):
                raise UsageError(f"logspace range {text!r} needs positive endpoints")
            return fn(lo, hi, n)
    try:
        return np.array([float(text)])
    except ValueError:
        raise UsageError(f"bad number or range {text!r}") from None


# --- circuit edits ---------------------------------------------------------


def apply_drive(spec: CircuitSpec, wd=None, dc=None, theta=None) -> CircuitSpec:
    """Set the capacitive drive ``C_i(t) = C_i (1 + dc cos(wd t + phase_i))``.

    Targets are the capacitors already driven in the netlist, or every
    capacitor if none is. The first target has phase 0, the others ``theta``.
    ``None`` leaves the corresponding setting unchanged.
    """
    if wd is None and dc is None and theta is None:
        return spec
    caps = [el for el in spec.elements if el.kind == "C"]
    targets = [el.name for el in caps if el.is_driven] or [el.name for el in caps]
    els = []
    k = 0
    for el in spec.elements:
        if el.name in targets:
            base = el.drive.base if el.drive is not None else el.value
            old = el.drive.harmonics[0] if (el.drive is not None and el.drive.harmonics) else (1, 0.0, 0.0)
            amp = old[1] if dc is None else dc * base
            ph = old[2] if theta is None else (0.0 if k == 0 else float(theta))
            drive = DriveSpec(base, ((1, amp, ph),)) if amp else None
            el = replace(el, value=base, drive=drive)
            k += 1
        els.append(el)
    w = spec.drive_frequency if wd is None else float(wd)
    if w is None and any(e.is_driven for e in els):
        raise UsageError("a drive amplitude needs a drive frequency (--wd-range, wd=, or a .drive line)")
    return CircuitSpec(tuple(els), w)


def set_parameter(spec: CircuitSpec, name: str, value: float) -> CircuitSpec:
    """``wd``, ``dc``, ``theta``, ``T_<R>`` (temperature) or ``<element>`` (value)."""
    if name == "wd":
        return apply_drive(spec, wd=value)
    if name == "dc":
        return apply_drive(spec, dc=value)
    if name == "theta":
        return apply_drive(spec, theta=value)
    if name.startswith("T_"):
        target, field = name[2:], "temperature"
    else:
        target, field = name, "value"
    try:
        el = spec.element(target)
    except KeyError:
        raise UsageError(f"unknown parameter {name!r}") from None
    if field == "temperature" and el.kind != "R":
        raise UsageError(f"{name!r}: temperatures belong to resistors")
    if field == "value" and el.drive is not None:
        el = replace(el, value=value, drive=DriveSpec(value, tuple((k, a / el.drive.base * value, p) for k, a, p in el.drive.harmonics)))
    else:
        el = replace(el, **{field: value})
    els = tuple(el if e.name == target else e for e in spec.elements)
    return CircuitSpec(els, spec.drive_frequency)


def _resistors(spec):
    return [el.name for el in spec.elements if el.kind == "R"]


def _set_temperatures(spec, temps: dict):
    els = tuple(replace(e, temperature=temps[e.name]) if e.name in temps else e for e in spec.elements)
    return CircuitSpec(els, spec.drive_frequency)


def _scaled_temperatures(spec, T):
    rs = [el for el in spec.elements if el.kind == "R"]
    ref = rs[0].temperature
    return _set_temperatures(spec, {el.name: T * el.temperature / ref for el in rs})


# --- output helpers --------------------------------------------------------


class _Labels:
    def __init__(self, natural: bool):
        self.natural = natural

    def __call__(self, name, si_unit):
        return f"{name}[{'nat' if self.natural and si_unit not in ('1', 'rad') else si_unit}]"


def _state_unit(name):
    return "C" if name.startswith("q_") else "Wb"


def _mean_label(lab, name, prefix="mean"):
    return lab(f"{prefix}_{name}", _state_unit(name))


def _sigma_label(lab, a, b):
    ua, ub = _state_unit(a), _state_unit(b)
    return lab(f"sigma_{a}_{b}", f"{ua}^2" if ua == ub else f"{ua}*{ub}")


def _emit(args, text: str):
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def _table(args, header, rows):
    if args.format == "json":
        _emit(args, rio.json_text([dict(zip(header, r)) for r in rows]))
    else:
        _emit(args, rio.csv_text(header, rows))


def _load(args) -> CircuitSpec:
    path = Path(args.netlist)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_netlist(text)


def _units(args):
    return NATURAL if args.natural_units else SI


def _ordered(values, names, order):
    idx = {n: i for i, n in enumerate(order)}
    return [values[idx[n]] for n in names]


# --- commands --------------------------------------------------------------


def cmd_validate(args) -> int:
    spec = _load(args)
    g, t, m, rep = analyze(spec)
    info = {
        "nodes": g.n,
        "branches": g.b,
        "twigs": list(m.twig_names),
        "links": list(m.link_names),
        "Q_RR_zero": rep.qrr_zero,
        "resistor_network_acyclic": rep.r_network_acyclic,
        "consistent": rep.consistent,
        "message": rep.message(),
    }
    if args.format == "json":
        _emit(args, rio.json_text(info))
    else:
        _emit(args, rio.csv_text(["key", "value"], [(k, " ".join(v) if isinstance(v, list) else v) for k, v in info.items()]))
    if not rep.consistent:
        print(f"error: {rep.message()}", file=sys.stderr)
        return 2
    return 0


def _labeled_matrices(model):
    m, tree = model.matrices, model.tree
    tw, ln = m.twig_names, m.link_names
    out = {
        "B": (m.B, ln, tw + ln),
        "Q": (m.Q, tw, tw + ln),
        "Q_link": (m.Q_link, tw, ln),
    }
    for key, blk in m.blocks.items():
        rows = tuple(n for n, c in zip(tw, tree.twig_classes) if c == key[0])
        cols = tuple(n for n, c in zip(ln, tree.link_classes) if c == key[1])
        out["Q_" + key] = (blk, rows, cols)
    st, rs = model.state_names, model.resistor_names
    out["H"] = (hamiltonian_at(model, 0.0, static=True), st, st)
    out["A"] = (model.A, st, st)
    out["Bs"] = (model.Bs, st, model.source_names)
    out["c"] = (model.c, rs, st)
    out["alpha"] = (model.alpha, rs, rs)
    return out


def cmd_describe(args) -> int:
    spec = _load(args)
    model = build_model(spec, _units(args))
    mats = _labeled_matrices(model)
    if args.format == "json":
        info = {
            "state": list(model.state_names),
            "twigs": list(model.matrices.twig_names),
            "links": list(model.matrices.link_names),
            "resistors": list(model.resistor_names),
            "temperatures": model.temperatures,
            "consistent": model.thermo_consistent,
            "matrices": {k: {"rows": list(r), "cols": list(c), "values": M} for k, (M, r, c) in mats.items()},
        }
        _emit(args, rio.json_text(info))
    else:
        rows = []
        for key, (M, rl, cl) in mats.items():
            M = np.asarray(M).reshape(len(rl), len(cl))
            for i, j in itertools.product(range(len(rl)), range(len(cl))):
                rows.append((key, rl[i], cl[j], M[i, j]))
        _emit(args, rio.csv_text(["matrix", "row", "col", "value"], rows))
    return 0


def cmd_steady(args) -> int:
    spec = _load(args)
    model = build_model(spec, _units(args))
    if model.is_driven:
        raise ModelError("circuit is driven; use the 'cycle' command")
    lab = _Labels(args.natural_units)
    S = solve_stationary_lyapunov(model)
    mu = stationary_mean(model)
    out = {"state": list(model.state_names), "mean": mu, "sigma": S}
    names = model.state_names
    rows = [(_mean_label(lab, n), v) for n, v in zip(names, mu)]
    for i, j in itertools.combinations_with_replacement(range(model.n), 2):
        rows.append((_sigma_label(lab, names[i], names[j]), S[i, j]))
    if model.thermo_consistent:
        q = heat_current_classical(model, mu, S)
        ep = entropy_production(model, mu, S)
        out["Qdot"] = dict(zip(model.resistor_names, q))
        out["Sigma_dot"] = ep.Sigma_dot
        rows += [(lab(f"Qdot_{n}", "W"), v) for n, v in zip(model.resistor_names, q)]
        rows.append((lab("Sigma_dot", "W/K"), ep.Sigma_dot))
    else:
        qt = total_heat_rate(model, mu, S, t=0.0)
        out["Qdot_total"] = qt
        rows.append((lab("Qdot_total", "W"), qt))
        print("warning: " + model.consistency.message(), file=sys.stderr)
    if args.format == "json":
        _emit(args, rio.json_text(out))
    else:
        _emit(args, rio.csv_text(["quantity", "value"], rows))
    return 0


def _initial_covariance(model, mode):
    if mode == "zero":
        return np.zeros((model.n, model.n))
    if mode == "stationary":
        return solve_stationary_lyapunov(model)
    Tm = float(np.mean(model.temperatures)) if model.N_R else 0.0
    return model.units.kb * Tm * inverse_hamiltonian_at(model, 0.0)


def _t_end(args, model):
    return args.t_end if args.t_end is not None else 10.0 * float(np.max(model.timescales()))


def cmd_transient(args) -> int:
    spec = _load(args)
    model = build_model(spec, _units(args))
    lab = _Labels(args.natural_units)
    x0 = np.zeros(model.n) if args.x0 is None else np.array([float(v) for v in args.x0.split(",")])
    if x0.shape != (model.n,):
        raise UsageError(f"--x0 needs {model.n} comma-separated values")
    S0 = _initial_covariance(model, args.init)
    t1 = _t_end(args, model)
    gaps = max(1, args.samples - 1)
    every = max(1, int(np.ceil(t1 / (args.dt or model.default_dt()) / gaps)))
    dt = t1 / (every * gaps)
    sol = integrate_covariance(model, S0, (0.0, t1), dt, save_every=every, mean0=x0)
    names = model.state_names
    pairs = list(itertools.combinations_with_replacement(range(model.n), 2))
    header = [lab("t", "s")] + [_mean_label(lab, n) for n in names]
    header += [_sigma_label(lab, names[i], names[j]) for i, j in pairs]
    rnames = model.resistor_names if model.thermo_consistent else ("total",)
    header += [lab(f"Qdot_{n}", "W") for n in rnames]
    header += [lab("Wdot_s", "W"), lab("Wdot_d", "W"), lab("Edot", "W"), lab("Sigma_dot", "W/K")]
    rows = []
    for t, mu, S in zip(sol.times, sol.mean, sol.sigma):
        try:
            ts = thermo_sample(model, mu, S, t, entropy=model.thermo_consistent)
            sig = ts.Sigma_dot if ts.Sigma_dot is not None else float("nan")
        except NumericalError:
            ts = thermo_sample(model, mu, S, t, entropy=False)
            sig = float("nan")
        rows.append([t, *mu, *(S[i, j] for i, j in pairs), *ts.Qdot, ts.Wdot_s, ts.Wdot_d, ts.Edot, sig])
    _table(args, header, rows)
    return 0


def cmd_sample(args) -> int:
    spec = _load(args)
    model = build_model(spec, _units(args))
    lab = _Labels(args.natural_units)
    try:
        S0 = solve_stationary_lyapunov(model) if not model.is_driven else _initial_covariance(model, "equilibrium")
    except NumericalError:
        S0 = _initial_covariance(model, "equilibrium")
    mu0 = np.zeros(model.n)
    t1 = _t_end(args, model)
    gaps = max(1, args.samples - 1)
    every = max(1, int(np.ceil(t1 / (args.dt or model.default_dt()) / gaps)))
    dt = t1 / (every * gaps)
    ens = sample_langevin(model, mu0, (0.0, t1), dt, args.ntraj, args.seed, n_samples=args.samples, sigma0=S0)
    names = model.state_names
    header = [lab("t", "s")]
    header += [_mean_label(lab, n) for n in names] + [_mean_label(lab, n, "se_mean") for n in names]
    header += [lab(f"Q_{r}", "J") for r in model.resistor_names] + [lab(f"se_Q_{r}", "J") for r in model.resistor_names]
    rows = []
    for i, t in enumerate(ens.times):
        m, se = ens.mean(i)
        q = ens.heat[:, i, :]
        rows.append([t, *m, *se, *q.mean(axis=0), *(q.std(axis=0, ddof=1) / np.sqrt(ens.n_traj))])
    _table(args, header, rows)
    return 0


def _cycle_point(task):
    spec, units, K, method, burnin, dt = task
    model = build_model(spec, units)
    rep = floquet_stability(model)
    if not rep.stable:
        return [float("nan")] * (model.N_R + 2) + [False], model.resistor_names
    if method == "floquet":
        fc = solve_generalized_lyapunov(model, K=K)
        ca = cycle_average(model, fc)
    else:
        period = 2 * np.pi / model.drive_frequency
        h = dt or model.default_dt()
        per = int(np.ceil(period / h))
        h = period / per
        S0 = _initial_covariance(model, "equilibrium")
        sol = integrate_covariance(model, S0, (0.0, (burnin + 2) * period), h, save_every=1)
        ca = cycle_average(model, sol)
    return [*ca.Qdot, ca.Wdot, ca.CoP, True], model.resistor_names


def _map(fn, tasks, workers):
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def _drive_grid(args, spec):
    wds = parse_range(args.wd_range) if args.wd_range else [spec.drive_frequency]
    dcs = parse_range(args.dc) if args.dc else [None]
    ths = parse_range(args.theta) if args.theta else [None]
    return wds, dcs, ths


def _current_drive(spec):
    caps = [el for el in spec.elements if el.kind == "C" and el.is_driven]
    if not caps:
        return 0.0, 0.0
    dc = caps[0].drive.harmonics[0][1] / caps[0].drive.base
    th = caps[1].drive.harmonics[0][2] if len(caps) > 1 else 0.0
    return dc, th


def cmd_cycle(args) -> int:
    base = _load(args)
    rnames = _resistors(base)
    if len(rnames) < 1:
        raise ModelError("cycle averages need at least one resistor")
    lab = _Labels(args.natural_units)
    wds, dcs, ths = _drive_grid(args, base)
    T1s = parse_range(args.T1) if args.T1 else [None]
    T2s = parse_range(args.T2) if args.T2 else [None]
    tasks, meta = [], []
    for wd, dc, th, T1, T2 in itertools.product(wds, dcs, ths, T1s, T2s):
        if wd is None:
            raise UsageError("no drive frequency: give --wd-range or a .drive line")
        spec = apply_drive(base, wd, dc, th)
        temps = {}
        if T1 is not None:
            temps[rnames[0]] = T1
        if T2 is not None and len(rnames) > 1:
            temps[rnames[1]] = T2
        spec = _set_temperatures(spec, temps)
        if not spec.is_driven:
            raise ModelError("circuit is not driven: set --dc")
        dcv, thv = _current_drive(spec)
        meta.append([wd, dcv, thv, *(spec.element(r).temperature for r in rnames)])
        tasks.append((spec, _units(args), args.K, args.method, args.burnin_periods, args.dt))
    results = _map(_cycle_point, tasks, args.workers)
    header = [lab("wd", "rad/s"), lab("dC", "1"), lab("theta", "rad")]
    header += [lab(f"T_{r}", "K") for r in rnames]
    header += [lab(f"Qdot_c_{r}", "W") for r in rnames] + [lab("Wdot_c", "W"), lab("CoP", "1"), "stable"]
    rows = []
    for m, (vals, order) in zip(meta, results):
        q = _ordered(vals[: len(rnames)], rnames, order)
        rows.append([*m, *q, *vals[len(rnames) :]])
    _table(args, header, rows)
    return 0


def _t_star(Ts, q):
    s = np.sign(q)
    hits = np.nonzero(s[:-1] * s[1:] < 0)[0]
    return [(Ts[i], Ts[i + 1]) for i in hits]


def cmd_quantum_static(args) -> int:
    spec = _load(args)
    if spec.is_driven:
        raise ModelError("circuit is driven; use 'quantum-cycle'")
    lab = _Labels(args.natural_units)
    units = _units(args)
    model = build_model(spec, units)
    rnames = _resistors(spec)
    Ts = parse_range(args.T_range) if args.T_range else [model.temperatures[0]]
    ref = spec.element(rnames[0]).temperature
    ratios = np.array([spec.element(r).temperature / ref for r in rnames])
    order = model.resistor_names
    grid = transfer_static(model, cutoff=args.cutoff)
    rows = []
    for T in Ts:
        temps = np.array(_ordered(T * ratios, order, rnames))
        q = heat_static_quantum(model, temperatures=temps, grid=grid)
        rows.append([T, *_ordered(q, rnames, order)])
    header = [lab("T", "K")] + [lab(f"Qdot_{r}", "W") for r in rnames]
    _table(args, header, rows)
    return 0


def cmd_quantum_cycle(args) -> int:
    base = _load(args)
    lab = _Labels(args.natural_units)
    units = _units(args)
    wds, dcs, ths = _drive_grid(args, base)
    if len(wds) * len(dcs) * len(ths) != 1 or wds[0] is None:
        raise UsageError("quantum-cycle takes a single drive point (--wd-range, --dc, --theta as numbers)")
    spec = apply_drive(base, wds[0], dcs[0], ths[0])
    model = build_model(spec, units)
    if not floquet_stability(model).stable:
        raise NumericalError("drive is unstable (parametric resonance)")
    rnames = _resistors(spec)
    ref = spec.element(rnames[0]).temperature
    ratios = np.array([spec.element(r).temperature / ref for r in rnames])
    Ts = parse_range(args.T_range) if args.T_range else np.array([ref])
    order = model.resistor_names
    grid = transfer_periodic(model, j_max=args.jmax, cutoff=args.cutoff)
    temps = np.array([_ordered(T * ratios, order, rnames) for T in Ts])
    q = heat_periodic_quantum(model, temperatures=temps, grid=grid)
    rows = []
    for T, tv, qi in zip(Ts, temps, q):
        fc = solve_generalized_lyapunov(model, K=args.K, temperatures=tv)
        cl = cycle_average(_with_temps(model, spec, tv, units), fc)
        rows.append([T, *_ordered(qi, rnames, order), *_ordered(cl.Qdot, rnames, order)])
    header = [lab("T", "K")] + [lab(f"Qdot_c_{r}", "W") for r in rnames] + [lab(f"Qdot_c_classical_{r}", "W") for r in rnames]
    _table(args, header, rows)
    first = np.array([r[1] for r in rows])
    brackets = _t_star(np.asarray(Ts), first)
    if brackets:
        lo, hi = brackets[-1]
        print(f"T* for {rnames[0]}: sign change between {float(lo)!r} and {float(hi)!r}", file=sys.stderr)
    else:
        print(f"T* for {rnames[0]}: no sign change in the scanned range", file=sys.stderr)
    return 0


def _with_temps(model, spec, temps_port, units):
    names = model.resistor_names
    return build_model(_set_temperatures(spec, dict(zip(names, temps_port))), units)


_ELEMENT_UNITS = {"R": "Ohm", "C": "F", "L": "H", "V": "V", "I": "A", "K": "H"}


def _param_unit(name):
    if name in ("dc",):
        return "1"
    if name == "theta":
        return "rad"
    if name == "wd":
        return "rad/s"
    if name.startswith("T_"):
        return "K"
    return _ELEMENT_UNITS.get(name[:1], "1")


def _sweep_point(task):
    spec, units, analysis, K = task
    model = build_model(spec, units)
    if analysis == "steady":
        S = solve_stationary_lyapunov(model)
        mu = stationary_mean(model)
        q = heat_current_classical(model, mu, S)
        ep = entropy_production(model, mu, S, decompose=False)
        return [*q, ep.Sigma_dot], model.resistor_names
    vals, order = _cycle_point((spec, units, K, "floquet", 0, None))
    return vals, order


def cmd_sweep(args) -> int:
    base = _load(args)
    lab = _Labels(args.natural_units)
    if not args.param:
        raise UsageError("sweep needs at least one --param NAME=RANGE")
    names, grids = [], []
    for p in args.param:
        if "=" not in p:
            raise UsageError(f"bad --param {p!r}; expected NAME=RANGE")
        k, v = p.split("=", 1)
        names.append(k.strip())
        grids.append(parse_range(v))
    rnames = _resistors(base)
    tasks, meta = [], []
    for point in itertools.product(*grids):
        spec = base
        # the drive frequency goes first so that amplitudes can be attached to it
        for k, v in sorted(zip(names, point), key=lambda kv: kv[0] != "wd"):
            spec = set_parameter(spec, k, float(v))
        meta.append(list(point))
        tasks.append((spec, _units(args), args.analysis, args.K))
    results = _map(_sweep_point, tasks, args.workers)
    header = [lab(n, _param_unit(n)) for n in names]
    if args.analysis == "steady":
        header += [lab(f"Qdot_{r}", "W") for r in rnames] + [lab("Sigma_dot", "W/K")]
    else:
        header += [lab(f"Qdot_c_{r}", "W") for r in rnames] + [lab("Wdot_c", "W"), lab("CoP", "1"), "stable"]
    rows = []
    for m, (vals, order) in zip(meta, results):
        q = _ordered(vals[: len(rnames)], rnames, order)
        rows.append([*m, *q, *vals[len(rnames) :]])
    _table(args, header, rows)
    return 0


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("netlist", help="netlist file")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--natural-units", action="store_true", help="set kb = hbar = 1")
    common.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")

    p = _Parser(prog="rlcthermo", description="Stochastic thermodynamics of linear RLC circuits.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("validate", parents=[common], help="normal tree and heat-current consistency")
    sub.add_parser("describe", parents=[common], help="topology and state-space matrices")
    sub.add_parser("steady", parents=[common], help="stationary covariance, heat currents, entropy production")

    t = sub.add_parser("transient", parents=[common], help="moment equations and thermodynamic rates in time")
    t.add_argument("--t-end", type=float)
    t.add_argument("--dt", type=float)
    t.add_argument("--samples", type=int, default=201)
    t.add_argument("--x0", help="initial mean, comma separated")
    t.add_argument("--init", choices=("equilibrium", "zero", "stationary"), default="equilibrium")

    s = sub.add_parser("sample", parents=[common], help="Langevin trajectories")
    s.add_argument("--t-end", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--ntraj", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--samples", type=int, default=101)

    def drive_flags(q, sweep=True):
        q.add_argument("--wd-range", help="drive frequency (range syntax)")
        q.add_argument("--dc", help="relative capacitive drive amplitude dC/C (range syntax)")
        q.add_argument("--theta", help="phase of the second driven capacitor (range syntax)")
        q.add_argument("--K", type=int, help="Fourier block truncation")

    c = sub.add_parser("cycle", parents=[common], help="cycle-averaged heat and work under periodic drive")
    drive_flags(c)
    c.add_argument("--T1", help="temperature of the first resistor (range syntax)")
    c.add_argument("--T2", help="temperature of the second resistor (range syntax)")
    c.add_argument("--method", choices=("floquet", "transient"), default="floquet")
    c.add_argument("--burnin-periods", type=int, default=50)
    c.add_argument("--dt", type=float)

    qs = sub.add_parser("quantum-static", parents=[common], help="Landauer-Buttiker heat currents")
    qs.add_argument("--T-range", help="temperature of the first resistor; others keep their ratios")
    qs.add_argument("--cutoff", type=float)

    qc = sub.add_parser("quantum-cycle", parents=[common], help="cycle-averaged heat with quantum noise")
    drive_flags(qc)
    qc.add_argument("--T-range", help="temperature of the first resistor; others keep their ratios")
    qc.add_argument("--cutoff", type=float)
    qc.add_argument("--jmax", type=int)

    sw = sub.add_parser("sweep", parents=[common], help="cartesian parameter grid, one row per point")
    sw.add_argument("--param", action="append", help="NAME=RANGE with NAME in wd, dc, theta, T_<R>, <element>")
    sw.add_argument("--analysis", choices=("steady", "cycle"), default="steady")
    sw.add_argument("--K", type=int)
    return p


_COMMANDS = {
    "validate": cmd_validate,
    "describe": cmd_describe,
    "steady": cmd_steady,
    "transient": cmd_transient,
    "sample": cmd_sample,
    "cycle": cmd_cycle,
    "quantum-static": cmd_quantum_static,
    "quantum-cycle": cmd_quantum_cycle,
    "sweep": cmd_sweep,
}

_DEFAULT_FORMAT = {"describe": "json", "steady": "json", "validate": "csv"}


def run(argv=None) -> int:
    """Run the command line; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.format is None:
            args.format = _DEFAULT_FORMAT.get(args.command, "csv")
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
