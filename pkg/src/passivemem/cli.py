"""Command-line front end: experiments, bound evaluators and small-system dynamics.

Every subcommand writes CSV (or JSON with ``--json``) to stdout or to
``--out``; file outputs are written atomically together with a
``<out>.manifest.json`` that can be fed back through ``--config``.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import inspect
import json
import math
import os
import sys
import tempfile
from importlib import metadata

import numpy as np

from . import analytics, dynamics, experiments
from .pauli import PauliString, build_toric

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
FIDELITY_DRIVE = 0.999
FIDELITY_MIRROR = 1 - 1e-6


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.12g}"


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(x)) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _as_list(v, conv):
    if isinstance(v, (list, tuple)):
        return [conv(x) for x in v]
    return (_int_list if conv is int else _float_list)(v)


# -- table helpers -------------------------------------------------------

class Table:
    def __init__(self, header: list[str], rows: list[list], violations: list[str] | None = None):
        self.header = header
        self.rows = rows
        self.violations = violations or []

    def csv(self) -> str:
        lines = [",".join(self.header)] + [",".join("" if c is None else _fmt(c) for c in r) for r in self.rows]
        return "\n".join(lines) + "\n"

    def json(self) -> str:
        def conv(c):
            if isinstance(c, (np.integer,)):
                return int(c)
            if isinstance(c, (np.floating,)):
                return float(c)
            return c
        rows = [{h: conv(c) for h, c in zip(self.header, r)} for r in self.rows]
        return json.dumps(rows, indent=2, sort_keys=False) + "\n"


def _stats_table(stats) -> Table:
    header = experiments.CSV_HEADER.split(",")
    rows = [[s.experiment, s.N, s.p, s.D, s.S, s.trials, s.failures, s.rate, s.wilson_lo, s.wilson_hi, s.seed]
            for s in stats]
    return Table(header, rows)


# -- subcommands ---------------------------------------------------------

def cmd_fig3(prm) -> Table:
    cfg = experiments.ExperimentConfig("fig3", {
        "N": _as_list(prm["N"], int), "p": float(prm["p"]), "D": prm.get("D"),
        "decoder": prm["decoder"], "include_singletons": bool(prm["include_singletons"]),
    }, int(prm["samples"]), int(prm["seed"]), int(prm["threads"]))
    return _stats_table(experiments.fig3_run(cfg))


def cmd_linf(prm) -> Table:
    cfg = experiments.ExperimentConfig("linf", {
        "N": _as_list(prm["N"], int), "p": float(prm["p"]), "decoder": prm["decoder"],
    }, int(prm["samples"]), int(prm["seed"]), int(prm["threads"]))
    stats = experiments.linf_run(cfg, check=False)
    t = _stats_table(stats)
    for s in stats:
        if s.p > 0:
            lower = analytics.linf_construction_params(s.p, s.N).p_logic_lower
            if s.rate < lower - 3 * s.sigma(lower):
                t.violations.append(f"N={s.N}: rate {s.rate:.6g} below {lower:.6g} - 3 sigma")
    return t


def cmd_rowloop(prm) -> Table:
    stats = []
    for point, i in enumerate(_as_list(prm["rows"], int)):
        r = experiments.row_loop_run(float(prm["p"]), i, int(prm["samples"]), int(prm["seed"]),
                                     int(prm["ring"]), int(prm["threads"]), point)
        stats += [r.dephasing, r.logical]
    return _stats_table(stats)


def cmd_compass(prm) -> Table:
    stats = []
    point = 0
    for n in _as_list(prm["n"], int):
        for eps in _as_list(prm["eps"], float):
            stats.append(experiments.compass_run(n, eps, int(prm["samples"]), int(prm["seed"]), point,
                                                 int(prm["threads"])))
            point += 1
    return _stats_table(stats)


BOUND_ARGS = ("eps", "n", "p", "k", "J", "R", "gamma", "t", "D", "s_a", "s_b")
INT_ARGS = {"n", "N", "k", "D", "s_a", "s_b"}


def cmd_bounds(prm) -> Table:
    name = prm.get("name")
    if name not in analytics.FORMULAS:
        raise UsageError(f"--name must be one of {', '.join(sorted(analytics.FORMULAS))}")
    fn = analytics.FORMULAS[name][0]
    given = {k.lower(): v for k, v in prm.items() if k in BOUND_ARGS and v is not None}
    kw = {}
    for pname, par in inspect.signature(fn).parameters.items():
        val = given.get(pname.lower())
        if val is None:
            if par.default is inspect.Parameter.empty:
                raise UsageError(f"{name} needs --{pname.lower().replace('_', '-')}")
            continue
        kw[pname] = int(val) if pname in INT_ARGS else float(val)
    try:
        reports = analytics.report(name, **kw)
    except AssertionError as exc:
        t = Table(analytics.CSV_HEADER.split(","), [])
        t.violations.append(str(exc))
        return t
    rows = [[r.name, ";".join(f"{k}={_fmt(v)}" for k, v in r.inputs.items()), r.value, r.reference]
            for r in reports]
    return Table(analytics.CSV_HEADER.split(","), rows)


def _times(t_end: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise UsageError("--steps must be >= 1")
    return np.array([t_end]) if steps == 1 else np.linspace(0.0, t_end, steps)


def cmd_pst(prm) -> Table:
    D = int(prm["D"])
    if D < 1:
        raise UsageError("--D must be >= 1")
    ts = _times(float(prm["t"]), int(prm["steps"]))
    amps = np.atleast_2d(dynamics.evolve_chain(dynamics.TridiagonalChain.pst(D), 0, ts))
    return Table(["t", "value"], [[t, abs(a[-1]) ** 2] for t, a in zip(ts, amps)])


def cmd_ladder(prm) -> Table:
    N, eps = int(prm["N"]), float(prm["eps"])
    if N < 1 or eps <= 0:
        raise UsageError("--N must be >= 1 and --eps positive")
    t_end = math.pi / (2 * eps) if prm.get("t") is None else float(prm["t"])
    ts = _times(t_end, int(prm["steps"]))
    amps = np.atleast_2d(dynamics.evolve_chain(dynamics.TridiagonalChain.pst(N, eps), 0, ts))
    return Table(["t", "value"], [[t, abs(a[-1]) ** 2] for t, a in zip(ts, amps)])


def code_problem(code: str):
    """Stabilizers, logical Pauli factors and a code state for the named demo code."""
    if code == "rep2":
        stabs = [PauliString.from_label("ZZ")]
        targets = [PauliString.from_label("XI"), PauliString.from_label("IX")]
    elif code == "rep3":
        stabs = [PauliString.from_label("ZZI"), PauliString.from_label("IZZ")]
        targets = [PauliString.from_label(l) for l in ("XII", "IXI", "IIX")]
    elif code == "c422":
        stabs = [PauliString.from_label("XXXX"), PauliString.from_label("ZZZZ")]
        targets = [PauliString.single(4, "X", [0]), PauliString.single(4, "X", [1])]
    elif code == "toric2":
        lat = build_toric(2)
        stabs = lat.stabilizers()
        x1 = lat.logical_ops["X1"]
        targets = [PauliString.single(lat.num_qubits, "X", [q]) for q in np.nonzero(x1.x)[0]]
    else:
        raise UsageError(f"unknown code {code!r}")
    return stabs, targets, ground_state(stabs)


def ground_state(stabs) -> np.ndarray:
    """Projection of a basis state onto the joint +1 eigenspace."""
    n = stabs[0].n
    dim = 1 << n
    for b in range(dim):
        psi = np.zeros(dim, dtype=complex)
        psi[b] = 1.0
        for s in stabs:
            psi = 0.5 * (psi + s.to_sparse() @ psi)
        nrm = np.linalg.norm(psi)
        if nrm > 1e-8:
            return psi / nrm
    raise ValueError("stabilizers have no common +1 eigenstate")


def cmd_drive(prm) -> Table:
    stabs, targets, psi0 = code_problem(prm["code"])
    env = dynamics.Envelope.with_area(prm["envelope"], float(prm["tf"]))
    h0 = dynamics.stabilizer_hamiltonian(stabs)
    res = dynamics.interaction_drive(h0, targets, env, psi0)
    t = Table(["code", "t_f", "fidelity", "norm_drift"], [[prm["code"], env.t_f, res.fidelity, res.norm_drift]])
    if res.fidelity < FIDELITY_DRIVE:
        t.violations.append(f"drive fidelity {res.fidelity:.9g} < {FIDELITY_DRIVE}")
    return t


def cmd_mirror(prm) -> Table:
    stabs, targets, psi0 = code_problem(prm["code"])
    eps = float(prm["eps"])
    if eps <= 0:
        raise UsageError("--eps must be positive")
    res = dynamics.mirror_environment_evolution(stabs, targets, eps, None, psi0)
    t = Table(["code", "eps", "t", "fidelity"], [[prm["code"], eps, math.pi / (2 * eps), res.system_fidelity]])
    if res.system_fidelity < FIDELITY_MIRROR:
        t.violations.append(f"mirror fidelity {res.system_fidelity:.12g} < {FIDELITY_MIRROR}")
    return t


def cmd_gapped(prm) -> Table:
    rng = np.random.default_rng(int(prm["seed"]))
    n, k = int(prm["qubits"]), int(prm["flagged"])
    gamma, eps, T = float(prm["gamma"]), float(prm["eps"]), float(prm["T"])
    t = Table(["index", "avg_S", "avg_S_exact", "R", "gamma", "bound"], [])
    for idx in range(int(prm["count"])):
        h, q, _ = dynamics.random_gapped_hamiltonian(n, k, gamma, rng)
        U = dynamics.product_rotation(eps, dynamics.random_axes(rng, n))
        r = dynamics.time_avg_survival(h, k, U, q[:, 0], T, gamma=gamma)
        t.rows.append([idx, r.avg_S, r.avg_S_exact, r.R, r.gamma, r.bound])
        if r.avg_S > r.bound + 1e-3:
            t.violations.append(f"instance {idx}: avg_S {r.avg_S:.6g} > bound {r.bound:.6g}")
    return t


def named_state(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    dim = 1 << n
    psi = np.zeros(dim, dtype=complex)
    if kind == "zero":
        psi[0] = 1.0
    elif kind == "ghz":
        psi[0] = psi[-1] = 1 / math.sqrt(2)
    elif kind == "random":
        psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        psi /= np.linalg.norm(psi)
    else:
        raise UsageError(f"unknown state {kind!r}")
    return psi


def cmd_depol(prm) -> Table:
    n = int(prm["qubits"])
    if not 1 <= n <= 4:
        raise UsageError("--qubits must lie in 1..4")
    rng = np.random.default_rng(int(prm["seed"]))
    eps = float(prm["eps"])
    psi = named_state(prm["state"], n, rng)
    d = dynamics.depolarizing_average_check(psi, eps, int(prm["samples"]), rng)
    return Table(["qubits", "eps", "state", "samples", "trace_distance"], [[n, eps, prm["state"], int(prm["samples"]), d]])


# -- parser --------------------------------------------------------------

DEFAULTS = {
    "fig3": {"N": "128,256,512,1024", "p": 0.1, "D": None, "decoder": "l1", "include_singletons": False,
             "samples": 100_000},
    "linf": {"N": "1000,10000", "p": 0.1, "decoder": "linf", "samples": 10_000},
    "rowloop": {"p": 0.1, "rows": "1,10,50", "ring": 16, "samples": 100_000},
    "compass": {"n": "5", "eps": "0.1", "samples": 100_000},
    "bounds": {"name": None, **{k: None for k in BOUND_ARGS}},
    "pst": {"D": 50, "t": math.pi / 2, "steps": 1},
    "ladder": {"N": 100, "eps": 0.1, "t": None, "steps": 1},
    "drive": {"code": "rep3", "tf": 20.0, "envelope": "sin2"},
    "mirror": {"code": "rep3", "eps": 0.1},
    "gapped": {"qubits": 6, "flagged": 2, "gamma": 1.0, "eps": 0.2, "T": 200.0, "count": 20},
    "depol-check": {"qubits": 1, "eps": 0.3, "state": "zero", "samples": 100_000},
}
COMMON = {"seed": 0, "samples": 10_000, "threads": None}

HANDLERS = {
    "fig3": cmd_fig3, "linf": cmd_linf, "rowloop": cmd_rowloop, "compass": cmd_compass,
    "bounds": cmd_bounds, "pst": cmd_pst, "ladder": cmd_ladder, "drive": cmd_drive,
    "mirror": cmd_mirror, "gapped": cmd_gapped, "depol-check": cmd_depol,
}


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--samples", type=int, help="Monte Carlo samples per point")
    p.add_argument("--threads", type=int, help=f"worker processes (default ${experiments.THREADS_ENV} or 1)")
    p.add_argument("--out", help="output file; a <out>.manifest.json is written alongside")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="format", action="store_const", const="json", help="emit JSON")
    fmt.add_argument("--csv", dest="format", action="store_const", const="csv", help="emit CSV (default)")
    p.add_argument("--config", help="JSON file of parameters (flat, or a manifest's 'parameters')")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="passivemem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, argument_default=argparse.SUPPRESS)

    s = add("fig3", "L1 failure vs ring length with arcs of length ceil(20 ln N)")
    s.add_argument("--N", type=_int_list, help="comma list of ring lengths")
    s.add_argument("--p", type=float, help="activation probability")
    s.add_argument("--D", type=int, help="fixed arc length (default ceil(20 ln N))")
    s.add_argument("--decoder", choices=sorted(experiments.DECODERS))
    s.add_argument("--include-singletons", dest="include_singletons", action="store_true")

    s = add("linf", "L-inf failure on the O(log N) construction, checked against (1 - N^-1/5)/2")
    s.add_argument("--N", type=_int_list)
    s.add_argument("--p", type=float)
    s.add_argument("--decoder", choices=sorted(experiments.DECODERS))

    s = add("rowloop", "row-loop dephasing and logical-flip statistics")
    s.add_argument("--p", type=float)
    s.add_argument("--rows", type=_int_list, help="comma list of row counts")
    s.add_argument("--ring", type=int, help="ring length per row (even)")

    s = add("compass", "compass-model majority-vote failure")
    s.add_argument("--n", type=_int_list, help="comma list of odd plane counts")
    s.add_argument("--eps", type=_float_list, help="comma list of rotation strengths")

    s = add("bounds", "evaluate a closed-form formula by name")
    s.add_argument("--name", choices=sorted(analytics.FORMULAS))
    for k in BOUND_ARGS:
        s.add_argument(f"--{k.replace('_', '-')}", dest=k, type=int if k in INT_ARGS else float)

    s = add("pst", "transfer probability along a PST chain")
    s.add_argument("--D", type=int)
    s.add_argument("--t", type=float)
    s.add_argument("--steps", type=int, help="curve points from 0 to t (1 = endpoint only)")

    s = add("ladder", "symmetric-excitation ladder transfer |0> -> |N>")
    s.add_argument("--N", type=int)
    s.add_argument("--eps", type=float)
    s.add_argument("--t", type=float, help="default pi/(2 eps)")
    s.add_argument("--steps", type=int)

    s = add("drive", "interaction-picture logical drive on a small code")
    s.add_argument("--code", choices=["rep2", "rep3", "c422", "toric2"])
    s.add_argument("--tf", type=float)
    s.add_argument("--envelope", choices=["sin2", "constant"])

    s = add("mirror", "system coupled to a mirrored environment")
    s.add_argument("--code", choices=["rep2", "rep3", "c422"])
    s.add_argument("--eps", type=float)

    s = add("gapped", "time-averaged survival on random gapped Hamiltonians")
    s.add_argument("--qubits", type=int)
    s.add_argument("--flagged", type=int, help="dimension of the protected low-energy subspace")
    s.add_argument("--gamma", type=float)
    s.add_argument("--eps", type=float)
    s.add_argument("--T", type=float)
    s.add_argument("--count", type=int)

    s = add("depol-check", "axis-averaged rotation vs product depolarizing channel")
    s.add_argument("--qubits", type=int)
    s.add_argument("--eps", type=float)
    s.add_argument("--state", choices=["zero", "ghz", "random"])
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    return data.get("parameters", data)


def resolve(args: argparse.Namespace) -> dict:
    cmd = args.command
    explicit = {k: v for k, v in vars(args).items() if k not in ("command", "out", "format", "config")}
    cfg = _load_config(args.config) if getattr(args, "config", None) else {}
    prm = {**COMMON, **DEFAULTS[cmd], **cfg, **explicit}
    if prm.get("threads") is None:
        prm["threads"] = experiments.default_threads()
    for key in ("samples", "threads"):
        if int(prm[key]) < 1:
            raise UsageError(f"--{key} must be >= 1")
    return prm


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _atomic_write(path: str, text: str):
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _manifest(cmd: str, prm: dict, started: str, outputs: list[str]) -> str:
    # thread count never changes results; keep it so the manifest replays the run as-is
    clean = {k: (v if not isinstance(v, np.generic) else v.item()) for k, v in prm.items()}
    return json.dumps({
        "subcommand": cmd,
        "parameters": clean,
        "seed": clean.get("seed"),
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "outputs": outputs,
        "version": _version(),
    }, indent=2, sort_keys=True) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        prm = resolve(args)
        table = HANDLERS[args.command](prm)
    except (UsageError, ValueError, KeyError, argparse.ArgumentTypeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"passivemem {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionError as exc:
        print(f"passivemem {args.command}: bound violated: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    text = table.json() if getattr(args, "format", "csv") == "json" else table.csv()
    out = getattr(args, "out", None)
    if out:
        _atomic_write(out, text)
        _atomic_write(out + ".manifest.json", _manifest(args.command, prm, started, [out]))
    else:
        sys.stdout.write(text)
    for v in table.violations:
        print(f"passivemem {args.command}: bound violated: {v}", file=sys.stderr)
    return EXIT_VIOLATION if table.violations else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
