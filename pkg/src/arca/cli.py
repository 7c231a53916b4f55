"""The ``arca`` command line.

Exit codes: ``sat`` returns 10 (sat), 20 (unsat), 2 (unknown); ``bmc`` and
``ic`` return 0 (safe / confirmed), 10 (counterexample / refuted), 2
(unknown).  Errors, including bad flags, return 1.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
import threading
import time
from pathlib import Path

from .backend import SolverConfig
from .core import classify, free_symbols
from .counting import eliminate_counting
from .general import DEFAULT_CAP, decide_eflat, prepare_general
from .mcheck import bmc, invariant_check, load_system, replay, shipped, trace
from .normalize import eliminate_parameter_reads, simple_preprocess
from .oracle import Bounds, find_model
from .parser import ArcaError, SymbolTable, parse, print_script
from .simple import decide_simple, prepare
from .syntax import all_names, conj
from .timing import recording
from .verdict import ProcessError, Sat, Unknown, Unsat

EXIT = {"sat": 10, "unsat": 20, "unknown": 2, "error": 1}
STATUS_EXIT = {"safe": 0, "confirmed": 0, "counterexample": 10, "refuted": 10, "unknown": 2}


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


class Reporter:
    """Serializes everything printed by a command."""

    def __init__(self, as_json: bool, out=None):
        self.as_json = as_json
        self.out = out or sys.stdout
        self.start = time.perf_counter()
        self.lock = threading.Lock()

    def ms(self) -> float:
        return round((time.perf_counter() - self.start) * 1000, 3)

    def record(self, stage: str, verdict, text: str = "", depth=None, **extra) -> None:
        with self.lock:
            if self.as_json:
                rec = {"stage": stage, "verdict": verdict}
                if depth is not None:
                    rec["depth"] = depth
                rec["time-ms"] = self.ms()
                rec.update(extra)
                print(json.dumps(rec, sort_keys=False), file=self.out)
            elif text:
                print(text, file=self.out)

    def text(self, text: str) -> None:
        if not self.as_json:
            with self.lock:
                print(text, file=self.out)


# -- helpers -----------------------------------------------------------------

def _read_arca(path: str):
    with open(path) as fh:
        symbols, formulas = parse(fh.read())
    return symbols, conj(*formulas)


def _read_system(path: str):
    if os.path.exists(path):
        text = Path(path).read_text()
    else:
        try:
            text = shipped(os.path.basename(path))
        except (FileNotFoundError, OSError):
            raise ArcaError(f"no such file: {path}") from None
    return load_system(text)


def _config(args) -> SolverConfig:
    return SolverConfig(executable=args.solver, args=tuple(args.solver_arg or ()),
                        timeout_ms=args.timeout_ms)


_FRESH = re.compile(r"[A-Za-z_][A-Za-z0-9_'.!]*")


def _printable(text: str, taken: set) -> str:
    """Rename generated symbols (which contain ``!``) into valid ``.arca``
    symbols."""
    names = {}
    used = set(taken)

    def sub(m):
        s = m.group(0)
        if "!" not in s:
            return s
        if s not in names:
            base = s.replace("!", "_")
            cand, k = base, 1
            while cand in used:
                cand, k = f"{base}_{k}", k + 1
            used.add(cand)
            names[s] = cand
        return names[s]

    return _FRESH.sub(sub, text)


def _script(symbols: SymbolTable, f) -> str:
    table = symbols.copy()
    vs, ps, _ = free_symbols(f)
    for v in sorted(vs - table.names()):
        table.declare("var", v)
    return _printable(print_script(table, [f]), all_names(f) | symbols.names())


def _verdict_text(v) -> str:
    if isinstance(v, Sat):
        vals = " ".join(f"{k}={x}" for k, x in sorted(v.values.items()))
        return f"sat\n  {vals}" if vals else "sat"
    if isinstance(v, Unknown):
        return f"unknown ({v.reason})" if v.reason else "unknown"
    if isinstance(v, ProcessError):
        return f"error: {v.detail}"
    return "unsat"


def _mode_kw(args) -> dict:
    return {"mode": args.mode, "max_sigma": args.max_sigma, "basis": args.basis}


# -- commands ----------------------------------------------------------------

def cmd_classify(args, rep: Reporter) -> int:
    _, f = _read_arca(args.file)
    cls = classify(f)
    rep.record("classify", None, str(cls), **{"class": str(cls)})
    return 0


def cmd_eliminate(args, rep: Reporter) -> int:
    symbols, f = _read_arca(args.file)
    g = eliminate_counting(f, quantifier_free=args.quantifier_free)
    rep.record("eliminate", None, _script(symbols, g).rstrip(), formula=_script(symbols, g))
    return 0


def cmd_normalize(args, rep: Reporter) -> int:
    symbols, f = _read_arca(args.file)
    out = []
    if args.simple:
        p = prepare(f)
        forms = [(r.guess.describe(), r.formula()) for r in simple_preprocess(p.form)]
    else:
        forms = [("in/out guess and reads at parameters removed", d.formula())
                 for d in eliminate_parameter_reads(prepare_general(f))]
    for i, (note, g) in enumerate(forms):
        out.append(f"; disjunct {i}: {note}\n{_script(symbols, g)}")
    text = "\n".join(out) if out else "; no disjuncts: unsatisfiable"
    rep.record("normalize", None, text.rstrip(), disjuncts=len(forms))
    return 0


def cmd_sat(args, rep: Reporter) -> int:
    _, f = _read_arca(args.file)
    cfg = _config(args)
    if args.general:
        v = decide_eflat(f, cfg, cap=args.cap)
    else:
        v = decide_simple(f, cfg, **_mode_kw(args))
    extra = {}
    if isinstance(v, Sat):
        vs, ps, _ = free_symbols(f)
        v = Sat({k: x for k, x in v.values.items() if k == "N" or k in vs | ps}, v.model,
                v.certificate)
        extra["values"] = v.values
    rep.record("sat", v.name, _verdict_text(v), **extra)
    if isinstance(v, Sat) and v.certificate is not None:
        path = args.cert or str(Path(args.file).with_suffix(".cert.json"))
        Path(path).write_text(v.certificate.dumps() + "\n")
        rep.record("certificate", v.name, f"certificate: {path}", path=path)
    return EXIT[v.name]


def cmd_oracle(args, rep: Reporter) -> int:
    _, f = _read_arca(args.file)
    m = find_model(f, Bounds(n_max=args.n_max, value_bound=args.bound))
    if m is None:
        rep.record("oracle", "unsat", "no bounded model")
    else:
        rep.record("oracle", "sat", str(m), model=m.to_dict())
    return 0


def cmd_bmc(args, rep: Reporter) -> int:
    spec = _read_system(args.file)
    res = bmc(spec, args.depth, _config(args), **_mode_kw(args))
    for d, v in enumerate(res.verdicts):
        rep.record("bmc", v.name, depth=d)
    rep.text(res.summary())
    if res.status == "counterexample":
        ok = all(replay(res.obligation))
        rep.record("replay", "sat" if ok else "error", f"replay: {'ok' if ok else 'FAILED'}",
                   depth=res.depth)
        for st in trace(spec, res.obligation.verdict.model, res.depth):
            rep.text("  " + " ".join(f"{k}={v}" for k, v in st.items()))
    rep.record("bmc-summary", res.status, depth=res.depth)
    return STATUS_EXIT[res.status]


def cmd_ic(args, rep: Reporter) -> int:
    spec = _read_system(args.file)
    res = invariant_check(spec, cfg=_config(args), **_mode_kw(args))
    for name, v in res.verdicts.items():
        rep.record(f"ic-{name}", v.name, f"{name}: {'holds' if isinstance(v, Unsat) else v.name}")
    rep.record("ic-summary", res.status, res.status)
    return STATUS_EXIT[res.status]


# -- argument parsing --------------------------------------------------------

def _global_flags(p: argparse.ArgumentParser, top: bool) -> None:
    d = (lambda x: x) if top else (lambda x: argparse.SUPPRESS)
    p.add_argument("--solver", default=d(None), help="solver executable (default: $ARCA_SOLVER, then z3)")
    p.add_argument("--solver-arg", action="append", default=d(None), help="extra solver argument")
    p.add_argument("--timeout-ms", type=int, default=d(60_000), help="per solver call")
    p.add_argument("--stats", action="store_true", default=d(False), help="per-stage timings")
    p.add_argument("--json", action="store_true", default=d(False), help="json-lines output")


def _decide_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("guarded", "strict"), default="guarded")
    p.add_argument("--max-sigma", type=int, default=4096)
    p.add_argument("--basis", choices=("atoms", "bodies"), default="atoms")


def build_parser() -> ArgumentParser:
    top = ArgumentParser(prog="arca", description=__doc__.splitlines()[0])
    _global_flags(top, True)
    sub = top.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, fn, help):
        p = sub.add_parser(name, help=help)
        _global_flags(p, False)
        p.set_defaults(fn=fn)
        return p

    p = add("classify", cmd_classify, "print the class of a formula")
    p.add_argument("file")
    p = add("eliminate", cmd_eliminate, "eliminate counting from an array-free formula")
    p.add_argument("file")
    p.add_argument("--quantifier-free", action="store_true")
    p = add("normalize", cmd_normalize, "print the normalized disjuncts")
    p.add_argument("file")
    p.add_argument("--simple", action="store_true")
    p = add("sat", cmd_sat, "decide satisfiability")
    p.add_argument("file")
    p.add_argument("--general", action="store_true", help="use the E-flat procedure")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="region cap for --general")
    p.add_argument("--cert", help="certificate path (default: <file>.cert.json)")
    _decide_flags(p)
    p = add("oracle", cmd_oracle, "search for a small model")
    p.add_argument("file")
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--bound", type=int, default=2)
    p = add("bmc", cmd_bmc, "bounded model checking")
    p.add_argument("file")
    p.add_argument("--depth", type=int, required=True)
    _decide_flags(p)
    p = add("ic", cmd_ic, "check the invariant of a system")
    p.add_argument("file")
    _decide_flags(p)
    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    rep = Reporter(args.json)
    try:
        if args.timeout_ms <= 0:
            raise ArcaError("--timeout-ms must be positive")
        with recording() as timers:
            code = args.fn(args, rep)
        if args.stats:
            for name, r in timers.report().items():
                if args.json:
                    rep.record(f"time:{name}", None, calls=r["calls"], **{"stage-ms": r["ms"]})
                else:
                    print(f"{name:>12}: {r['ms']:10.1f} ms  ({r['calls']} calls)", file=sys.stderr)
        return code
    except (ArcaError, ValueError, OSError) as e:
        rep.record("error", "error", "", message=str(e))
        print(f"arca: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
