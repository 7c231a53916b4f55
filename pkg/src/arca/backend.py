"""SMT-LIB2 emission and the external solver process.

The solver is found through ``SolverConfig.executable``, then the
``ARCA_SOLVER`` environment variable, then ``z3`` on ``PATH``.
"""
from __future__ import annotations

import os
import re
import queue
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Iterable, Optional

from .core import free_symbols, has_node
from .parser import ArcaError, Atom, SymbolTable, read_sexprs
from .syntax import (
    And, Card, Cong, Eq, Exists, Formula, Lt, Mul, Neg, Not, Num, Param, Read,
    Sum, Var,
)
from .timing import stage
from .verdict import ProcessError, Sat, Unknown, Unsat


class SolverProcessError(ArcaError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    executable: Optional[str] = None
    args: tuple = ()
    timeout_ms: int = 60_000
    logic: Optional[str] = None

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")

    def command(self) -> list:
        path = self.executable or os.environ.get("ARCA_SOLVER") or shutil.which("z3") or "z3"
        extra = list(self.args)
        if not extra and os.path.basename(path).startswith("z3"):
            extra = ["-in", "-smt2"]
        return [path] + extra


# -- emission --------------------------------------------------------------

_SIMPLE = re.compile(r"[A-Za-z~!@$%^&*_+=<>.?/-][A-Za-z0-9~!@$%^&*_+=<>.?/-]*")
_SMT_RESERVED = {
    "_", "!", "as", "let", "exists", "forall", "match", "par", "BINARY", "DECIMAL",
    "HEXADECIMAL", "NUMERAL", "STRING", "and", "or", "not", "xor", "ite", "distinct",
    "true", "false", "mod", "div", "abs", "Int", "Bool", "Real", "to_real", "to_int",
    "is_int", "assert", "check-sat", "declare-const", "declare-fun", "define-fun",
    "get-value", "push", "pop", "exit", "set-logic", "set-option",
}


def smt_symbol(name: str) -> str:
    if _SIMPLE.fullmatch(name) and name not in _SMT_RESERVED:
        return name
    return f"|{name}|"


def _num(k: int) -> str:
    return str(k) if k >= 0 else f"(- {-k})"


def _term(t, out: list) -> None:
    if isinstance(t, Num):
        out.append(_num(t.value))
    elif isinstance(t, (Var, Param)):
        out.append(smt_symbol(t.name))
    elif isinstance(t, Sum):
        out.append("(+")
        for a in t.args:
            out.append(" ")
            _term(a, out)
        out.append(")")
    elif isinstance(t, Neg):
        out.append("(- ")
        _term(t.arg, out)
        out.append(")")
    elif isinstance(t, Mul):
        out.append(f"(* {_num(t.coef)} ")
        _term(t.arg, out)
        out.append(")")
    else:
        raise ArcaError(f"cannot emit term {t!r}: arrays and counts must be eliminated first")


def _formula(f, out: list) -> None:
    if isinstance(f, (Lt, Eq)):
        out.append("(< " if isinstance(f, Lt) else "(= ")
        _term(f.left, out)
        out.append(" ")
        _term(f.right, out)
        out.append(")")
    elif isinstance(f, Cong):
        out.append("(= (mod (- ")
        _term(f.left, out)
        out.append(" ")
        _term(f.right, out)
        out.append(f") {f.modulus}) 0)")
    elif isinstance(f, And):
        if not f.args:
            out.append("true")
        elif len(f.args) == 1:
            _formula(f.args[0], out)
        else:
            out.append("(and")
            for a in f.args:
                out.append(" ")
                _formula(a, out)
            out.append(")")
    elif isinstance(f, Not):
        if f.arg == And(()):
            out.append("false")
        else:
            out.append("(not ")
            _formula(f.arg, out)
            out.append(")")
    elif isinstance(f, Exists):
        out.append(f"(exists (({smt_symbol(f.var)} Int)) ")
        _formula(f.body, out)
        out.append(")")
    else:
        raise TypeError(f"not a formula: {f!r}")


def emit_formula(f: Formula) -> str:
    out: list = []
    _formula(f, out)
    return "".join(out)


def constants_of(formulas: Iterable[Formula], symbols: Optional[SymbolTable] = None) -> list:
    names = {"N"}
    for f in formulas:
        vs, ps, _ = free_symbols(f)
        names |= vs | ps
    if symbols is not None:
        names |= symbols.params | symbols.vars
    return ["N"] + sorted(names - {"N"})


def emit_script(f: Formula, symbols: Optional[SymbolTable] = None,
                logic: Optional[str] = None, get_values: bool = True) -> str:
    """A complete SMT-LIB2 script deciding the array-free formula ``f``."""
    if has_node(f, (Read, Card)):
        raise ArcaError("emit_script needs a formula without array reads and counts")
    consts = constants_of([f], symbols)
    logic = logic or ("LIA" if has_node(f, Exists) else "QF_LIA")
    lines = [f"(set-logic {logic})"]
    lines += [f"(declare-const {smt_symbol(c)} Int)" for c in consts]
    lines.append("(assert (>= N 0))")
    lines.append(f"(assert {emit_formula(f)})")
    lines.append("(check-sat)")
    if get_values:
        lines.append(f"(get-value ({' '.join(smt_symbol(c) for c in consts)}))")
    return "\n".join(lines) + "\n"


# -- output parsing --------------------------------------------------------

def _unquote(s: str) -> str:
    return s[1:-1] if len(s) >= 2 and s[0] == "|" and s[-1] == "|" else s


def _value(sx) -> int:
    if isinstance(sx, Atom):
        return int(sx.text)
    if len(sx) == 2 and isinstance(sx[0], Atom) and sx[0].text == "-":
        return -_value(sx[1])
    raise SolverProcessError(f"unexpected value in solver output: {sx!r}")


def parse_values(text: str) -> dict:
    """Parse a ``get-value`` response ``((x 1) (y (- 2)))``."""
    # quoted symbols may contain characters the reader treats specially
    quoted = {}

    def hide(m):
        key = f"Q{len(quoted)}Q"
        quoted[key] = m.group(1)
        return key

    text = re.sub(r"\|([^|]*)\|", hide, text)
    forms = read_sexprs(text)
    out = {}
    for form in forms:
        for pair in form:
            name = pair[0].text
            out[quoted.get(name, _unquote(name))] = _value(pair[1])
    return out


def parse_response(stdout: str) -> object:
    lines = [ln for ln in stdout.splitlines() if ln.strip()]
    if not lines:
        return ProcessError("solver produced no output")
    head = lines[0].strip()
    if head == "unsat":
        return Unsat()
    if head == "unknown":
        return Unknown("unknown")
    if head == "sat":
        try:
            return Sat(values=parse_values("\n".join(lines[1:])))
        except (ArcaError, ValueError, IndexError, AttributeError) as e:
            return ProcessError(f"cannot parse model: {e}")
    if head in ("timeout", "canceled"):
        return Unknown("timeout")
    return ProcessError(stdout.strip()[:500])


def run_solver(script: str, cfg: SolverConfig = SolverConfig()):
    """Run one script through the solver and return its verdict."""
    cmd = cfg.command()
    with stage("solver"):
        try:
            proc = subprocess.run(cmd, input=script, capture_output=True, text=True,
                                  timeout=cfg.timeout_ms / 1000)
        except subprocess.TimeoutExpired:
            return Unknown("timeout")
        except OSError as e:
            return ProcessError(f"cannot run {cmd[0]}: {e}")
    verdict = parse_response(proc.stdout)
    if isinstance(verdict, ProcessError) and proc.stderr.strip():
        verdict.detail += " " + proc.stderr.strip()[:500]
    return verdict


def solve(f: Formula, cfg: SolverConfig = SolverConfig(), symbols: Optional[SymbolTable] = None):
    with stage("emit"):
        script = emit_script(f, symbols, cfg.logic)
    return run_solver(script, cfg)


# -- incremental sessions --------------------------------------------------

class Session:
    """An interactive solver process with the usual assertion stack.

    Constants are declared on first use; declarations survive ``pop``.
    A session belongs to one caller at a time.
    """

    def __init__(self, cfg: SolverConfig = SolverConfig()):
        self.cfg = cfg
        self.declared: set = set()
        self.dead = False
        try:
            self.proc = subprocess.Popen(cfg.command(), stdin=subprocess.PIPE,
                                         stdout=subprocess.PIPE, stderr=subprocess.STDOUT,
                                         text=True, bufsize=1)
        except OSError as e:
            raise SolverProcessError(f"cannot start solver: {e}") from None
        self.lines: queue.Queue = queue.Queue()
        threading.Thread(target=self._pump, daemon=True).start()
        self._send("(set-option :print-success false)")
        self._send("(set-option :global-declarations true)")
        self._send(f"(set-logic {cfg.logic or 'ALL'})")
        self.declare(["N"])
        self._send("(assert (>= N 0))")

    def _send(self, text: str) -> None:
        if self.dead or self.proc.poll() is not None:
            self.dead = True
            raise SolverProcessError("solver session is not running")
        try:
            self.proc.stdin.write(text + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            self.dead = True
            raise SolverProcessError("solver session died") from None

    def _pump(self) -> None:
        for line in self.proc.stdout:
            self.lines.put(line)
        self.lines.put("")

    def _read_line(self, deadline: float) -> Optional[str]:
        """Next output line, ``""`` at end of output, ``None`` on timeout."""
        try:
            return self.lines.get(timeout=max(0.0, deadline - time.monotonic()))
        except queue.Empty:
            return None

    def declare(self, names: Iterable[str]) -> None:
        for n in names:
            if n not in self.declared:
                self._send(f"(declare-const {smt_symbol(n)} Int)")
                self.declared.add(n)

    def add(self, f: Formula) -> None:
        if has_node(f, (Read, Card)):
            raise ArcaError("session formulas must be free of arrays and counts")
        vs, ps, _ = free_symbols(f)
        self.declare(sorted(vs | ps))
        self._send(f"(assert {emit_formula(f)})")

    def push(self) -> None:
        self._send("(push 1)")

    def pop(self) -> None:
        self._send("(pop 1)")

    def check(self, values: Iterable[str] = ()):
        values = list(values)
        try:
            with stage("solver"):
                self._send("(check-sat)")
                deadline = time.monotonic() + self.cfg.timeout_ms / 1000
                line = self._read_line(deadline)
                if line is None:
                    self.close()
                    return Unknown("timeout")
                head = line.strip()
                if head == "sat" and values:
                    self.declare(values)
                    self._send(f"(get-value ({' '.join(smt_symbol(v) for v in values)}))")
                    text, depth = "", 0
                    while True:
                        ln = self._read_line(deadline)
                        if not ln:
                            raise SolverProcessError("no model from solver")
                        text += ln
                        depth += ln.count("(") - ln.count(")")
                        if depth <= 0 and text.strip():
                            break
                    return Sat(values=parse_values(text))
        except SolverProcessError as e:
            self.dead = True
            return ProcessError(str(e))
        if not head:
            self.dead = True
            return ProcessError("solver session died")
        return parse_response(head)

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.write("(exit)\n")
                self.proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        self.dead = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_session(cfg: SolverConfig = SolverConfig()) -> Session:
    return Session(cfg)
