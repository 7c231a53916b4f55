"""Bounded model checking and invariant checking for parametric systems.

A system file (``.arcs``) reads::

    (system
      (params N ...)            ; constant scalars
      (state-vars pc ...)       ; scalars with a copy per step
      (state-arrays IT ...)     ; arrays with a copy per step
      (arrays F ...)            ; optional: arrays fixed along a run
      (axiom F)*                ; conjoined at every step
      (init F) (trans F) (unsafe F)? (invariant F)?)

Inside ``trans`` the next-state copy of ``v`` is written ``v'``.  Step ``k``
copies are named ``v__k``; user symbols may not contain ``__``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .backend import SolverConfig
from .core import free_symbols
from .normalize import lift_exists
from .parser import ArcaError, ArcaSyntaxError, Atom, FormulaReader, SymbolTable, check_symbol, read_sexprs
from .semantics import FiniteModel, eval_finite
from .simple import decide_simple, prepare, NotSimpleError
from .syntax import (
    FALSE, TRUE, Formula, Fresh, Param, Read, Var, all_names, children, conj, neg, rebuild,
)
from .verdict import Sat, Unsat

SECTIONS = ("params", "state-vars", "state-arrays", "arrays", "axiom", "init", "trans",
            "unsafe", "invariant")


@dataclass
class SystemSpec:
    params: tuple
    state_vars: tuple
    state_arrays: tuple
    rigid_arrays: tuple = ()
    axioms: list = field(default_factory=list)
    init: Formula = TRUE
    trans: Formula = TRUE
    unsafe: Optional[Formula] = None
    invariant: Optional[Formula] = None

    def at(self, f: Formula, k: int) -> Formula:
        """``f`` with unprimed state symbols renamed to step ``k`` and primed
        ones to step ``k + 1``."""
        sv, sa = set(self.state_vars), set(self.state_arrays)

        def name(n):
            if n.endswith("'") and n[:-1] in sv | sa:
                return f"{n[:-1]}__{k + 1}"
            if n in sv or n in sa:
                return f"{n}__{k}"
            return n

        def go(node):
            if isinstance(node, Var):
                return Var(name(node.name))
            if isinstance(node, Read):
                return Read(name(node.array), go(node.index))
            kids = children(node)
            if not kids:
                return node
            new = tuple(go(c) for c in kids)
            return rebuild(node, new) if new != kids else node

        return go(f)


def _reader(table: SymbolTable, state_vars, state_arrays, primed: bool) -> FormulaReader:
    sv, sa = set(state_vars), set(state_arrays)

    def scalar(name, atom):
        kind = table.kind(name)
        if kind == "param":
            return Param(name)
        if kind == "var":
            return Var(name)
        if name.endswith("'") and name[:-1] in sv:
            if not primed:
                raise ArcaSyntaxError(f"primed symbol {name} outside trans", atom.line, atom.col)
            return Var(name)
        return None

    def array_name(name, atom):
        if name in table.arrays:
            return name
        if name.endswith("'") and name[:-1] in sa:
            if not primed:
                raise ArcaSyntaxError(f"primed symbol {name} outside trans", atom.line, atom.col)
            return name
        return None

    return FormulaReader(table, array_name=array_name, scalar=scalar)


def load_system(text: str, require_unsafe: bool = False) -> SystemSpec:
    forms = read_sexprs(text)
    if len(forms) != 1 or not isinstance(forms[0], list) or not forms[0] \
            or not isinstance(forms[0][0], Atom) or forms[0][0].text != "system":
        raise ArcaSyntaxError("expected a single (system ...) form")
    lists = {"params": [], "state-vars": [], "state-arrays": [], "arrays": []}
    bodies: dict = {"axiom": []}
    for sec in forms[0][1:]:
        if not isinstance(sec, list) or not sec or not isinstance(sec[0], Atom):
            raise ArcaSyntaxError("expected a section", getattr(sec, "line", 0), getattr(sec, "col", 0))
        head = sec[0].text
        if head in lists:
            for a in sec[1:]:
                name = check_symbol(a)
                if "__" in name or name.endswith("'"):
                    raise ArcaSyntaxError(f"symbol {name!r} may not contain '__' or end in a prime",
                                          a.line, a.col)
                lists[head].append(name)
        elif head in SECTIONS:
            if len(sec) != 2:
                raise ArcaSyntaxError(f"({head} F) takes one formula", sec.line, sec.col)
            if head == "axiom":
                bodies["axiom"].append(sec[1])
            elif head in bodies:
                raise ArcaSyntaxError(f"duplicate section {head}", sec.line, sec.col)
            else:
                bodies[head] = sec[1]
        else:
            raise ArcaSyntaxError(f"unknown section {head!r}", sec[0].line, sec[0].col)
    for required in ("init", "trans"):
        if required not in bodies:
            raise ArcaError(f"system has no {required} section")
    if require_unsafe and "unsafe" not in bodies:
        raise ArcaError("system has no unsafe section")
    table = SymbolTable()
    try:
        for p in lists["params"]:
            if p != "N":
                table.declare("param", p)
        for v in lists["state-vars"]:
            table.declare("var", v)
        for a in lists["state-arrays"] + lists["arrays"]:
            table.declare("array", a)
    except ArcaError as e:
        raise ArcaSyntaxError(str(e)) from None
    sv, sa = lists["state-vars"], lists["state-arrays"]

    def read(sx, primed=False):
        f = _reader(table, sv, sa, primed).read(sx)
        for n in all_names(f):
            if "__" in n:
                raise ArcaSyntaxError(f"symbol {n!r} may not contain '__'")
        return f

    spec = SystemSpec(
        tuple(lists["params"]), tuple(sv), tuple(sa), tuple(lists["arrays"]),
        axioms=[read(a) for a in bodies["axiom"]],
        init=read(bodies["init"]),
        trans=read(bodies["trans"], primed=True),
        unsafe=read(bodies["unsafe"]) if "unsafe" in bodies else None,
        invariant=read(bodies["invariant"]) if "invariant" in bodies else None,
    )
    for label, f in [("init", spec.init), ("trans", spec.trans), ("unsafe", spec.unsafe),
                     ("invariant", spec.invariant)] + [("axiom", a) for a in spec.axioms]:
        if f is None:
            continue
        try:
            prepare(f)
        except (NotSimpleError, ArcaError) as e:
            raise ArcaError(f"{label} is not simple flat: {e}") from None
    return spec


def load_file(path) -> SystemSpec:
    with open(path) as fh:
        return load_system(fh.read())


def shipped(name: str) -> str:
    """Text of a system file shipped with the package."""
    return resources.files("arca").joinpath("data").joinpath(name).read_text()


# -- obligations ---------------------------------------------------------------

def _axioms(spec: SystemSpec, steps) -> list:
    out = []
    for k in steps:
        out += [spec.at(a, k) for a in spec.axioms]
    return list(dict.fromkeys(out))


def unroll_parts(spec: SystemSpec, d: int) -> list:
    """``[axioms..., init_0, trans_0_1, ..., trans_{d-1}_d, unsafe_d]``."""
    if d < 0:
        raise ValueError("depth must be >= 0")
    if spec.unsafe is None:
        raise ArcaError("system has no unsafe section")
    parts = _axioms(spec, range(d + 1))
    parts.append(spec.at(spec.init, 0))
    parts += [spec.at(spec.trans, k) for k in range(d)]
    parts.append(spec.at(spec.unsafe, d))
    return parts


def unroll(spec: SystemSpec, d: int) -> Formula:
    return conj(*unroll_parts(spec, d))


def _lift_parts(parts) -> list:
    fresh = Fresh(set().union(*(all_names(p) for p in parts)) if parts else ())
    return [lift_exists(p, fresh)[0] for p in parts]


@dataclass
class Obligation:
    parts: list
    verdict: object = None

    @property
    def formula(self) -> Formula:
        return conj(*self.parts)


def _decide(parts, cfg, **kw) -> Obligation:
    lifted = _lift_parts(parts)
    ob = Obligation(lifted)
    ob.verdict = decide_simple(ob.formula, cfg, **kw)
    return ob


def replay(ob: Obligation) -> list:
    """Truth of every conjunct of a satisfied obligation in its model."""
    m = ob.verdict.model
    q = max([m.n] + [abs(v) for v in ob.verdict.values.values()]) + 1
    full = FiniteModel(m.n, dict(m.params), {**{k: v for k, v in ob.verdict.values.items()
                                                 if k != "N" and k not in m.params}, **m.vars},
                       dict(m.arrays))
    for p in ob.parts:
        for a in free_symbols(p)[2]:
            full.arrays.setdefault(a, [0] * m.n)
    return [eval_finite(p, full, quantifier_bound=q) for p in ob.parts]


def trace(spec: SystemSpec, model: FiniteModel, d: int) -> list:
    """Per-step state of a counterexample model."""
    steps = []
    for k in range(d + 1):
        st = {"step": k}
        for v in spec.state_vars:
            st[v] = model.vars.get(f"{v}__{k}")
        for a in spec.state_arrays:
            st[a] = model.arrays.get(f"{a}__{k}")
        steps.append(st)
    return steps


@dataclass
class BmcResult:
    verdicts: list
    status: str               # "safe", "counterexample" or "unknown"
    depth: int
    obligation: Optional[Obligation] = None

    @property
    def certificate(self):
        return self.obligation.verdict.certificate if self.obligation else None

    def summary(self) -> str:
        if self.status == "safe":
            return f"safe up to depth {self.depth}"
        if self.status == "counterexample":
            return f"counterexample at depth {self.depth}"
        return f"unknown at depth {self.depth}"


def bmc(spec: SystemSpec, max_depth: int, cfg: SolverConfig = SolverConfig(), **kw) -> BmcResult:
    """Check ``unroll(spec, d)`` for ``d = 0 .. max_depth``, stopping at the
    first satisfiable depth."""
    if spec.unsafe is None:
        raise ArcaError("bmc needs an unsafe section")
    verdicts = []
    for d in range(max_depth + 1):
        ob = _decide(unroll_parts(spec, d), cfg, **kw)
        verdicts.append(ob.verdict)
        if isinstance(ob.verdict, Sat):
            return BmcResult(verdicts, "counterexample", d, ob)
        if not isinstance(ob.verdict, Unsat):
            return BmcResult(verdicts, "unknown", d, ob)
    return BmcResult(verdicts, "safe", max_depth)


@dataclass
class IcResult:
    initiation: Obligation
    consecution: Obligation
    safety: Obligation

    @property
    def verdicts(self) -> dict:
        return {"initiation": self.initiation.verdict, "consecution": self.consecution.verdict,
                "safety": self.safety.verdict}

    @property
    def confirmed(self) -> bool:
        return all(isinstance(v, Unsat) for v in self.verdicts.values())

    @property
    def status(self) -> str:
        if self.confirmed:
            return "confirmed"
        if any(isinstance(v, Sat) for v in self.verdicts.values()):
            return "refuted"
        return "unknown"


def invariant_check(spec: SystemSpec, phi: Optional[Formula] = None,
                    cfg: SolverConfig = SolverConfig(), **kw) -> IcResult:
    phi = phi if phi is not None else spec.invariant
    if phi is None:
        raise ArcaError("no invariant given")
    unsafe = spec.unsafe if spec.unsafe is not None else FALSE
    init = _decide(_axioms(spec, [0]) + [spec.at(spec.init, 0), neg(spec.at(phi, 0))], cfg, **kw)
    cons = _decide(_axioms(spec, [0, 1]) + [spec.at(phi, 0), spec.at(spec.trans, 0),
                                            neg(spec.at(phi, 1))], cfg, **kw)
    safe = _decide(_axioms(spec, [0]) + [spec.at(phi, 0), spec.at(unsafe, 0)], cfg, **kw)
    return IcResult(init, cons, safe)
