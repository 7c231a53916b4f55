"""Decision procedure for simple flat formulas.

A reduced form ``alpha /\\ #{x | b_l(a(x))} = z_l`` is satisfiable iff some
set of Boolean assignments to a basis of atoms generating the bodies
admits multiplicities ``v`` with ``sum(v) = N`` and ``z_l`` equal to the
sum of the multiplicities of the assignments making ``b_l`` true, each used
assignment having a witness tuple of array values.

Assignments are enumerated depth first over the basis, pruning each partial
assignment that is inconsistent with ``alpha`` (one incremental solver
check per node).  All surviving assignments then go into a single
``guarded`` system where unused assignments get multiplicity 0; ``strict``
mode instead tries explicit subsets with positive multiplicities.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .backend import SolverConfig, emit_script, open_session, run_solver
from .core import FormulaClass, classify, free_symbols, has_node, replace_terms, substitute
from .linear import simplify
from .normalize import (
    CardEq, EFlatForm, Guess, ReducedForm, lift_exists, simple_preprocess, to_eflat,
)
from .parser import ArcaError
from .semantics import FiniteModel, eval_finite
from .syntax import (
    TRUE, And, Card, Eq, Exists, Formula, Fresh, Lt, Not, Num, Param, Read, Sum, Var, all_names,
    conj, disj, gt, le, neg, show,
)
from .timing import stage
from .verdict import ProcessError, Sat, Unknown, Unsat


class NotSimpleError(ArcaError):
    pass


class TooManyAssignments(ArcaError):
    pass


def max_support(K: int) -> int:
    """``ceil(2K log2(4K))``: enough assignments with nonzero multiplicity."""
    if K < 1:
        raise ValueError("max_support needs K >= 1")
    return math.ceil(2 * K * math.log2(4 * K))


def _support_bound(K: int) -> int:
    return max_support(K) if K >= 1 else 1


# -- bounded universals ------------------------------------------------------

def _conjuncts(f):
    if isinstance(f, And):
        out = []
        for a in f.args:
            out.extend(_conjuncts(a))
        return out
    return [f]


def _is(f, g) -> bool:
    return simplify(f) == simplify(g)


def _bounded_body(e: Exists):
    """For ``exists x. 0 <= x /\\ x < N /\\ R`` return ``not R``, else None."""
    x = Var(e.var)
    lo, hi = le(Num(0), x), Lt(x, Param("N"))
    rest, seen_lo, seen_hi = [], False, False
    for c in _conjuncts(e.body):
        if not has_node(c, (Read, Card)) and free_symbols(c)[0] == {e.var}:
            if not seen_lo and _is(c, lo):
                seen_lo = True
                continue
            if not seen_hi and _is(c, hi):
                seen_hi = True
                continue
        rest.append(c)
    if not (seen_lo and seen_hi):
        return None
    return neg(conj(*rest))


def rewrite_bounded_universal(f: Formula, record: Optional[set] = None) -> Formula:
    """Replace ``forall x. 0 <= x /\\ x < N -> b`` by ``N = #{x | b}``.

    The count terms introduced are added to ``record`` so that their
    bodies can be pinned to true.  Universals whose body mentions an
    enclosing bound variable, or that sit inside a count, are kept.
    """
    def go(n, bound):
        if isinstance(n, Not) and isinstance(n.arg, Exists):
            body = _bounded_body(n.arg)
            if body is not None:
                body = go(body, frozenset())
                if not has_node(body, (Read, Card)):
                    body = simplify(body)
                card = Card(n.arg.var, body)
                if not (free_symbols(card)[0] & bound):
                    if record is not None:
                        record.add(card)
                    return Eq(Param("N"), card)
        if isinstance(n, Card):
            return n
        if isinstance(n, Exists):
            inner = go(n.body, bound | {n.var})
            return n if inner is n.body else Exists(n.var, inner)
        if isinstance(n, Not):
            inner = go(n.arg, bound)
            return n if inner is n.arg else Not(inner)
        if isinstance(n, And):
            kids = tuple(go(a, bound) for a in n.args)
            return n if kids == n.args else And(kids)
        return n

    return go(f, frozenset())


# -- case splitting ----------------------------------------------------------

def _disjuncts(f):
    if isinstance(f, Not) and isinstance(f.arg, And):
        return [neg(a) for a in f.arg.args]
    return None


def _mentions(f, names) -> bool:
    return bool(free_symbols(f)[0] & names)


def _arith_part(parts) -> Formula:
    return conj(*(p for p in parts if not has_node(p, (Read, Card))))


def split_cases(e: EFlatForm, cfg: SolverConfig) -> Iterable:
    """Split top-level disjunctions that mention pinned count results, so
    that within each case every pinned count is asserted to equal ``N`` at
    top level.  Cases whose arithmetic part is already unsatisfiable are
    dropped.  Cards no longer referenced are removed."""
    pinned = {c.result for c in e.cards if c.pinned}

    def consistent(parts):
        if not pinned:
            return True
        v = run_solver(emit_script(_arith_part(parts), get_values=False), cfg)
        return not isinstance(v, Unsat)

    def go(done, todo):
        if not todo:
            yield done
            return
        c, rest = todo[0], todo[1:]
        ds = _disjuncts(c) if pinned else None
        if ds is not None and _mentions(c, pinned):
            for d in ds:
                branch = done + _conjuncts(d)
                if consistent(branch + [p for p in rest if not _disjuncts(p)]):
                    yield from go(branch, rest)
            return
        yield from go(done + [c], rest)

    for parts in go([], _conjuncts(e.matrix)):
        yield _case_form(e, parts)


def _case_form(e: EFlatForm, parts) -> EFlatForm:
    matrix = conj(*parts)
    top = set()
    for p in parts:
        if isinstance(p, Eq):
            for a, b in ((p.left, p.right), (p.right, p.left)):
                if a == Param("N") and isinstance(b, Var):
                    top.add(b.name)
    by_result = {c.result: c for c in e.cards}
    keep, stack = set(), list(free_symbols(matrix)[0] & set(by_result))
    while stack:
        z = stack.pop()
        if z in keep:
            continue
        keep.add(z)
        stack += list(free_symbols(by_result[z].body)[0] & set(by_result))
    cards = tuple(CardEq(c.var, c.body, c.result, c.pinned and c.result in top)
                  for c in e.cards if c.result in keep)
    zs = tuple(z for z in e.zs if z not in by_result or z in keep)
    return EFlatForm(matrix, cards, zs)


# -- the assignment system ---------------------------------------------------

def _atoms_of(f) -> list:
    """Maximal non-Boolean subformulas, in order of appearance."""
    if isinstance(f, And):
        return [a for g in f.args for a in _atoms_of(g)]
    if isinstance(f, Not):
        return _atoms_of(f.arg)
    return [f]


@dataclass(frozen=True)
class AtomBasis:
    """Formulas over the template names whose Boolean combinations give
    every body.  The first ``pinned`` members are forced to true."""

    atoms: tuple
    provenance: str = "syntactic-atoms"
    pinned: int = 0

    def __len__(self):
        return len(self.atoms)


@dataclass
class SigmaProblem:
    """A reduced form with its bodies rewritten over template names
    ``w!a`` standing for ``a(x)``."""

    reduced: ReducedForm
    template: dict
    bodies: list
    basis: AtomBasis
    fresh: Fresh

    @staticmethod
    def of(r: ReducedForm, basis: str = "atoms") -> "SigmaProblem":
        fresh = Fresh(all_names(r.formula()))
        arrays = sorted(set(r.arrays) | set(r.form.arrays()))
        template = {a: fresh("w") + f"!{a}" for a in arrays}
        fresh.reserve(template.values())
        X = r.form.var
        mapping = {Read(a, Var(X)): Var(w) for a, w in template.items()}
        bodies = [replace_terms(c.body, mapping) for c in r.cards]
        pinned = list(dict.fromkeys(b for b, c in zip(bodies, r.cards) if c.pinned))
        free = [b for b, c in zip(bodies, r.cards) if not c.pinned]
        if basis == "bodies":
            rest = [b for b in dict.fromkeys(free) if b not in pinned]
            prov = "bodies"
        elif basis == "atoms":
            rest = [a for a in dict.fromkeys(a for b in free for a in _atoms_of(b))
                    if a not in pinned]
            prov = "syntactic-atoms"
        else:
            raise ValueError(f"unknown basis {basis!r}")
        return SigmaProblem(r, template, bodies, AtomBasis(tuple(pinned + rest), prov, len(pinned)),
                            fresh)

    @property
    def K(self) -> int:
        return len(self.bodies)

    def witness_names(self, i: int) -> dict:
        return {a: f"{w}!{i}" for a, w in self.template.items()}

    def at(self, f, i: int):
        names = self.witness_names(i)
        for a, w in self.template.items():
            f = substitute(f, w, Var(names[a]))
        return f

    def literal(self, j: int, value: int):
        a = self.basis.atoms[j]
        return a if value else neg(a)

    def cube(self, sigma) -> Formula:
        return conj(*(self.literal(j, v) for j, v in enumerate(sigma)))


def enumerate_assignments(basis: AtomBasis, alpha: Formula, session,
                          cap: Optional[int] = None) -> list:
    """Depth-first enumeration of the full assignments to ``basis`` that are
    consistent with ``alpha``; pinned members only take the value 1.

    Raises :class:`TooManyAssignments` beyond ``cap`` survivors and
    :class:`~arca.backend.SolverProcessError` style failures as
    :class:`ProcessError` verdicts through ``UnknownAssignment``.
    """
    out: list = []
    atoms = basis.atoms

    def check():
        v = session.check()
        if isinstance(v, (Unknown, ProcessError)):
            raise _Inconclusive(v)
        return isinstance(v, Sat)

    def go(j, prefix):
        if j == len(atoms):
            out.append(tuple(prefix))
            if cap is not None and len(out) > cap:
                raise TooManyAssignments(f"more than {cap} consistent assignments")
            return
        values = (1,) if j < basis.pinned else (1, 0)
        first_unsat = False
        for val in values:
            session.push()
            session.add(atoms[j] if val else neg(atoms[j]))
            # once the positive literal is refuted the negative one is implied
            ok = True if (val == 0 and first_unsat) else check()
            if ok:
                go(j + 1, prefix + [val])
            elif val == 1:
                first_unsat = True
            session.pop()

    session.push()
    session.add(alpha)
    try:
        with stage("enumerate"):
            if check():
                go(0, [])
    finally:
        session.pop()
    return out


class _Inconclusive(Exception):
    def __init__(self, verdict):
        self.verdict = verdict


@dataclass
class SigmaSystem:
    sigma: list
    v: list
    witnesses: list
    mode: str
    formula: Formula


def _eval_body(body, values: dict, n: int) -> bool:
    vs, ps, _ = free_symbols(body)
    m = FiniteModel(n, params={p: values[p] for p in ps if p != "N"},
                    vars={v: values[v] for v in vs})
    return eval_finite(body, m, quantifier_bound=max([n] + [abs(x) for x in values.values()]) + 1)


def _projection(prob: SigmaProblem, sigma) -> tuple:
    """``[[b_l]]^sigma`` computed propositionally from the basis values."""
    truth = dict(zip(prob.basis.atoms, sigma))

    def ev(f):
        if f in truth:
            return bool(truth[f])
        if isinstance(f, And):
            return all(ev(a) for a in f.args)
        if isinstance(f, Not):
            return not ev(f.arg)
        raise KeyError(f)

    return tuple(int(ev(b)) for b in prob.bodies)


def build_sigma_system(prob: SigmaProblem, sigma: list, mode: str = "guarded") -> SigmaSystem:
    """The linear system over multiplicities ``v!i`` with Skolemized
    witnesses ``w!k!a!i`` for each assignment."""
    if mode not in ("strict", "guarded"):
        raise ValueError(f"unknown mode {mode!r}")
    r = prob.reduced
    vs = [f"v!{i}" for i in range(len(sigma))]
    prob.fresh.reserve(vs)
    parts = [r.matrix]
    proj = [_projection(prob, s) for s in sigma]
    for i, s in enumerate(sigma):
        v = Var(vs[i])
        wit = prob.at(prob.cube(s), i)
        if mode == "strict":
            parts += [gt(v, Num(0)), wit]
        else:
            parts += [le(Num(0), v), disj(le(v, Num(0)), wit)]
    for l, c in enumerate(r.cards):
        used = [Var(vs[i]) for i in range(len(sigma)) if proj[i][l]]
        parts.append(Eq(Var(c.result), _sum(used)))
    parts.append(Eq(_sum([Var(v) for v in vs]), Param("N")))
    return SigmaSystem(list(sigma), vs, [prob.witness_names(i) for i in range(len(sigma))],
                       mode, conj(*parts))


def _sum(ts):
    if not ts:
        return Num(0)
    return ts[0] if len(ts) == 1 else Sum(tuple(ts))


# -- certificates ------------------------------------------------------------

@dataclass
class SatCertificate:
    """Assignments with nonzero multiplicity, their witnesses and values
    for every other constant of the reduced form."""

    basis: tuple
    sigma: list
    multiplicity: list
    witness: list
    values: dict
    guess: Guess = field(default_factory=Guess)
    K: int = 0

    @property
    def n(self) -> int:
        return self.values["N"]

    @property
    def support(self) -> int:
        return sum(1 for v in self.multiplicity if v > 0)

    def to_json(self) -> dict:
        return {
            "values": dict(sorted(self.values.items())),
            "basis": [show(a) for a in self.basis],
            "sigma": [{"assignment": "".join(map(str, s)), "v": v, "witness": dict(sorted(w.items()))}
                      for s, v, w in zip(self.sigma, self.multiplicity, self.witness)],
            "guess": self.guess.describe(),
            "K": self.K,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _certificate(prob: SigmaProblem, system: SigmaSystem, values: dict) -> SatCertificate:
    """Keep the assignments with positive multiplicity, merging those with
    the same body projection into the first of them."""
    merged: dict = {}
    for i, s in enumerate(system.sigma):
        v = values.get(system.v[i], 0)
        if v <= 0:
            continue
        key = _projection(prob, s)
        if key in merged:
            merged[key][1] += v
        else:
            w = {a: values.get(n, 0) for a, n in system.witnesses[i].items()}
            merged[key] = [s, v, w]
    drop = set(system.v) | {n for w in system.witnesses for n in w.values()}
    rest = {k: val for k, val in values.items() if k not in drop}
    rows = list(merged.values())
    return SatCertificate(prob.basis.atoms, [r[0] for r in rows], [r[1] for r in rows],
                          [r[2] for r in rows], rest, prob.reduced.guess, prob.K)


def materialize(prob: SigmaProblem, c: SatCertificate) -> Optional[FiniteModel]:
    """Lay the witness tuples out block by block over ``[0, N)``, then move
    tuples so that every in-range read index holds the tuple its read
    stands for.  ``None`` when that is impossible."""
    r = prob.reduced
    n = c.n
    arrays = sorted(prob.template)
    slots = []
    for w, v in zip(c.witness, c.multiplicity):
        slots += [tuple(w[a] for a in arrays)] * v
    if len(slots) != n:
        return None
    required = {}
    g = c.guess
    u = dict(g.u)
    for j, block in enumerate(g.blocks):
        pos = _term_value(block[0], c.values)
        want = tuple(c.values[u[(a, j)]] if (a, j) in u else None for a in arrays)
        required[pos] = want
    layout: list = [None] * n
    free = list(range(n))
    for pos, want in required.items():
        if not 0 <= pos < n:
            return None
        k = next((i for i in free if all(w is None or w == x for w, x in zip(want, slots[i]))), None)
        if k is None:
            return None
        free.remove(k)
        layout[pos] = slots[k]
    rest = iter(free)
    for pos in range(n):
        if layout[pos] is None:
            layout[pos] = slots[next(rest)]
    vs, ps, arrs = free_symbols(r.formula())
    arrays_all = sorted(set(arrays) | set(arrs))
    return FiniteModel(
        n,
        params={p: c.values.get(p, 0) for p in sorted(ps - {"N"})},
        vars={k: val for k, val in c.values.items() if k != "N" and k not in ps},
        arrays={a: [layout[i][arrays.index(a)] if a in arrays else 0 for i in range(n)]
                for a in arrays_all},
    )


def _term_value(t, values) -> int:
    if isinstance(t, Num):
        return t.value
    return values[t.name] if t.name != "N" else values["N"]


def verify_certificate(r: ReducedForm, c: SatCertificate, materialize_bound: int = 6,
                       prob: Optional[SigmaProblem] = None) -> bool:
    """Check the certificate arithmetically; when ``N`` is at most
    ``materialize_bound`` also build the array model and evaluate ``r``."""
    prob = prob or SigmaProblem.of(r)
    vals = dict(c.values)
    n = vals.get("N")
    if n is None or n < 0 or len(c.sigma) != len(c.multiplicity) or len(c.sigma) != len(c.witness):
        return False
    if any(v <= 0 for v in c.multiplicity) or sum(c.multiplicity) != n:
        return False
    basis = list(c.basis)
    try:
        for s, w in zip(c.sigma, c.witness):
            env = dict(vals)
            for a, tmpl in prob.template.items():
                env[tmpl] = w.get(a, 0)
            if len(s) != len(basis):
                return False
            for a, bit in zip(basis, s):
                if _eval_body(a, env, n) != bool(bit):
                    return False
        for l, card in enumerate(r.cards):
            total = 0
            for w, v in zip(c.witness, c.multiplicity):
                env = dict(vals)
                for a, tmpl in prob.template.items():
                    env[tmpl] = w.get(a, 0)
                if _eval_body(prob.bodies[l], env, n):
                    total += v
            if vals.get(card.result) != total:
                return False
        if not _eval_body(r.matrix, vals, n):
            return False
    except KeyError:
        return False
    if n <= materialize_bound:
        m = materialize(prob, c)
        if m is None:
            return False
        body = conj(r.matrix, *(cd.formula() for cd in r.cards))
        q = max([n] + [abs(x) for x in vals.values()]) + 1
        if not eval_finite(body, m, quantifier_bound=q):
            return False
    return True


# -- deciding ------------------------------------------------------------------

def _solve_system(system: SigmaSystem, cfg: SolverConfig, extra: Formula = TRUE):
    f = conj(system.formula, extra)
    with stage("emit"):
        script = emit_script(f, logic=cfg.logic)
    return run_solver(script, cfg)


def _support_constraint(system: SigmaSystem, bound: int, fresh: Fresh) -> Formula:
    """At most ``bound`` multiplicities are positive."""
    bs = [fresh("b") for _ in system.v]
    parts = []
    for v, b in zip(system.v, bs):
        parts += [le(Num(0), Var(b)), le(Var(b), Num(1)), disj(le(Var(v), Num(0)), Eq(Var(b), Num(1)))]
    parts.append(le(_sum([Var(b) for b in bs]), Num(bound)))
    return conj(*parts)


@dataclass
class ReducedOutcome:
    verdict: object
    problem: Optional[SigmaProblem] = None
    sigma_count: int = 0


def decide_reduced(r: ReducedForm, cfg: SolverConfig = SolverConfig(), mode: str = "guarded",
                   max_sigma: int = 4096, basis: str = "atoms",
                   materialize_bound: int = 6) -> ReducedOutcome:
    prob = SigmaProblem.of(r, basis)
    try:
        with open_session(cfg) as session:
            sigma_all = enumerate_assignments(prob.basis, r.matrix, session, cap=max_sigma)
    except TooManyAssignments as e:
        return ReducedOutcome(Unknown(str(e)), prob)
    except _Inconclusive as e:
        return ReducedOutcome(e.verdict, prob)
    M = _support_bound(prob.K)
    if mode == "strict":
        verdict = _decide_strict(prob, sigma_all, M, cfg, max_sigma)
    else:
        verdict = _decide_guarded(prob, sigma_all, M, cfg)
    if isinstance(verdict, Sat):
        cert = verdict.certificate
        if not verify_certificate(r, cert, materialize_bound, prob):
            return ReducedOutcome(ProcessError("solver model failed certificate verification"),
                                  prob, len(sigma_all))
        if cert.n <= materialize_bound:
            verdict.model = materialize(prob, cert)
    return ReducedOutcome(verdict, prob, len(sigma_all))


def _values_for(f: Formula) -> list:
    vs, ps, _ = free_symbols(f)
    return ["N"] + sorted((vs | ps) - {"N"})


def _sat_from(prob, system, verdict):
    cert = _certificate(prob, system, verdict.values)
    return Sat(values=cert.values, certificate=cert)


def _decide_guarded(prob, sigma_all, M, cfg):
    system = build_sigma_system(prob, sigma_all, "guarded")
    v = _solve_system(system, cfg)
    if not isinstance(v, Sat):
        return v
    cert = _certificate(prob, system, v.values)
    if len(cert.sigma) > M:
        # a solution with small support exists; ask for it explicitly
        v2 = _solve_system(system, cfg, _support_constraint(system, M, prob.fresh))
        if isinstance(v2, Sat):
            return _sat_from(prob, system, v2)
    return Sat(values=cert.values, certificate=cert)


def _decide_strict(prob, sigma_all, M, cfg, max_subsets):
    tried = 0
    saw_unknown = None
    for size in range(0, min(M, len(sigma_all)) + 1):
        for subset in itertools.combinations(sigma_all, size):
            tried += 1
            if tried > max_subsets:
                return Unknown(f"strict mode: more than {max_subsets} subsets")
            system = build_sigma_system(prob, list(subset), "strict")
            v = _solve_system(system, cfg)
            if isinstance(v, Sat):
                return _sat_from(prob, system, v)
            if not isinstance(v, Unsat):
                saw_unknown = v
    return saw_unknown or Unsat()


SIMPLE_CLASSES = (FormulaClass.Arithmetic, FormulaClass.Basic, FormulaClass.SimpleFlat,
                  FormulaClass.SimpleEFlat)


@dataclass
class Prepared:
    """A formula made ready for the simple procedure."""

    original: Formula
    lifted: Formula
    rewritten: Formula
    form: EFlatForm
    lifted_names: list


def prepare(f: Formula) -> Prepared:
    lifted, names = lift_exists(f)
    pins: set = set()
    rewritten = rewrite_bounded_universal(lifted, pins)
    cls = classify(rewritten)
    if cls not in SIMPLE_CLASSES:
        raise NotSimpleError(f"decide_simple needs a simple flat formula, got {cls}")
    return Prepared(f, lifted, rewritten, to_eflat(rewritten, pins), names)


def decide_simple(f: Formula, cfg: SolverConfig = SolverConfig(), mode: str = "guarded",
                  max_sigma: int = 4096, basis: str = "atoms",
                  materialize_bound: int = 6):
    """Sat (with a verified certificate), Unsat, Unknown or ProcessError."""
    p = prepare(f)
    pending = None
    for case in split_cases(p.form, cfg):
        for r in simple_preprocess(case):
            out = decide_reduced(r, cfg, mode, max_sigma, basis, materialize_bound)
            v = out.verdict
            if isinstance(v, Sat):
                if v.model is not None:
                    _restrict_model(v, p)
                return v
            if not isinstance(v, Unsat) and pending is None:
                pending = v
    return pending or Unsat()


def _restrict_model(v: Sat, p: Prepared) -> None:
    """Keep the model's scalars to the symbols of the lifted formula so
    it can be replayed against it (lifted names carry the witnesses of
    the original existentials)."""
    vs, ps, arrs = free_symbols(p.lifted)
    m = v.model
    arrays = {a: m.arrays.get(a, [0] * m.n) for a in sorted(arrs)}
    v.model = FiniteModel(m.n, {k: m.params.get(k, v.values.get(k, 0)) for k in sorted(ps - {"N"})},
                          {k: m.vars.get(k, v.values.get(k, 0)) for k in sorted(vs)}, arrays)
