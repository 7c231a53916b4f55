"""Decision procedure for E-flat (hence flat) formulas.

After reads at parameters are gone and the bodies form a partition, the
form is equisatisfiable with a constraint formula over one count per set
``S`` of bodies: ``z_S`` counts the positions ``x`` where exactly the bodies
in ``S`` can be made true by some choice of array values.  Splitting
variables ``z_{l,S}`` distribute those positions among the bodies.  The
counts are then eliminated and the arithmetic result goes to the solver.

Regions are enumerated depth first; a set whose defining formula has no
position in ``[0, N)`` under any model of the matrix has count 0 and is
left out.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .backend import SolverConfig, emit_script, open_session, run_solver
from .core import FormulaClass, classify, free_symbols, replace_terms
from .counting import CountAtom, eliminate_count_atom
from .linear import qe
from .normalize import (
    EFlatForm, _param_reads, eliminate_parameter_reads, lift_exists, make_partition,
    to_eflat,
)
from .parser import ArcaError
from .simple import _Inconclusive, _sum, rewrite_bounded_universal
from .syntax import (
    Card, Eq, Formula, Fresh, Lt, Num, Param, Read, Var, all_names, conj, exists_many, le, neg,
    walk,
)
from .timing import stage
from .verdict import ProcessError, Sat, Unknown, Unsat

DEFAULT_CAP = 8


class ResourceCapError(ArcaError):
    pass


@dataclass
class VennSystem:
    base: Formula
    cards: tuple                      # results z_l of the partitioned bodies
    regions: list                     # (S, z_S, body_S) with S a tuple of body indices
    split: dict = field(default_factory=dict)   # (l, S) -> z_{l,S}
    var: str = "x"
    some: tuple = ()                  # exists u. beta_l, one per body
    qf: tuple = ()                    # their quantifier-free equivalents

    def region_body(self, S, quantifier_free: bool = False) -> Formula:
        some = self.qf if quantifier_free else self.some
        return conj(*(some[l] if l in S else neg(some[l]) for l in range(len(some))))

    def count_atoms(self, quantifier_free: bool = False) -> list:
        return [CountAtom(z, self.var, self.region_body(S, quantifier_free))
                for S, z, _ in self.regions]

    def linear(self) -> Formula:
        parts = []
        for S, z, _ in self.regions:
            parts.append(Eq(Var(z), _sum([Var(self.split[(l, S)]) for l in S])))
        for l, zl in enumerate(self.cards):
            parts.append(Eq(Var(zl), _sum([Var(self.split[(l, S)]) for S, _, _ in self.regions
                                           if l in S])))
        parts += [le(Num(0), Var(v)) for v in self.split.values()]
        return conj(*parts)

    def formula(self) -> Formula:
        """The constraint formula: counts are still ``Card`` terms."""
        counts = [Eq(Var(z), Card(self.var, body)) for _, z, body in self.regions]
        return conj(self.base, *counts, self.linear())

    def arithmetic(self, fresh: Optional[Fresh] = None) -> Formula:
        fresh = fresh or Fresh(all_names(self.formula()))
        with stage("count-elim"):
            counts = [eliminate_count_atom(a, fresh) for a in self.count_atoms(True)]
        return conj(self.base, *counts, self.linear())


def _range(x: str) -> Formula:
    return conj(le(Num(0), Var(x)), Lt(Var(x), Param("N")))


def _templates(e: EFlatForm, fresh: Fresh):
    X = e.var
    arrays = e.arrays()
    out = []
    for l, c in enumerate(e.cards):
        names = {a: fresh("u") for a in arrays}
        body = replace_terms(c.body, {Read(a, Var(X)): Var(n) for a, n in names.items()})
        if any(isinstance(r, Read) for r in _reads(body)):
            raise ArcaError("bodies may read arrays only at the counting variable")
        out.append(exists_many([names[a] for a in arrays], body))
    return out


def _reads(f):
    return [n for n in walk(f) if isinstance(n, Read)]


def build_venn_system(e: EFlatForm, cfg: Optional[SolverConfig] = None,
                      cap: int = DEFAULT_CAP) -> VennSystem:
    """The region system of a partitioned form without reads at parameters.

    With ``cfg`` the regions are pruned with the solver; without it all
    ``2^K`` sets are kept.  Since the bodies of a partition cover every
    position, the region of the empty set always counts 0.
    """
    if _param_reads(e):
        raise ArcaError("build_venn_system needs a form without reads at parameters")
    if e.K > cap:
        raise ResourceCapError(f"{e.K} bodies exceed the cap of {cap}")
    fresh = Fresh(all_names(e.formula()))
    X = e.var or "x"
    some = _templates(e, fresh)
    with stage("qe"):
        qf = tuple(qe(f) for f in some)
    K = len(some)
    if K == 0:
        # no bodies, nothing to count: the empty region is not forced empty
        sets = []
    elif cfg is None:
        sets = [tuple(l for l in range(K) if (mask >> l) & 1) for mask in range(2 ** K)]
    else:
        sets = _feasible_sets(e.matrix, X, qf, cfg)
    regions, split = [], {}
    for S in sets:
        bits = "".join("1" if l in S else "0" for l in range(K))
        body = conj(*(some[l] if l in S else neg(some[l]) for l in range(K)))
        z = f"zS!{bits}"
        regions.append((S, z, body))
        for l in S:
            split[(l, S)] = f"zl!{l}!{bits}"
    return VennSystem(e.matrix, tuple(c.result for c in e.cards), regions, split, X,
                      tuple(some), qf)


def _feasible_sets(alpha, X, some, cfg) -> list:
    out = []
    K = len(some)
    with open_session(cfg) as s:
        s.push()
        s.add(conj(alpha, _range(X)))

        def check():
            v = s.check()
            if isinstance(v, (Unknown, ProcessError)):
                raise _Inconclusive(v)
            return isinstance(v, Sat)

        def go(l, S):
            if l == K:
                out.append(tuple(S))
                return
            for val in (1, 0):
                s.push()
                s.add(some[l] if val else neg(some[l]))
                if check():
                    go(l + 1, S + [l] if val else S)
                s.pop()

        if check():
            go(0, [])
        s.pop()
    return out


def _prune_cells(p: EFlatForm, cfg: SolverConfig) -> EFlatForm:
    """Drop partition cells that hold at no position; their count is 0."""
    X = p.var
    fresh = Fresh(all_names(p.formula()))
    with stage("qe"):
        some = [qe(f) for f in _templates(p, fresh)]
    keep, zero = [], []
    for c, f in zip(p.cards, some):
        script = emit_script(conj(p.matrix, _range(X), f), get_values=False)
        v = run_solver(script, cfg)
        if isinstance(v, Unsat):
            zero.append(Eq(Var(c.result), Num(0)))
        elif isinstance(v, Sat):
            keep.append(c)
        else:
            raise _Inconclusive(v)
    return EFlatForm(conj(p.matrix, *zero), tuple(keep), p.zs)


GENERAL_CLASSES = (FormulaClass.Arithmetic, FormulaClass.Basic, FormulaClass.SimpleFlat,
                   FormulaClass.Flat, FormulaClass.SimpleEFlat, FormulaClass.EFlat)


def prepare_general(f: Formula) -> EFlatForm:
    lifted, _ = lift_exists(f)
    g = rewrite_bounded_universal(lifted)
    cls = classify(g)
    if cls not in GENERAL_CLASSES:
        raise ArcaError(f"decide_eflat needs an E-flat formula, got {cls}")
    return to_eflat(g)


def decide_eflat(f: Formula, cfg: SolverConfig = SolverConfig(), cap: int = DEFAULT_CAP):
    """Sat (scalar values only), Unsat, Unknown or ProcessError."""
    e = prepare_general(f)
    pending = None
    for d in eliminate_parameter_reads(e):
        try:
            p = _prune_cells(make_partition(d), cfg) if d.cards else d
            venn = build_venn_system(p, cfg, cap)
        except _Inconclusive as exc:
            pending = pending or exc.verdict
            continue
        # the counts' existentials are positive: their witnesses become constants
        g, _ = lift_exists(venn.arithmetic())
        with stage("emit"):
            script = emit_script(g, logic=cfg.logic)
        v = run_solver(script, cfg)
        if isinstance(v, Sat):
            keep = free_symbols(f)
            v.values = {k: val for k, val in v.values.items()
                        if k == "N" or k in keep[0] | keep[1]}
            return v
        if not isinstance(v, Unsat):
            pending = pending or v
    return pending or Unsat()
