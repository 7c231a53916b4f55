"""Elimination of cardinality constraints from array-free formulas.

``eliminate_count_atom`` turns ``y = #{x | alpha}`` (counting over
``[0, N)``) into a plain Presburger formula.  The reduction runs through
named steps R1..R8; each step rewrites one counting problem into smaller
ones and hands those to a continuation, so the steps can be exercised one
at a time against the evaluator.

Counting problems inside the engine are conjunctions of normalized linear
atoms (see :mod:`arca.linear`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .core import free_vars, has_node, replace_terms
from .linear import (
    F_, T_, Lin, atom_formula, cooper, map_atoms, mk_and, mk_atom, mk_or,
    negate_atom, nnf, qe, to_formula, tree_atoms,
)
from .parser import ArcaError
from .syntax import (
    TRUE, And, Card, Cong, Eq, Exists, Formula, Fresh, Lt, Mul, Not, Num, Param, Read, Sum,
    Term, Var, all_names, children, conj, disj, exists_many, neg, rebuild,
)


@dataclass(frozen=True)
class CountAtom:
    """``result = #{var | body}``; ``result`` must not occur in ``body``."""

    result: str
    var: str
    body: Formula

    def formula(self) -> Formula:
        return Eq(Var(self.result), Card(self.var, self.body))


Count = Callable[[str, str, list], Formula]

NPARAM = Param("N")


def normalize_congruence(l: int, n: int, k: int) -> Optional[tuple]:
    """Solve ``l*x = k (mod n)``: ``None`` if inconsistent, else ``(n', k')``
    with the congruence equivalent to ``x = k' (mod n')``."""
    if l < 1 or n < 1:
        raise ValueError("l and n must be >= 1")
    g = math.gcd(l, n)
    if k % g:
        return None
    n2 = n // g
    if n2 == 1:
        return 1, 0
    inv = pow((l // g) % n2, -1, n2)
    return n2, (inv * (k // g)) % n2


def count_special_case(t1: Term, t2: Term, n: int, t3: Term, y: str,
                       quantified: bool = False, fresh: Fresh = None) -> Formula:
    """Arithmetic formula for ``y = #{x | t1 <= x < t2 /\\ x = t3 (mod n)}``.

    With ``quantified=True`` the minimal solution ``z`` is introduced with an
    existential and characterized by a universal.  The default instantiates
    ``z`` with the only candidates ``t1 + l`` (``0 <= l < n``) that can be
    minimal, giving an equivalent quantifier-free formula.  In both shapes
    ``y = ceil((t2 - z)/n)`` is written as ``OR_m  n*y = m + t2 - z``.
    """
    Y = Var(y)

    def ceil_eq(z: Term) -> Formula:
        return disj(*(Eq(Mul(n, Y), Sum((Num(m), t2, Mul(-1, z)))) for m in range(n)))

    if quantified:
        fresh = fresh or Fresh(all_names(t1) | all_names(t2) | all_names(t3) | {y})
        z, z2 = fresh("z"), fresh("z")
        Z, Z2 = Var(z), Var(z2)

        def sol(v):
            return conj(Not(Lt(v, t1)), Lt(v, t2), Cong(n, v, t3))

        minimal = Not(Exists(z2, conj(sol(Z2), Lt(Z2, Z))))
        return disj(Exists(z, conj(sol(Z), minimal, ceil_eq(Z))),
                    conj(Not(Exists(z, sol(Z))), Eq(Y, Num(0))))
    cases = []
    for l in range(n):
        c = Sum((t1, Num(l))) if l else t1
        cases.append(conj(Cong(n, c, t3),
                          disj(conj(Lt(c, t2), ceil_eq(c)),
                               conj(Not(Lt(c, t2)), Eq(Y, Num(0))))))
    return disj(*cases)


# -- per-cube steps --------------------------------------------------------

def _body(atoms) -> Formula:
    return conj(*(atom_formula(a) for a in atoms)) if atoms else TRUE


def card_eq(y: str, x: str, atoms) -> Formula:
    """The unreduced counting problem, for tests and symbolic output."""
    return Eq(Var(y), Card(x, _body(atoms)))


def step_r4_independent(y, x, atoms, count: Count) -> Optional[Formula]:
    """Atoms without ``x`` become a guard outside the count."""
    guard = [a for a in atoms if a[2].coef(x) == 0]
    if not guard:
        return None
    rest = [a for a in atoms if a[2].coef(x) != 0]
    g = _body(guard)
    return disj(conj(neg(g), Eq(Var(y), Num(0))), conj(g, count(y, x, rest)))


def step_r5_unique(y, x, atoms, count: Count) -> Optional[Formula]:
    """An equation ``k*x = t`` admits at most one solution."""
    if not any(a[0] == "eq" and a[2].coef(x) != 0 for a in atoms):
        return None
    some = to_formula(cooper(x, mk_and([("atom", a) for a in atoms])))
    Y = Var(y)
    return disj(conj(Eq(Y, Num(1)), some), conj(Eq(Y, Num(0)), neg(some)))


def step_r6_coefficients(y, x, atoms, count: Count, fresh: Fresh) -> Optional[Formula]:
    """Reduce one atom to coefficient 1 on ``x`` with a constant congruence."""
    for i, a in enumerate(atoms):
        kind, n, e = a
        c = e.coef(x)
        rest = atoms[:i] + atoms[i + 1:]
        if kind == "lt" and c > 1:
            # c*x < t with t = -(e - c*x): split on the remainder of t - 1
            t = e.drop(x).scale(-1)
            q = fresh("q")
            out = []
            for l in range(c):
                defq = Eq(Sum((t.term(), Num(-1))), Sum((Mul(c, Var(q)), Num(l))))
                bound = ("lt", 0, Lin({Var(x): 1, Var(q): -1}, -1))
                out.append(Exists(q, conj(defq, count(y, x, rest + [bound]))))
            return disj(*out)
        if kind == "lt" and c < -1:
            # t < k*x with t = e + k*x, k = -c; t + 1 + l = k*q gives q - 1 < x
            k = -c
            t = e.drop(x)
            q = fresh("q")
            out = []
            for l in range(k):
                defq = Eq(Sum((t.term(), Num(1 + l))), Mul(k, Var(q)))
                bound = ("lt", 0, Lin({Var(x): -1, Var(q): 1}, -1))
                out.append(Exists(q, conj(defq, count(y, x, rest + [bound]))))
            return disj(*out)
        if kind == "dvd" and (c != 1 or not e.drop(x).is_const()):
            # n | c*x + r, i.e. c*x = t (mod n) with t = -r; guess t mod n
            t = e.drop(x).scale(-1)
            out = []
            for l in range(n):
                sol = normalize_congruence(c, n, l)
                guard = Cong(n, t.term(), Num(l))
                if sol is None:
                    inner = Eq(Var(y), Num(0))
                else:
                    n2, k2 = sol
                    new = [] if n2 == 1 else [("dvd", n2, Lin({Var(x): 1}, -k2))]
                    inner = count(y, x, rest + new)
                out.append(conj(guard, inner))
            return disj(*out)
    return None


def _lower(a, x):
    """Lower bound ``t`` of ``t <= x`` from ``-x + r < 0``."""
    return a[2].drop(x).shift(1)


def _upper(a, x):
    """Upper bound ``u`` of ``x < u`` from ``x + r < 0``."""
    return a[2].drop(x).scale(-1)


def step_r7_bounds(y, x, atoms, count: Count) -> Optional[Formula]:
    """Guess the greatest lower bound and the least upper bound."""
    lows = [a for a in atoms if a[0] == "lt" and a[2].coef(x) == -1]
    ups = [a for a in atoms if a[0] == "lt" and a[2].coef(x) == 1]
    others = [a for a in atoms if a not in lows and a not in ups]
    if len(lows) <= 1 and len(ups) <= 1:
        return None
    out = []
    for lo in lows:
        for up in ups:
            guard = []
            for lo2 in lows:
                if lo2 != lo:
                    guard.append(Not(Lt(_lower(lo, x).term(), _lower(lo2, x).term())))
            for up2 in ups:
                if up2 != up:
                    guard.append(Not(Lt(_upper(up2, x).term(), _upper(up, x).term())))
            out.append(conj(*guard, count(y, x, others + [lo, up])))
    return disj(*out)


def step_r8_lcm(y, x, atoms, count: Count) -> Optional[Formula]:
    """Merge constant congruences ``x = k_i (mod n_i)`` into one."""
    congs = [a for a in atoms if a[0] == "dvd"]
    if len(congs) <= 1:
        return None
    rest = [a for a in atoms if a[0] != "dvd"]
    mods = [a[1] for a in congs]
    L = math.lcm(*mods)
    # x = -r (mod n) for "n | x + r"
    wanted = [(a[1], (-a[2].const) % a[1]) for a in congs]
    for r in range(L):
        if all(r % n == k for n, k in wanted):
            return count(y, x, rest + [("dvd", L, Lin({Var(x): 1}, -r))])
    return Eq(Var(y), Num(0))


def special_case_of(y, x, atoms) -> Formula:
    lows = [a for a in atoms if a[0] == "lt" and a[2].coef(x) == -1]
    ups = [a for a in atoms if a[0] == "lt" and a[2].coef(x) == 1]
    congs = [a for a in atoms if a[0] == "dvd"]
    assert len(lows) == 1 and len(ups) == 1 and len(congs) <= 1 \
        and len(atoms) == 2 + len(congs), atoms
    if congs:
        n, t3 = congs[0][1], congs[0][2].drop(x).scale(-1).term()
    else:
        n, t3 = 1, Num(0)
    return count_special_case(_lower(lows[0], x).term(), _upper(ups[0], x).term(), n, t3, y)


def count_cube(y: str, x: str, atoms: list, fresh: Fresh) -> Formula:
    """Arithmetic formula for ``y = #{x | /\\ atoms}``; the caller supplies
    the ``[0, N)`` bounds among the atoms."""
    atoms = list(dict.fromkeys(atoms))

    def rec(y2, x2, atoms2):
        return count_cube(y2, x2, atoms2, fresh)

    for step in (step_r4_independent, step_r5_unique):
        out = step(y, x, atoms, rec)
        if out is not None:
            return out
    out = step_r6_coefficients(y, x, atoms, rec, fresh)
    if out is not None:
        return out
    for step in (step_r7_bounds, step_r8_lcm):
        out = step(y, x, atoms, rec)
        if out is not None:
            return out
    return special_case_of(y, x, atoms)


# -- whole-atom steps ------------------------------------------------------

def step_r1_qe(body: Formula) -> Formula:
    """Quantifier-free equivalent of the counted formula."""
    return qe(body) if has_node(body, Exists) else body


def expand_negations(t: tuple) -> tuple:
    """Replace negated congruences by disjunctions of congruences."""
    def go(u):
        tag = u[0]
        if tag == "ndvd":
            _, n, e = u[1]
            return mk_or(mk_atom(("dvd", n, e.shift(l))) for l in range(1, n))
        if tag == "and":
            return mk_and(go(k) for k in u[1])
        if tag == "or":
            return mk_or(go(k) for k in u[1])
        return u
    return go(t)


def step_r2_positive(body: Formula) -> tuple:
    """Negation-free tree over ``<``, ``=`` and congruence atoms."""
    return expand_negations(nnf(body))


def _exclusive_negation(a) -> list:
    """Pairwise-exclusive positive alternatives covering ``not a``."""
    neg_t = expand_negations(negate_atom(a))
    if neg_t[0] == "or":
        return [k[1] for k in neg_t[1]]
    if neg_t[0] == "atom":
        return [neg_t[1]]
    return [] if neg_t == F_ else [True]


def _assign(t: tuple, atom, value: bool) -> tuple:
    return map_atoms(t, lambda a, p: (T_ if value == p else F_) if a == atom
                     else (("atom", a) if p else ("ndvd", a)))


def _decide(u: tuple, path: list) -> tuple:
    """Fix atoms of ``u`` whose value follows from the atoms on ``path``."""
    known = [("atom", a) for a in path]

    def fn(b, positive):
        if mk_and(known + [("atom", b)]) == F_:
            val = False
        elif mk_and(known + [negate_atom(b)]) == F_:
            val = True
        else:
            return ("atom", b) if positive else ("ndvd", b)
        return T_ if val == positive else F_

    return map_atoms(u, fn) if path else u


def venn_cubes(t: tuple) -> list:
    """Split a positive tree into pairwise-inconsistent conjunctions of atoms
    whose disjunction is equivalent to the tree."""
    out = []

    def go(u, path):
        u = _decide(u, path)
        if u == F_:
            return
        if u == T_:
            out.append(path)
            return
        a = tree_atoms(u)[0]
        go(_assign(u, a, True), path + [a])
        rest = _assign(u, a, False)
        for alt in _exclusive_negation(a):
            if alt is True:
                go(rest, path)
            elif mk_and([("atom", b) for b in path + [alt]]) != F_:
                go(rest, path + [alt])

    go(t, [])
    return out


def step_r3_venn(y, x, t: tuple, count: Count, fresh: Fresh) -> Formula:
    """Lemma-pairwise sum over the disjoint cubes of the counted formula."""
    cubes = venn_cubes(t)
    if not cubes:
        return Eq(Var(y), Num(0))
    if len(cubes) == 1:
        return count(y, x, cubes[0])
    ys = [fresh("y") for _ in cubes]
    parts = [count(yc, x, c) for yc, c in zip(ys, cubes)]
    total = Eq(Var(y), Sum(tuple(Var(v) for v in ys)))
    return exists_many(ys, conj(total, *parts))


def split_prefix(f: Formula) -> tuple:
    """``(vars, matrix)`` for ``exists v1 ... vk. matrix``."""
    vs = []
    while isinstance(f, Exists):
        vs.append(f.var)
        f = f.body
    return vs, f


def bounds_atoms(x: str) -> list:
    X = Var(x)
    return [("lt", 0, Lin({X: -1}, -1)), ("lt", 0, Lin({X: 1, NPARAM: -1}))]


def eliminate_count_atom(a: CountAtom, fresh: Fresh = None,
                         quantifier_free: bool = False) -> Formula:
    """Arithmetic formula equivalent to ``y = #{x | 0 <= x < N /\\ alpha}``.

    When the counted formula splits into several disjoint regions the result
    is ``exists y1..yk. y = y1 + ... + yk /\\ F1(y1) /\\ ... /\\ Fk(yk)`` with
    quantifier-free ``Fi``.  Eliminating the ``yi`` as well multiplies the
    case splits of all regions, so it only happens on request.
    """
    if a.result in free_vars(a.body):
        raise ArcaError(f"result variable {a.result} occurs in the counted formula")
    if has_node(a.body, (Card, Read)):
        raise ArcaError("eliminate_count_atom needs an arithmetic body")
    fresh = fresh or Fresh(all_names(a.body) | {a.result, a.var, "N"})
    fresh.reserve(all_names(a.body) | {a.result, a.var})
    body = step_r1_qe(a.body)
    t = mk_and([step_r2_positive(body)] + [("atom", b) for b in bounds_atoms(a.var)])

    def count(y, x, atoms):
        return qe(count_cube(y, x, atoms, fresh))

    out = step_r3_venn(a.result, a.var, t, count, fresh)
    return qe(out) if quantifier_free else out


def _outer_cards(t) -> list:
    if isinstance(t, Card):
        return [t]
    out = []
    for c in children(t):
        out.extend(_outer_cards(c))
    return out


def eliminate_counting(f: Formula, fresh: Fresh = None, quantifier_free: bool = False) -> Formula:
    """Arithmetic formula equivalent to an array-free formula ``f``.

    Each atom ``A[#{x|b}]`` becomes ``exists z. z = #{x|b} /\\ A[z]`` with the
    count eliminated.  ``z`` is eliminated too unless the count splits into
    several regions; then ``z`` and the per-region sums stay quantified
    (see :func:`eliminate_count_atom`) unless ``quantifier_free``.
    """
    if has_node(f, Read):
        raise ArcaError("eliminate_counting needs a formula without array reads")
    fresh = fresh or Fresh(all_names(f) | {"N"})
    fresh.reserve(all_names(f) | {"N"})

    def go(g):
        if isinstance(g, (Lt, Eq, Cong)):
            cards = list(dict.fromkeys(_outer_cards(g)))
            if not cards:
                return g
            mapping, qf_zs, qf_parts, kept = {}, [], [], []
            for c in cards:
                # nested counts are eliminated first; R1 removes their quantifiers
                body = go(c.body)
                z = fresh("z")
                mapping[c] = Var(z)
                res = eliminate_count_atom(CountAtom(z, c.var, body), fresh)
                if isinstance(res, Exists):
                    kept.append((z, res))
                else:
                    qf_zs.append(z)
                    qf_parts.append(res)
            core = qe(exists_many(qf_zs, conj(*qf_parts, replace_terms(g, mapping))))
            return exists_many([z for z, _ in kept], conj(core, *(r for _, r in kept)))
        if isinstance(g, (And, Not, Exists)):
            return rebuild(g, tuple(go(k) for k in children(g)))
        raise TypeError(f"not a formula: {g!r}")

    out = go(f)
    return qe(out) if quantifier_free else out
