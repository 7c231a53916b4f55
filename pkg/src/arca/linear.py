"""Linear integer terms, atom normalization and Cooper quantifier elimination.

Atoms are kept in three normal shapes over a linear expression ``e``:
``e < 0``, ``e = 0`` and ``n | e``.  Non-arithmetic subterms (array reads,
cardinalities) are treated as opaque unknowns.
"""
from __future__ import annotations

import math
from functools import reduce
from typing import Iterable

from .parser import ArcaError
from .syntax import (
    FALSE, TRUE, And, Card, Cong, Eq, Exists, Formula, Lt, Mul, Neg, Not, Num,
    Param, Read, Sum, Term, Var, conj, disj, show,
)


class NonLinearError(ArcaError):
    pass


def _key_order(k):
    if isinstance(k, (Var, Param)):
        return (0, k.name, type(k).__name__)
    return (1, show(k), "")


class Lin:
    """Immutable linear combination ``sum(c * key) + const``."""

    __slots__ = ("coeffs", "const", "_hash")

    def __init__(self, coeffs=None, const: int = 0):
        c = {k: v for k, v in (coeffs or {}).items() if v != 0}
        self.coeffs = dict(sorted(c.items(), key=lambda kv: _key_order(kv[0])))
        self.const = const
        self._hash = None

    @staticmethod
    def of(t: Term) -> "Lin":
        return Lin({t: 1}) if not isinstance(t, Num) else Lin({}, t.value)

    def __eq__(self, other):
        return isinstance(other, Lin) and self.const == other.const and self.coeffs == other.coeffs

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((tuple(self.coeffs.items()), self.const))
        return self._hash

    def __add__(self, other: "Lin") -> "Lin":
        c = dict(self.coeffs)
        for k, v in other.coeffs.items():
            c[k] = c.get(k, 0) + v
        return Lin(c, self.const + other.const)

    def __sub__(self, other: "Lin") -> "Lin":
        return self + other.scale(-1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, k: int) -> "Lin":
        return Lin({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    def shift(self, k: int) -> "Lin":
        return Lin(self.coeffs, self.const + k)

    def coef(self, x: str) -> int:
        return self.coeffs.get(Var(x), 0)

    def drop(self, x: str) -> "Lin":
        c = dict(self.coeffs)
        c.pop(Var(x), None)
        return Lin(c, self.const)

    def subst(self, x: str, e: "Lin") -> "Lin":
        c = self.coef(x)
        if c == 0:
            return self
        return self.drop(x) + e.scale(c)

    def is_const(self) -> bool:
        return not self.coeffs

    def mentions(self, x: str) -> bool:
        if Var(x) in self.coeffs:
            return True
        return any(not isinstance(k, (Var, Param)) and x in _names(k) for k in self.coeffs)

    def content(self) -> int:
        return reduce(math.gcd, (abs(v) for v in self.coeffs.values()), 0)

    def term(self) -> Term:
        parts = []
        for k, c in self.coeffs.items():
            parts.append(k if c == 1 else Neg(k) if c == -1 else Mul(c, k))
        if self.const or not parts:
            parts.append(Num(self.const))
        return parts[0] if len(parts) == 1 else Sum(tuple(parts))

    def split(self) -> tuple:
        """Terms ``(p, q)`` with ``self == p - q`` and no negative coefficients."""
        pos = Lin({k: c for k, c in self.coeffs.items() if c > 0}, max(self.const, 0))
        negp = Lin({k: -c for k, c in self.coeffs.items() if c < 0}, max(-self.const, 0))
        return pos.term(), negp.term()

    def __repr__(self):
        return f"Lin({show(self.term())})"


def _names(t) -> set:
    from .syntax import all_names
    return all_names(t)


def linearize(t: Term) -> Lin:
    if isinstance(t, Num):
        return Lin({}, t.value)
    if isinstance(t, (Var, Param, Read, Card)):
        return Lin({t: 1})
    if isinstance(t, Sum):
        out = Lin()
        for a in t.args:
            out = out + linearize(a)
        return out
    if isinstance(t, Neg):
        return linearize(t.arg).scale(-1)
    if isinstance(t, Mul):
        return linearize(t.arg).scale(t.coef)
    raise NonLinearError(f"not a linear term: {t!r}")


# -- normalized atoms ------------------------------------------------------
# ("lt", 0, e): e < 0      ("eq", 0, e): e = 0      ("dvd", n, e): n | e

def atom_of(f: Formula) -> tuple:
    if isinstance(f, Lt):
        return norm_atom(("lt", 0, linearize(f.left) - linearize(f.right)))
    if isinstance(f, Eq):
        return norm_atom(("eq", 0, linearize(f.left) - linearize(f.right)))
    if isinstance(f, Cong):
        return norm_atom(("dvd", f.modulus, linearize(f.left) - linearize(f.right)))
    raise TypeError(f"not an atom: {f!r}")


def norm_atom(a: tuple):
    """Canonical form of an atom, or ``True``/``False`` when ground."""
    kind, n, e = a
    if kind == "dvd":
        n = abs(n)
        if n == 1:
            return True
        e = Lin({k: c % n for k, c in e.coeffs.items()}, e.const % n)
        if e.is_const():
            return e.const == 0
        g = math.gcd(n, e.content(), e.const)
        if g > 1:
            n //= g
            e = Lin({k: c // g for k, c in e.coeffs.items()}, e.const // g)
            if n == 1:
                return True
        return ("dvd", n, e)
    if e.is_const():
        return e.const < 0 if kind == "lt" else e.const == 0
    g = e.content()
    if kind == "lt":
        if g > 1:
            # g*s + k < 0  <=>  s <= floor((-k-1)/g)
            bound = (-e.const - 1) // g
            e = Lin({k: c // g for k, c in e.coeffs.items()}, -bound - 1)
        return ("lt", 0, e)
    if e.const % g:
        return False
    if g > 1:
        e = Lin({k: c // g for k, c in e.coeffs.items()}, e.const // g)
    first = next(iter(e.coeffs.values()))
    if first < 0:
        e = e.scale(-1)
    return ("eq", 0, e)


def atom_formula(a) -> Formula:
    if a is True:
        return TRUE
    if a is False:
        return FALSE
    kind, n, e = a
    if kind == "dvd":
        p, q = e.split()
        return Cong(n, p, q)
    p, q = e.split()
    return Lt(p, q) if kind == "lt" else Eq(p, q)


def eval_atom(a, env: dict) -> bool:
    kind, n, e = a
    v = e.const + sum(c * env[k] for k, c in e.coeffs.items())
    if kind == "lt":
        return v < 0
    if kind == "eq":
        return v == 0
    return v % n == 0


# -- internal NNF trees ----------------------------------------------------
# ("T",) ("F",) ("atom", a) ("ndvd", a) ("and", kids) ("or", kids)

T_ = ("T",)
F_ = ("F",)


def mk_and(kids: Iterable) -> tuple:
    out, seen = [], set()
    for k in kids:
        if k == F_:
            return F_
        if k == T_:
            continue
        for kk in (k[1] if k[0] == "and" else (k,)):
            if kk not in seen:
                seen.add(kk)
                out.append(kk)
    if len(out) > 1:
        out = _prune(out)
        if out is None:
            return F_
    if not out:
        return T_
    if len(out) == 1:
        return out[0]
    return ("and", tuple(out))


def _orient(e: Lin):
    """``(key, sign, const)`` with ``e == sign * L + const`` and ``L`` having
    a positive leading coefficient."""
    items = tuple(e.coeffs.items())
    if items[0][1] < 0:
        return tuple((k, -c) for k, c in items), -1, e.const
    return items, 1, e.const


class _Facts:
    __slots__ = ("lo", "hi", "eq", "dvd", "ndvd")

    def __init__(self):
        self.lo = self.hi = self.eq = None
        self.dvd, self.ndvd = [], []

    def admits(self, v: int) -> bool:
        return ((self.lo is None or v >= self.lo) and (self.hi is None or v <= self.hi)
                and (self.eq is None or v == self.eq)
                and all((v - r) % n == 0 for n, r in self.dvd)
                and all((v - r) % n for n, r in self.ndvd))

    def consistent(self) -> bool:
        if self.eq is not None:
            return self.admits(self.eq)
        if self.lo is not None and self.hi is not None:
            if self.lo > self.hi:
                return False
            if self.hi - self.lo < 64:
                return any(self.admits(v) for v in range(self.lo, self.hi + 1))
        for i, (n1, r1) in enumerate(self.dvd):
            for n2, r2 in self.dvd[i + 1:]:
                if (r1 - r2) % math.gcd(n1, n2):
                    return False
        for n, r in self.ndvd:
            if any(m % n == 0 and (s - r) % n == 0 for m, s in self.dvd):
                return False
        return True


def _prune(kids: list):
    """Detect contradictions among atoms over the same linear form and drop
    bounds implied by tighter ones.  Returns ``None`` if inconsistent."""
    facts, where = {}, {}
    for i, k in enumerate(kids):
        if k[0] not in ("atom", "ndvd"):
            continue
        kind, n, e = k[1]
        key, sg, c = _orient(e)
        f = facts.get(key)
        if f is None:
            f = facts[key] = _Facts()
        if kind == "lt":
            if sg == 1:   # L < -c
                hi = -c - 1
                if f.hi is None or hi < f.hi:
                    f.hi = hi
                    where[(key, "hi")] = i
            else:         # L > c
                lo = c + 1
                if f.lo is None or lo > f.lo:
                    f.lo = lo
                    where[(key, "lo")] = i
        elif kind == "eq":
            v = -sg * c
            if f.eq is not None and f.eq != v:
                return None
            f.eq = v
        elif k[0] == "atom":
            f.dvd.append((n, (-sg * c) % n))
        else:
            f.ndvd.append((n, (-sg * c) % n))
    if not facts:
        return kids
    for f in facts.values():
        if not f.consistent():
            return None
    out = []
    for i, k in enumerate(kids):
        if k[0] in ("atom", "ndvd"):
            kind, n, e = k[1]
            key = _orient(e)[0]
            f = facts[key]
            if kind == "lt":
                side = "hi" if _orient(e)[1] == 1 else "lo"
                if f.eq is not None or where.get((key, side)) != i:
                    continue
            elif kind == "dvd" and f.eq is not None:
                continue
        out.append(k)
    return out


def mk_or(kids: Iterable) -> tuple:
    out, seen = [], set()
    for k in kids:
        if k == T_:
            return T_
        if k == F_:
            continue
        for kk in (k[1] if k[0] == "or" else (k,)):
            if kk not in seen:
                seen.add(kk)
                out.append(kk)
    if not out:
        return F_
    if len(out) == 1:
        return out[0]
    return ("or", tuple(out))


def mk_atom(a) -> tuple:
    a = norm_atom(a) if not isinstance(a, bool) else a
    if a is True:
        return T_
    if a is False:
        return F_
    return ("atom", a)


def mk_ndvd(a) -> tuple:
    a = norm_atom(a)
    if a is True:
        return F_
    if a is False:
        return T_
    return ("ndvd", a)


def negate_atom(a) -> tuple:
    """Negation of a normalized atom as a positive NNF tree."""
    kind, n, e = a
    if kind == "lt":
        return mk_atom(("lt", 0, e.scale(-1).shift(-1)))  # e >= 0  <=>  -e - 1 < 0
    if kind == "eq":
        return mk_or([mk_atom(("lt", 0, e)), mk_atom(("lt", 0, e.scale(-1)))])
    return mk_ndvd(a)


def nnf(f: Formula, positive: bool = True) -> tuple:
    """Negation normal form; quantifiers must already be eliminated."""
    if isinstance(f, (Lt, Eq, Cong)):
        a = atom_of(f)
        if isinstance(a, bool):
            return T_ if a == positive else F_
        return ("atom", a) if positive else negate_atom(a)
    if isinstance(f, And):
        kids = [nnf(x, positive) for x in f.args]
        return mk_and(kids) if positive else mk_or(kids)
    if isinstance(f, Not):
        return nnf(f.arg, not positive)
    if isinstance(f, Exists):
        raise ArcaError("nnf: quantifier must be eliminated first")
    raise TypeError(f"not a formula: {f!r}")


def to_formula(t: tuple) -> Formula:
    tag = t[0]
    if tag == "T":
        return TRUE
    if tag == "F":
        return FALSE
    if tag == "atom":
        return atom_formula(t[1])
    if tag == "ndvd":
        return Not(atom_formula(t[1]))
    if tag == "and":
        return conj(*(to_formula(k) for k in t[1]))
    return disj(*(to_formula(k) for k in t[1]))


def map_atoms(t: tuple, fn) -> tuple:
    """Rebuild a tree, replacing every atom ``a`` by ``fn(a, positive)``."""
    tag = t[0]
    if tag == "atom":
        return fn(t[1], True)
    if tag == "ndvd":
        return fn(t[1], False)
    if tag == "and":
        return mk_and(map_atoms(k, fn) for k in t[1])
    if tag == "or":
        return mk_or(map_atoms(k, fn) for k in t[1])
    return t


def tree_atoms(t: tuple) -> list:
    out = []

    def go(u):
        if u[0] in ("atom", "ndvd"):
            out.append(u[1])
        elif u[0] in ("and", "or"):
            for k in u[1]:
                go(k)
    go(t)
    return out


def tree_mentions(t: tuple, x: str) -> bool:
    return any(a[2].mentions(x) for a in tree_atoms(t))


def tree_size(t: tuple) -> int:
    if t[0] in ("and", "or"):
        return 1 + sum(tree_size(k) for k in t[1])
    return 1


def _subst_atom(a, positive, x, e: Lin):
    kind, n, lin = a
    new = (kind, n, lin.subst(x, e))
    return mk_atom(new) if positive else mk_ndvd(new)


def subst_tree(t: tuple, x: str, e: Lin) -> tuple:
    return map_atoms(t, lambda a, p: _subst_atom(a, p, x, e))


# -- Cooper ----------------------------------------------------------------

def _lcm(xs) -> int:
    return reduce(lambda a, b: a * b // math.gcd(a, b), xs, 1)


def _eq_with(t: tuple, x: str):
    if t[0] == "atom" and t[1][0] == "eq" and t[1][2].coef(x) != 0:
        return t[1]
    return None


def _solve_eq(t: tuple, x: str, eq) -> tuple:
    """Eliminate ``x`` from ``t`` using the conjunct ``c*x + s = 0``."""
    lin = eq[2]
    c = lin.coef(x)
    C, sg = abs(c), (1 if c > 0 else -1)
    s = lin.drop(x)
    cx = s.scale(-sg)  # value of C*x

    def fn(a, positive):
        kind, n, e = a
        k = e.coef(x)
        if k == 0:
            return ("atom", a) if positive else ("ndvd", a)
        rest = e.drop(x)
        new_e = cx.scale(k) + rest.scale(C)
        new = (kind, n * C if kind == "dvd" else 0, new_e)
        return mk_atom(new) if positive else mk_ndvd(new)

    body = map_atoms(t, fn)
    return mk_and([body, mk_atom(("dvd", C, s))]) if C > 1 else body


def _eq_determined(t: tuple, x: str) -> bool:
    """Every disjunct of ``t`` pins ``x`` with an equation."""
    if _eq_with(t, x) is not None:
        return True
    if t[0] == "and":
        return any(_eq_determined(k, x) for k in t[1])
    if t[0] == "or":
        return all(_eq_determined(k, x) for k in t[1])
    return False


def _distributable(t: tuple, x: str) -> bool:
    return t[0] == "or" and _eq_determined(t, x)


def cooper(x: str, t: tuple) -> tuple:
    """Eliminate ``exists x`` from an NNF tree (result is quantifier-free)."""
    if not tree_mentions(t, x):
        return t
    for a in tree_atoms(t):
        if any(not isinstance(k, (Var, Param)) and x in _names(k) for k in a[2].coeffs):
            raise NonLinearError(f"cannot eliminate {x}: it occurs inside a non-arithmetic term")
    if t[0] == "or":
        return mk_or(cooper(x, d) for d in t[1])
    if t[0] != "and":
        kids = (t,)
    else:
        kids = t[1]
    free = [k for k in kids if not tree_mentions(k, x)]
    bound = [k for k in kids if tree_mentions(k, x)]
    for k in bound:
        eq = _eq_with(k, x)
        if eq is not None:
            return mk_and(free + [_solve_eq(mk_and(bound), x, eq)])
    for i, k in enumerate(bound):
        if _distributable(k, x):
            others = bound[:i] + bound[i + 1:]
            return mk_and(free + [mk_or(cooper(x, mk_and([d] + others)) for d in k[1])])
    return mk_and(free + [_cooper_general(x, mk_and(bound))])


def _cooper_general(x: str, t: tuple) -> tuple:
    # equalities become pairs of strict inequalities
    def split_eq(a, positive):
        if a[0] == "eq" and a[2].coef(x) != 0:
            e = a[2]
            return mk_and([mk_atom(("lt", 0, e.shift(-1))), mk_atom(("lt", 0, e.scale(-1).shift(-1)))])
        return ("atom", a) if positive else ("ndvd", a)

    t = map_atoms(t, split_eq)
    coefs = [abs(a[2].coef(x)) for a in tree_atoms(t) if a[2].coef(x) != 0]
    L = _lcm(coefs)

    def unify(a, positive):
        kind, n, e = a
        c = e.coef(x)
        if c == 0:
            return ("atom", a) if positive else ("ndvd", a)
        m = L // abs(c)
        sg = 1 if c > 0 else -1
        new_e = e.drop(x).scale(m) + Lin({Var(x): sg})
        new = (kind, n * m if kind == "dvd" else 0, new_e)
        return mk_atom(new) if positive else mk_ndvd(new)

    t = map_atoms(t, unify)
    if L > 1:
        t = mk_and([t, mk_atom(("dvd", L, Lin({Var(x): 1})))])
    atoms = [a for a in tree_atoms(t) if a[2].coef(x) != 0]
    delta = _lcm([a[1] for a in atoms if a[0] == "dvd"])
    lowers = [a[2].drop(x) for a in atoms if a[0] == "lt" and a[2].coef(x) == -1]
    uppers = [a[2].drop(x).scale(-1) for a in atoms if a[0] == "lt" and a[2].coef(x) == 1]
    use_lower = len(lowers) <= len(uppers)

    def at_infinity(a, positive):
        if a[0] == "lt" and a[2].coef(x) != 0:
            is_lower = a[2].coef(x) == -1
            return F_ if is_lower == use_lower else T_
        return ("atom", a) if positive else ("ndvd", a)

    inf = map_atoms(t, at_infinity)
    out = []
    for j in range(1, delta + 1):
        out.append(subst_tree(inf, x, Lin({}, j if use_lower else -j)))
    for b in (lowers if use_lower else uppers):
        for j in range(1, delta + 1):
            out.append(subst_tree(t, x, b.shift(j if use_lower else -j)))
    return mk_or(out)


def qe(f: Formula) -> Formula:
    """Quantifier-free arithmetic formula equivalent to ``f``."""
    return to_formula(qe_tree(f))


def qe_tree(f: Formula, positive: bool = True) -> tuple:
    if isinstance(f, Exists):
        body = qe_tree(f.body)
        res = cooper(f.var, body)
        if positive:
            return res
        return negate_tree(res)
    if isinstance(f, Not):
        return qe_tree(f.arg, not positive)
    if isinstance(f, And):
        kids = [qe_tree(a, positive) for a in f.args]
        return mk_and(kids) if positive else mk_or(kids)
    return nnf(f, positive)


def negate_tree(t: tuple) -> tuple:
    tag = t[0]
    if tag == "T":
        return F_
    if tag == "F":
        return T_
    if tag == "atom":
        return negate_atom(t[1])
    if tag == "ndvd":
        return ("atom", t[1])
    if tag == "and":
        return mk_or(negate_tree(k) for k in t[1])
    return mk_and(negate_tree(k) for k in t[1])


def simplify(f: Formula) -> Formula:
    """Normalize atoms and fold constants without changing quantifiers."""
    if isinstance(f, (Lt, Eq, Cong)):
        try:
            return atom_formula(atom_of(f))
        except NonLinearError:
            return f
    if isinstance(f, And):
        out, seen = [], set()
        for a in f.args:
            s = simplify(a)
            if s == FALSE:
                return FALSE
            for k in (s.args if isinstance(s, And) else (s,)):
                if k not in seen:
                    seen.add(k)
                    out.append(k)
        if len(out) == 1:
            return out[0]
        return And(tuple(out))
    if isinstance(f, Not):
        s = simplify(f.arg)
        if isinstance(s, Not):
            return s.arg
        return Not(s)
    if isinstance(f, Exists):
        from .core import free_vars
        body = simplify(f.body)
        if f.var not in free_vars(body):
            return body
        return Exists(f.var, body)
    return f
