"""Substitution, free symbols and formula-class recognition."""
from __future__ import annotations

import enum

from .syntax import (
    And, Card, Eq, Exists, Formula, Fresh, Num, Param, Read, Term, Var, all_names, children,
    rebuild, walk,
)


class FormulaClass(enum.Enum):
    Arithmetic = "Arithmetic"
    Constraint = "Constraint"
    Basic = "Basic"
    SimpleFlat = "SimpleFlat"
    Flat = "Flat"
    EFlat = "EFlat"
    SimpleEFlat = "SimpleEFlat"
    General = "General"

    def __str__(self):
        return self.value


def free_symbols(node) -> tuple:
    """Return ``(vars, params, arrays)`` occurring free in ``node``."""
    vs, ps, arrs = set(), set(), set()

    def go(n, bound):
        if isinstance(n, Var):
            if n.name not in bound:
                vs.add(n.name)
        elif isinstance(n, Param):
            ps.add(n.name)
        elif isinstance(n, Read):
            arrs.add(n.array)
            go(n.index, bound)
        elif isinstance(n, (Card, Exists)):
            go(n.body, bound | {n.var})
        else:
            for c in children(n):
                go(c, bound)

    go(node, frozenset())
    return vs, ps, arrs


def free_vars(node) -> set:
    return free_symbols(node)[0]


def substitute(node, x: str, u: Term):
    """Capture-avoiding replacement of the free variable ``x`` by ``u``."""
    return substitute_many(node, {x: u})


def substitute_many(node, mapping: dict):
    if not mapping:
        return node
    danger = set()
    for t in mapping.values():
        fv, _, _ = free_symbols(t)
        danger |= fv
    fresh = Fresh(all_names(node) | danger | set(mapping)
                  | {n for t in mapping.values() for n in all_names(t)})

    def go(n, m):
        if isinstance(n, Var):
            return m.get(n.name, n)
        if isinstance(n, (Num, Param)):
            return n
        if isinstance(n, (Card, Exists)):
            v = n.var
            inner = {k: t for k, t in m.items() if k != v}
            if not inner:
                return n
            if v in danger:
                nv = fresh(v)
                inner[v] = Var(nv)
                return type(n)(nv, go(n.body, inner))
            return type(n)(v, go(n.body, inner))
        kids = children(n)
        new = tuple(go(k, m) for k in kids)
        return rebuild(n, new) if new != kids else n

    return go(node, dict(mapping))


def replace_terms(node, mapping: dict):
    """Replace whole subterms (e.g. array reads) by other terms.

    Keys are matched structurally; callers ensure no binder captures the
    free variables of the keys or the replacements.
    """
    if node in mapping:
        return mapping[node]
    kids = children(node)
    if not kids:
        return node
    new = tuple(replace_terms(k, mapping) for k in kids)
    return rebuild(node, new) if new != kids else node


def has_node(node, kind) -> bool:
    return any(isinstance(n, kind) for n in walk(node))


def reads_of(node) -> set:
    return {n for n in walk(node) if isinstance(n, Read)}


def is_arithmetic(node) -> bool:
    return not any(isinstance(n, (Read, Card)) for n in walk(node))


# -- classification --------------------------------------------------------

def _basic_reads(node, bound=frozenset(), extra=frozenset()) -> bool:
    """Every read index is a variable or parameter not bound by a quantifier.

    Variables in ``extra`` (e.g. a counting variable) are accepted as
    indices even though they are bound outside ``node``.
    """
    if isinstance(node, Read):
        idx = node.index
        if isinstance(idx, Param):
            return True
        return isinstance(idx, Var) and (idx.name not in bound or idx.name in extra)
    if isinstance(node, Exists):
        return _basic_reads(node.body, bound | {node.var}, extra)
    if isinstance(node, Card):
        return False
    return all(_basic_reads(c, bound, extra) for c in children(node))


def _only_read_index(body, v: str) -> bool:
    """``v`` occurs in ``body`` only as the index of an array read."""
    def go(n):
        if isinstance(n, Read):
            if n.index == Var(v):
                return True
            return go(n.index)
        if isinstance(n, Var):
            return n.name != v
        if isinstance(n, (Card, Exists)) and n.var == v:
            return True
        return all(go(c) for c in children(n))
    return go(body)


def _flat(node, simple: bool, bound=frozenset(), card=None) -> bool:
    if isinstance(node, Read):
        idx = node.index
        if isinstance(idx, Param):
            return True
        if isinstance(idx, Var):
            return idx.name == card or idx.name not in bound
        if isinstance(idx, Card):
            return _flat(idx, simple, bound, card)
        return False
    if isinstance(node, Card):
        fv = free_vars(node)
        if fv & (bound | ({card} if card else set())):
            return False
        if simple and not _only_read_index(node.body, node.var):
            return False
        return _flat(node.body, simple, frozenset(), node.var)
    if isinstance(node, Exists):
        return _flat(node.body, simple, bound | {node.var}, card)
    return all(_flat(c, simple, bound, card) for c in children(node))


def _conjuncts(f):
    if isinstance(f, And):
        out = []
        for a in f.args:
            out.extend(_conjuncts(a))
        return out
    return [f]


def eflat_shape(f):
    """Return ``(zs, alpha_conjuncts, [(card, z), ...])`` when ``f`` has the
    shape ``exists zs. alpha /\\ #{x|b1} = z1 /\\ ...``, else ``None``."""
    zs = []
    while isinstance(f, Exists):
        zs.append(f.var)
        f = f.body
    alpha, cards = [], []
    for c in _conjuncts(f):
        if isinstance(c, Eq) and isinstance(c.left, Card) and isinstance(c.right, Var) \
                and c.right.name in zs:
            cards.append((c.left, c.right.name))
        elif isinstance(c, Eq) and isinstance(c.right, Card) and isinstance(c.left, Var) \
                and c.left.name in zs:
            cards.append((c.right, c.left.name))
        elif has_node(c, Card):
            return None
        else:
            alpha.append(c)
    if not cards:
        return None
    return zs, alpha, cards


def classify(f: Formula) -> FormulaClass:
    has_read = has_node(f, Read)
    has_card = has_node(f, Card)
    if not has_read and not has_card:
        return FormulaClass.Arithmetic
    if not has_card:
        return FormulaClass.Basic if _basic_reads(f) else FormulaClass.General
    if _flat(f, simple=True):
        return FormulaClass.SimpleFlat
    if _flat(f, simple=False):
        return FormulaClass.Flat
    shape = eflat_shape(f)
    if shape is not None:
        zs, alpha, cards = shape
        zset = frozenset(zs)
        ok = all(_basic_reads(a, extra=zset) for a in alpha) and all(
            _basic_reads(c.body, extra=zset | {c.var}) for c, _ in cards)
        if ok:
            simple = all(_only_read_index(c.body, c.var) for c, _ in cards)
            return FormulaClass.SimpleEFlat if simple else FormulaClass.EFlat
    if not has_read:
        return FormulaClass.Constraint
    return FormulaClass.General
