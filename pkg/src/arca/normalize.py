"""Normal forms consumed by the solvers.

An :class:`EFlatForm` is ``exists zs. alpha /\\ #{x|b_1} = z_1 /\\ ... /\\ #{x|b_K} = z_K``
where every count uses the same counting variable.  ``flatten`` produces
it from a flat formula; the general path then removes reads at
parameters (``eliminate_parameter_reads``) and splits the bodies into a
partition (``make_partition``); the simple path guesses the shape of the
reads at parameters instead (``simple_preprocess``).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .core import (
    FormulaClass, _only_read_index, classify, eflat_shape, free_symbols, replace_terms, substitute,
)
from .linear import simplify
from .parser import ArcaError
from .syntax import (
    FALSE, And, Card, Eq, Exists, Formula, Fresh, Lt, Not, Num, Param, Read, Sum, Term, Var,
    all_names, children, conj, disj, exists_many, le, ne, rebuild, show, walk,
)


class NotFlatError(ArcaError):
    pass


@dataclass(frozen=True)
class CardEq:
    """``#{var | body} = result``; ``pinned`` marks bodies known to hold
    at every position (from a bounded universal)."""

    var: str
    body: Formula
    result: str
    pinned: bool = False

    def formula(self) -> Formula:
        return Eq(Card(self.var, self.body), Var(self.result))


@dataclass(frozen=True)
class EFlatForm:
    matrix: Formula
    cards: tuple = ()
    zs: tuple = ()

    @property
    def K(self) -> int:
        return len(self.cards)

    @property
    def var(self) -> Optional[str]:
        return self.cards[0].var if self.cards else None

    def formula(self) -> Formula:
        return exists_many(self.zs, conj(self.matrix, *(c.formula() for c in self.cards)))

    def arrays(self) -> list:
        arrs = set(free_symbols(self.matrix)[2])
        for c in self.cards:
            arrs |= free_symbols(c.body)[2]
        return sorted(arrs)

    def free(self) -> tuple:
        """Free ``(vars, params)`` of the closed form."""
        vs, ps, _ = free_symbols(self.formula())
        return vs, ps

    def dependency_graph(self) -> dict:
        """Arcs ``z_j -> z_i`` whenever ``z_i`` occurs in the body of ``z_j``."""
        results = {c.result for c in self.cards}
        return {c.result: sorted(free_symbols(c.body)[0] & results) for c in self.cards}

    def is_acyclic(self) -> bool:
        graph = self.dependency_graph()
        state = {}

        def visit(n):
            if state.get(n) == 1:
                return False
            if state.get(n) == 2:
                return True
            state[n] = 1
            ok = all(visit(m) for m in graph.get(n, ()))
            state[n] = 2
            return ok

        return all(visit(n) for n in graph)

    def pretty(self) -> str:
        lines = [f"matrix: {show(self.matrix)}"]
        for c in self.cards:
            pin = "  ; pinned" if c.pinned else ""
            lines.append(f"{c.result} = (card {c.var} {show(c.body)}){pin}")
        if self.zs:
            lines.append("exists: " + " ".join(self.zs))
        return "\n".join(lines)


def lift_exists(f: Formula, fresh: Optional[Fresh] = None) -> tuple:
    """Replace positively occurring existential binders (outside counts) by
    fresh free variables.  Returns ``(formula, lifted_names)``; the result
    is satisfiable iff ``f`` is, and a model of it is a model of ``f``."""
    fresh = fresh or Fresh(all_names(f))
    lifted: list = []

    def go(n, positive):
        if isinstance(n, Exists) and positive:
            name = fresh(n.var)
            lifted.append(name)
            return go(substitute(n.body, n.var, Var(name)), True)
        if isinstance(n, Not):
            inner = go(n.arg, not positive)
            return n if inner is n.arg else Not(inner)
        if isinstance(n, And):
            kids = tuple(go(a, positive) for a in n.args)
            return n if kids == n.args else And(kids)
        return n

    return go(f, True), lifted


def _counting_var(f, taken: set) -> str:
    vs, ps, arrs = free_symbols(f)
    used = vs | ps | arrs | taken
    return "x" if "x" not in used else Fresh(all_names(f) | taken)("x")


def flatten(f: Formula, pinned: Iterable = ()) -> EFlatForm:
    """Abstract every count into a fresh result variable, innermost first.

    Counts with identical bodies (after renaming the bound variable to the
    shared counting variable) share one result.  ``pinned`` lists count
    terms whose bodies hold everywhere.
    """
    cls = classify(f)
    if cls not in (FormulaClass.Arithmetic, FormulaClass.Basic,
                   FormulaClass.SimpleFlat, FormulaClass.Flat):
        raise NotFlatError(f"flatten needs a flat formula, got {cls}")
    pinned = set(pinned)
    X = _counting_var(f, set())
    fresh = Fresh(all_names(f) | {X})
    by_body: dict = {}
    order: list = []

    def go(node):
        if isinstance(node, Card):
            is_pinned = node in pinned
            inner = go(node.body)
            body = inner if node.var == X else substitute(inner, node.var, Var(X))
            ce = by_body.get(body)
            if ce is None:
                ce = CardEq(X, body, fresh("z"), is_pinned)
                order.append(body)
            elif is_pinned and not ce.pinned:
                ce = replace(ce, pinned=True)
            by_body[body] = ce
            return Var(ce.result)
        kids = children(node)
        if not kids:
            return node
        new = tuple(go(k) for k in kids)
        return rebuild(node, new) if new != kids else node

    matrix = go(f)
    cards = tuple(by_body[b] for b in order)
    return EFlatForm(matrix, cards, tuple(c.result for c in cards))


def from_eflat(f: Formula, pinned: Iterable = ()) -> EFlatForm:
    """Read an explicit ``exists zs. alpha /\\ #{x|b} = z /\\ ...`` formula."""
    shape = eflat_shape(f)
    if shape is None:
        raise NotFlatError("formula does not have the E-flat shape")
    zs, alpha, cards = shape
    pinned = set(pinned)
    X = _counting_var(f, set(zs))
    fresh = Fresh(all_names(f) | {X})
    out, extra, seen = [], [], set()
    for card, z in cards:
        body = card.body if card.var == X else substitute(card.body, card.var, Var(X))
        if z in seen:
            z2 = fresh("z")
            extra.append(Eq(Var(z2), Var(z)))
            zs = zs + [z2]
            z = z2
        seen.add(z)
        out.append(CardEq(X, body, z, card in pinned))
    return EFlatForm(conj(*alpha, *extra), tuple(out), tuple(zs))


def to_eflat(f: Formula, pinned: Iterable = ()) -> EFlatForm:
    cls = classify(f)
    if cls in (FormulaClass.EFlat, FormulaClass.SimpleEFlat):
        return from_eflat(f, pinned)
    return flatten(f, pinned)


# -- reads at parameters ---------------------------------------------------

def _param_reads(e: EFlatForm) -> list:
    """Reads whose index is not the counting variable, in order of appearance."""
    X = e.var
    seen = {}
    for part in [e.matrix] + [c.body for c in e.cards]:
        for n in walk(part):
            if isinstance(n, Read) and n.index != Var(X):
                if not isinstance(n.index, (Var, Param)):
                    raise NotFlatError(f"read at a compound index: {show(n)}")
                seen.setdefault(n, None)
    return list(seen)


def _fold_result_reads(e: EFlatForm, fresh: Fresh) -> EFlatForm:
    """Reads ``a(z_h)`` at count results become ``a(y)`` with ``y = z_h``."""
    results = {c.result for c in e.cards}
    mapping, extra, zs = {}, [], list(e.zs)
    ys = {}
    for r in _param_reads(e):
        if isinstance(r.index, Var) and r.index.name in results:
            z = r.index.name
            if z not in ys:
                ys[z] = fresh("y")
                extra.append(Eq(Var(ys[z]), Var(z)))
                zs.append(ys[z])
            mapping[r] = Read(r.array, Var(ys[z]))
    if not mapping:
        return e
    cards = tuple(replace(c, body=replace_terms(c.body, mapping)) for c in e.cards)
    return EFlatForm(conj(replace_terms(e.matrix, mapping), *extra), cards, tuple(zs))


def in_range(t: Term) -> Formula:
    return conj(le(Num(0), t), Lt(t, Param("N")))


def out_of_range(t: Term) -> Formula:
    return disj(Lt(t, Num(0)), le(Param("N"), t))


def _index_terms(reads) -> list:
    return list(dict.fromkeys(r.index for r in reads))


def _named(fresh: Fresh, name: str) -> str:
    """``name`` itself when still unused, else a fresh variant of its base."""
    if name in fresh.used:
        return fresh(name)
    fresh.reserve([name])
    return name


def _pruned(f: Formula) -> bool:
    return simplify(f) == FALSE


def eliminate_parameter_reads(e: EFlatForm) -> list:
    """Disjuncts without reads at parameters, variables or count results.

    Every index ``y`` is guessed inside ``[0, N)`` or outside it.  Outside,
    its reads are 0.  Inside, a read ``a(y)`` becomes a fresh ``u`` together
    with ``#{x | x = y /\\ a(x) = u} = 1``.
    """
    if not e.cards and not _param_reads(e):
        return [e]
    fresh = Fresh(all_names(e.formula()) | set(e.zs))
    e = _fold_result_reads(e, fresh)
    reads = _param_reads(e)
    if not reads:
        return [e]
    X = e.var or _counting_var(e.formula(), set(e.zs))
    idx = _index_terms(reads)
    out = []
    for guess in itertools.product((True, False), repeat=len(idx)):
        inside = dict(zip(idx, guess))
        mapping, extra, cards, zs = {}, [], list(e.cards), list(e.zs)
        for t in idx:
            extra.append(in_range(t) if inside[t] else out_of_range(t))
        for r in reads:
            if not inside[r.index]:
                mapping[r] = Num(0)
                continue
            u, zp = fresh("u"), fresh("zp")
            mapping[r] = Var(u)
            body = conj(Eq(Var(X), r.index), Eq(Read(r.array, Var(X)), Var(u)))
            cards.append(CardEq(X, body, zp))
            extra.append(Eq(Var(zp), Num(1)))
            zs += [u, zp]
        matrix = conj(replace_terms(e.matrix, mapping), *extra)
        if _pruned(matrix):
            continue
        cards = tuple(replace(c, body=replace_terms(c.body, mapping)) for c in cards)
        out.append(EFlatForm(matrix, cards, tuple(zs)))
    return out


# -- partition ---------------------------------------------------------------

def sigma_names(K: int) -> list:
    """Bit strings ``s`` for the ``2^K`` regions; ``s[l] == "1"`` means the
    region lies inside body ``l``."""
    return ["".join(bits) for bits in itertools.product("01", repeat=K)]


def region_body(bodies, bits: str) -> Formula:
    return conj(*(b if s == "1" else Not(b) for b, s in zip(bodies, bits)))


def make_partition(e: EFlatForm) -> EFlatForm:
    """Replace the bodies by the ``2^K`` pairwise disjoint regions they cut
    out, with ``z_l`` the sum of the regions inside body ``l``."""
    if not e.cards:
        return e
    bodies = [c.body for c in e.cards]
    X = e.var
    fresh = Fresh(all_names(e.formula()))
    names = {s: f"u!s{s}" for s in sigma_names(e.K)}
    fresh.reserve(names.values())
    cards = tuple(CardEq(X, region_body(bodies, s), names[s]) for s in sigma_names(e.K))
    sums = []
    for l, c in enumerate(e.cards):
        parts = [Var(names[s]) for s in sigma_names(e.K) if s[l] == "1"]
        sums.append(Eq(Var(c.result), Sum(tuple(parts)) if len(parts) > 1 else parts[0]))
    return EFlatForm(conj(e.matrix, *sums), cards, tuple(e.zs) + tuple(names.values()))


# -- simple path -------------------------------------------------------------

def set_partitions(items: list) -> list:
    """All partitions of ``items`` into blocks, in a fixed order (restricted
    growth strings, lexicographic)."""
    out = []

    def go(i, blocks):
        if i == len(items):
            out.append([list(b) for b in blocks])
            return
        for b in blocks:
            b.append(items[i])
            go(i + 1, blocks)
            b.pop()
        blocks.append([items[i]])
        go(i + 1, blocks)
        blocks.pop()

    go(0, [])
    return out


@dataclass(frozen=True)
class Guess:
    """How a reduced form was obtained: which indices lie in ``[0, N)``,
    which of them coincide (``blocks``), which blocks carry equal array
    tuples (``classes``), the names standing for the reads at each block
    and the result of each class count."""

    inside: tuple = ()
    outside: tuple = ()
    blocks: tuple = ()
    classes: tuple = ()
    u: tuple = ()            # ((array, block) , name) pairs
    class_results: tuple = ()

    def u_name(self, array: str, block: int) -> str:
        return dict(self.u)[(array, block)]

    def describe(self) -> str:
        parts = []
        if self.inside or self.outside:
            parts.append("in range: " + (", ".join(show(t) for t in self.inside) or "-"))
            parts.append("out of range: " + (", ".join(show(t) for t in self.outside) or "-"))
        if self.blocks:
            parts.append("equal indices: " + " | ".join(
                " ".join(show(t) for t in b) for b in self.blocks))
            parts.append("equal tuples: " + " | ".join(
                " ".join(str(j) for j in c) for c in self.classes))
        return "; ".join(parts) or "no guess"


@dataclass(frozen=True)
class ReducedForm:
    """An E-flat form whose matrix is arithmetic and whose bodies read the
    arrays only at the counting variable."""

    form: EFlatForm
    guess: Guess = field(default_factory=Guess)
    arrays: tuple = ()

    @property
    def matrix(self):
        return self.form.matrix

    @property
    def cards(self):
        return self.form.cards

    @property
    def K(self):
        return self.form.K

    def formula(self) -> Formula:
        return self.form.formula()


def check_simple(e: EFlatForm) -> None:
    for c in e.cards:
        if not _only_read_index(c.body, c.var):
            raise NotFlatError(
                f"count body uses the counting variable outside a read: {show(c.body)}")


def simple_preprocess(e: EFlatForm, arrays: Iterable[str] = ()) -> list:
    """Reduced forms whose disjunction is equisatisfiable with ``e``.

    Guesses, in order: which read indices lie in ``[0, N)``; which of those
    coincide; which of the resulting positions hold equal tuples of array
    values.  Each class of positions with equal tuples needs at least as
    many positions carrying that tuple, which a count expresses.
    """
    check_simple(e)
    fresh = Fresh(all_names(e.formula()) | set(e.zs))
    e = _fold_result_reads(e, fresh)
    reads = _param_reads(e)
    arrs = sorted(set(e.arrays()) | set(arrays))
    if not reads:
        return [ReducedForm(e, Guess(), tuple(arrs))]
    X = e.var or _counting_var(e.formula(), set(e.zs))
    idx = _index_terms(reads)
    out = []
    for guess in itertools.product((True, False), repeat=len(idx)):
        inside = [t for t, g in zip(idx, guess) if g]
        outside = [t for t, g in zip(idx, guess) if not g]
        base = [in_range(t) for t in inside] + [out_of_range(t) for t in outside]
        for blocks in set_partitions(inside):
            eqs = []
            for b in blocks:
                eqs += [Eq(t, b[0]) for t in b[1:]]
            for b1, b2 in itertools.combinations(blocks, 2):
                eqs.append(ne(b1[0], b2[0]))
            u = {(a, j): _named(fresh, f"u!{a}!{j}") for j in range(len(blocks)) for a in arrs}
            block_of = {t: j for j, b in enumerate(blocks) for t in b}
            mapping = {}
            for r in reads:
                mapping[r] = Var(u[(r.array, block_of[r.index])]) if r.index in block_of else Num(0)
            for classes in set_partitions(list(range(len(blocks)))):
                cl = []
                for c in classes:
                    for j in c[1:]:
                        cl += [Eq(Var(u[(a, j)]), Var(u[(a, c[0])])) for a in arrs]
                for c1, c2 in itertools.combinations(classes, 2):
                    cl.append(disj(*(ne(Var(u[(a, c1[0])]), Var(u[(a, c2[0])])) for a in arrs)))
                cards = [replace(c, body=replace_terms(c.body, mapping)) for c in e.cards]
                zs = list(e.zs) + list(u.values())
                results = []
                for q, c in enumerate(classes):
                    zp = _named(fresh, f"zp!{q}")
                    body = conj(*(Eq(Read(a, Var(X)), Var(u[(a, c[0])])) for a in arrs))
                    cards.append(CardEq(X, body, zp))
                    cl.append(le(Num(len(c)), Var(zp)))
                    zs.append(zp)
                    results.append(zp)
                matrix = conj(replace_terms(e.matrix, mapping), *base, *eqs, *cl)
                if _pruned(matrix):
                    continue
                g = Guess(tuple(inside), tuple(outside), tuple(tuple(b) for b in blocks),
                          tuple(tuple(c) for c in classes), tuple(sorted(u.items())),
                          tuple(results))
                out.append(ReducedForm(EFlatForm(matrix, tuple(cards), tuple(zs)), g, tuple(arrs)))
    return out
