"""Abstract syntax for Presburger arithmetic with arrays and cardinalities.

Terms and formulas are immutable dataclasses.  Derived connectives
(or, implication, universal quantification, <=, ...) have no node of their
own; the helper constructors below desugar them into the core connectives
``And``, ``Not`` and ``Exists``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Union


class Term:
    __slots__ = ()


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Term):
    value: int


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True)
class Param(Term):
    name: str


@dataclass(frozen=True)
class Sum(Term):
    args: tuple


@dataclass(frozen=True)
class Neg(Term):
    arg: Term


@dataclass(frozen=True)
class Mul(Term):
    coef: int
    arg: Term


@dataclass(frozen=True)
class Read(Term):
    array: str
    index: Term


@dataclass(frozen=True)
class Card(Term):
    var: str
    body: Formula


@dataclass(frozen=True)
class Lt(Formula):
    left: Term
    right: Term


@dataclass(frozen=True)
class Eq(Formula):
    left: Term
    right: Term


@dataclass(frozen=True)
class Cong(Formula):
    modulus: int
    left: Term
    right: Term


@dataclass(frozen=True)
class And(Formula):
    args: tuple


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


Node = Union[Term, Formula]

N = Param("N")
TRUE = And(())
FALSE = Not(TRUE)
ZERO = Num(0)
ONE = Num(1)


# -- derived forms ---------------------------------------------------------

def neg(f: Formula) -> Formula:
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def conj(*fs: Formula) -> Formula:
    """Conjunction that flattens nested ``And`` and drops ``true``."""
    out = []
    for f in fs:
        if isinstance(f, And):
            out.extend(f.args)
        elif f == FALSE:
            return FALSE
        else:
            out.append(f)
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(*fs: Formula) -> Formula:
    fs = tuple(f for f in fs if f != FALSE)
    if any(f == TRUE for f in fs):
        return TRUE
    if not fs:
        return FALSE
    if len(fs) == 1:
        return fs[0]
    return Not(And(tuple(neg(f) for f in fs)))


def implies(a: Formula, b: Formula) -> Formula:
    return Not(And((a, neg(b))))


def iff(a: Formula, b: Formula) -> Formula:
    return And((implies(a, b), implies(b, a)))


def forall(var: str, body: Formula) -> Formula:
    return Not(Exists(var, neg(body)))


def exists_many(names: Iterable[str], body: Formula) -> Formula:
    for v in reversed(list(names)):
        body = Exists(v, body)
    return body


def le(a: Term, b: Term) -> Formula:
    return Not(Lt(b, a))


def ge(a: Term, b: Term) -> Formula:
    return Not(Lt(a, b))


def gt(a: Term, b: Term) -> Formula:
    return Lt(b, a)


def ne(a: Term, b: Term) -> Formula:
    return Not(Eq(a, b))


def plus(*ts: Term) -> Term:
    ts = tuple(t for t in ts if t != ZERO)
    if not ts:
        return ZERO
    if len(ts) == 1:
        return ts[0]
    return Sum(ts)


def minus(a: Term, b: Term) -> Term:
    return Sum((a, Neg(b)))


def as_term(x: Union[int, Term]) -> Term:
    return Num(x) if isinstance(x, int) else x


# -- traversal -------------------------------------------------------------

def children(node: Node) -> tuple:
    if isinstance(node, (Num, Var, Param)):
        return ()
    if isinstance(node, (Sum, And)):
        return node.args
    if isinstance(node, (Neg, Not)):
        return (node.arg,)
    if isinstance(node, Mul):
        return (node.arg,)
    if isinstance(node, Read):
        return (node.index,)
    if isinstance(node, (Card, Exists)):
        return (node.body,)
    if isinstance(node, (Lt, Eq, Cong)):
        return (node.left, node.right)
    raise TypeError(f"not a syntax node: {node!r}")


def rebuild(node: Node, kids: tuple) -> Node:
    if isinstance(node, (Num, Var, Param)):
        return node
    if isinstance(node, Sum):
        return Sum(tuple(kids))
    if isinstance(node, And):
        return And(tuple(kids))
    if isinstance(node, Neg):
        return Neg(kids[0])
    if isinstance(node, Not):
        return Not(kids[0])
    if isinstance(node, Mul):
        return Mul(node.coef, kids[0])
    if isinstance(node, Read):
        return Read(node.array, kids[0])
    if isinstance(node, Card):
        return Card(node.var, kids[0])
    if isinstance(node, Exists):
        return Exists(node.var, kids[0])
    if isinstance(node, Lt):
        return Lt(kids[0], kids[1])
    if isinstance(node, Eq):
        return Eq(kids[0], kids[1])
    if isinstance(node, Cong):
        return Cong(node.modulus, kids[0], kids[1])
    raise TypeError(f"not a syntax node: {node!r}")


def walk(node: Node) -> Iterator[Node]:
    """Pre-order iteration over every node, binders included."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def transform(node: Node, fn: Callable[[Node], Node]) -> Node:
    """Bottom-up rewrite: ``fn`` sees each node after its children."""
    kids = children(node)
    if kids:
        new = tuple(transform(k, fn) for k in kids)
        if new != kids:
            node = rebuild(node, new)
    return fn(node)


def size(node: Node) -> int:
    return sum(1 for _ in walk(node))


def all_names(node: Node) -> set:
    names = set()
    for n in walk(node):
        if isinstance(n, (Var, Param)):
            names.add(n.name)
        elif isinstance(n, (Card, Exists)):
            names.add(n.var)
        elif isinstance(n, Read):
            names.add(n.array)
    return names


class Fresh:
    """Supply of names ``base!k`` that avoid a given set of used names."""

    def __init__(self, used: Iterable[str] = ()):
        self.used = set(used)
        self.counter = 0

    def __call__(self, base: str = "v") -> str:
        base = base.split("!")[0] or "v"
        while True:
            self.counter += 1
            name = f"{base}!{self.counter}"
            if name not in self.used:
                self.used.add(name)
                return name

    def reserve(self, names: Iterable[str]) -> None:
        self.used.update(names)


# -- printing --------------------------------------------------------------

def show(node: Node) -> str:
    """Render a node in the ``.arca`` s-expression syntax."""
    if isinstance(node, Num):
        return str(node.value)
    if isinstance(node, (Var, Param)):
        return node.name
    if isinstance(node, Sum):
        if not node.args:
            return "0"
        if len(node.args) == 1:
            return show(node.args[0])
        return "(+ " + " ".join(show(a) for a in node.args) + ")"
    if isinstance(node, Neg):
        return f"(- {show(node.arg)})"
    if isinstance(node, Mul):
        return f"(* {node.coef} {show(node.arg)})"
    if isinstance(node, Read):
        return f"(select {node.array} {show(node.index)})"
    if isinstance(node, Card):
        return f"(card {node.var} {show(node.body)})"
    if isinstance(node, Lt):
        return f"(< {show(node.left)} {show(node.right)})"
    if isinstance(node, Eq):
        return f"(= {show(node.left)} {show(node.right)})"
    if isinstance(node, Cong):
        return f"(mod-eq {node.modulus} {show(node.left)} {show(node.right)})"
    if isinstance(node, And):
        if not node.args:
            return "true"
        return "(and " + " ".join(show(a) for a in node.args) + ")"
    if isinstance(node, Not):
        if node.arg == TRUE:
            return "false"
        return f"(not {show(node.arg)})"
    if isinstance(node, Exists):
        return f"(exists ({node.var}) {show(node.body)})"
    raise TypeError(f"not a syntax node: {node!r}")
