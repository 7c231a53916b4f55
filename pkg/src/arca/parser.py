"""Reader for the ``.arca`` surface syntax.

    (declare-param p) (declare-var v) (declare-array a) (assert F)

Binders are alpha-renamed with a ``!k`` suffix when they would clash with a
declared symbol or with another binder of the same assertion.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .syntax import (
    And, Card, Cong, Eq, Exists, Fresh, Formula, Lt, Mul, Neg, Not, Num, Param,
    Read, Sum, Term, Var, FALSE, TRUE, disj, ge, gt, iff, implies, le, ne, neg,
    show,
)


class ArcaError(Exception):
    """Base class for user-facing errors."""


class ArcaSyntaxError(ArcaError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        super().__init__(f"{line}:{col}: {msg}" if line else msg)


@dataclass
class SymbolTable:
    params: set = field(default_factory=lambda: {"N"})
    arrays: set = field(default_factory=set)
    vars: set = field(default_factory=set)

    def kind(self, name: str):
        if name in self.params:
            return "param"
        if name in self.vars:
            return "var"
        if name in self.arrays:
            return "array"
        return None

    def declare(self, kind: str, name: str) -> None:
        if self.kind(name) is not None:
            if self.kind(name) == kind:
                return
            raise ArcaError(f"symbol {name} declared twice with different kinds")
        {"param": self.params, "var": self.vars, "array": self.arrays}[kind].add(name)

    def copy(self) -> "SymbolTable":
        return SymbolTable(set(self.params), set(self.arrays), set(self.vars))

    def names(self) -> set:
        return self.params | self.arrays | self.vars


# -- s-expressions ---------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    text: str
    line: int
    col: int


class SList(list):
    line = 0
    col = 0


_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def read_sexprs(text: str) -> list:
    """Read every top-level s-expression, keeping source positions."""
    stack = [SList()]
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        tok = m.group(0)
        col = pos - line_start + 1
        if tok == "(":
            lst = SList()
            lst.line, lst.col = line, col
            stack.append(lst)
        elif tok == ")":
            if len(stack) == 1:
                raise ArcaSyntaxError("unbalanced ')'", line, col)
            done = stack.pop()
            stack[-1].append(done)
        elif not tok[0].isspace() and tok[0] != ";":
            stack[-1].append(Atom(tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    if len(stack) != 1:
        open_ = stack[-1]
        raise ArcaSyntaxError("unclosed '('", open_.line, open_.col)
    return stack[0]


def _pos(x):
    return (x.line, x.col)


def _int(x):
    if isinstance(x, Atom) and re.fullmatch(r"-?\d+", x.text):
        return int(x.text)
    return None


_SYMBOL = re.compile(r"[A-Za-z_][A-Za-z0-9_'.]*")
_RESERVED = {
    "and", "or", "not", "=>", "iff", "exists", "forall", "select", "card",
    "mod-eq", "distinct", "true", "false", "+", "-", "*", "<", "<=", ">", ">=", "=",
}


def check_symbol(atom, allow_reserved: bool = False) -> str:
    if not isinstance(atom, Atom):
        raise ArcaSyntaxError("expected a symbol", *_pos(atom))
    name = atom.text
    if "!" in name and not allow_reserved:
        raise ArcaSyntaxError(f"symbol {name!r} uses the reserved character '!'", *_pos(atom))
    base = name.replace("!", "_") if allow_reserved else name
    if not _SYMBOL.fullmatch(base) or name in _RESERVED:
        raise ArcaSyntaxError(f"invalid symbol {name!r}", *_pos(atom))
    return name


class FormulaReader:
    """Turns s-expressions into formulas against a symbol resolver.

    ``resolve(name)`` returns a term for a scalar symbol, the string
    ``"array"`` (optionally with a renamed array id via ``array_name``) or
    ``None`` when undeclared.
    """

    def __init__(self, symbols: SymbolTable, allow_reserved: bool = False,
                 array_name=None, scalar=None):
        self.symbols = symbols
        self.allow_reserved = allow_reserved
        self.array_name = array_name or (lambda name, atom: name if name in symbols.arrays else None)
        self.scalar = scalar or self._default_scalar
        self.fresh = Fresh(symbols.names())

    def _default_scalar(self, name, atom):
        kind = self.symbols.kind(name)
        if kind == "param":
            return Param(name)
        if kind == "var":
            return Var(name)
        return None

    def read(self, sx) -> Formula:
        self.binders = set()
        self.fresh.reserve(self.symbols.names())
        return self.formula(sx, {})

    # binders ---------------------------------------------------------
    def _bind(self, atom, scope):
        name = check_symbol(atom, self.allow_reserved)
        clash = (name in self.binders or self.symbols.kind(name) is not None
                 or name == "N")
        new = self.fresh(name) if clash else name
        self.binders.add(new)
        self.fresh.reserve([new])
        inner = dict(scope)
        inner[name] = new
        return new, inner

    def formula(self, sx, scope) -> Formula:
        if isinstance(sx, Atom):
            if sx.text == "true":
                return TRUE
            if sx.text == "false":
                return FALSE
            raise ArcaSyntaxError(f"expected a formula, got {sx.text!r}", *_pos(sx))
        if not sx:
            raise ArcaSyntaxError("empty form", *_pos(sx))
        head = sx[0]
        if not isinstance(head, Atom):
            raise ArcaSyntaxError("expected an operator", *_pos(sx))
        op, args = head.text, sx[1:]

        def arity(lo, hi=None):
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise ArcaSyntaxError(f"wrong number of arguments to {op}", *_pos(sx))

        if op == "and":
            return And(tuple(self.formula(a, scope) for a in args))
        if op == "or":
            arity(1)
            return disj(*(self.formula(a, scope) for a in args)) if len(args) > 1 \
                else self.formula(args[0], scope)
        if op == "not":
            arity(1, 1)
            return Not(self.formula(args[0], scope))
        if op == "=>":
            arity(2, 2)
            return implies(self.formula(args[0], scope), self.formula(args[1], scope))
        if op == "iff":
            arity(2, 2)
            return iff(self.formula(args[0], scope), self.formula(args[1], scope))
        if op in ("exists", "forall"):
            arity(2, 2)
            if not isinstance(args[0], list) or not args[0]:
                raise ArcaSyntaxError(f"{op} needs a non-empty variable list", *_pos(sx))
            names = []
            inner = scope
            for v in args[0]:
                new, inner = self._bind(v, inner)
                names.append(new)
            body = self.formula(args[1], inner)
            for v in reversed(names):
                body = Exists(v, body) if op == "exists" else Not(Exists(v, neg(body)))
            return body
        if op in ("<", "<=", ">", ">=", "=", "distinct"):
            arity(2, 2)
            a, b = self.term(args[0], scope), self.term(args[1], scope)
            return {"<": Lt, "<=": le, ">": gt, ">=": ge, "=": Eq, "distinct": ne}[op](a, b)
        if op == "mod-eq":
            arity(3, 3)
            n = _int(args[0])
            if n is None:
                raise ArcaSyntaxError("modulus must be an integer literal", *_pos(args[0]))
            if n < 1:
                raise ArcaSyntaxError("modulus must be >= 1", *_pos(args[0]))
            return Cong(n, self.term(args[1], scope), self.term(args[2], scope))
        raise ArcaSyntaxError(f"unknown formula operator {op!r}", *_pos(head))

    def term(self, sx, scope) -> Term:
        if isinstance(sx, Atom):
            n = _int(sx)
            if n is not None:
                return Num(n)
            name = sx.text
            if name in scope:
                return Var(scope[name])
            t = self.scalar(name, sx)
            if t is None:
                if self.array_name(name, sx) is not None:
                    raise ArcaSyntaxError(f"array {name} used as a term", *_pos(sx))
                raise ArcaSyntaxError(f"undeclared symbol {name!r}", *_pos(sx))
            return t
        if not sx or not isinstance(sx[0], Atom):
            raise ArcaSyntaxError("expected a term", *_pos(sx))
        op, args = sx[0].text, sx[1:]
        if op == "+":
            if len(args) < 2:
                raise ArcaSyntaxError("+ needs at least two arguments", *_pos(sx))
            return Sum(tuple(self.term(a, scope) for a in args))
        if op == "-":
            if len(args) == 1:
                return Neg(self.term(args[0], scope))
            if len(args) == 2:
                return Sum((self.term(args[0], scope), Neg(self.term(args[1], scope))))
            raise ArcaSyntaxError("- takes one or two arguments", *_pos(sx))
        if op == "*":
            if len(args) != 2:
                raise ArcaSyntaxError("* takes two arguments", *_pos(sx))
            k = _int(args[0])
            if k is None:
                raise ArcaSyntaxError("coefficient must be an integer literal", *_pos(args[0]))
            return Mul(k, self.term(args[1], scope))
        if op == "select":
            if len(args) != 2:
                raise ArcaSyntaxError("select takes two arguments", *_pos(sx))
            if not isinstance(args[0], Atom):
                raise ArcaSyntaxError("expected an array id", *_pos(args[0]))
            arr = self.array_name(args[0].text, args[0])
            if arr is None:
                raise ArcaSyntaxError(f"undeclared array {args[0].text!r}", *_pos(args[0]))
            return Read(arr, self.term(args[1], scope))
        if len(args) == 1 and op not in scope and self.array_name(op, sx[0]) is not None:
            return Read(self.array_name(op, sx[0]), self.term(args[0], scope))
        if op == "card":
            if len(args) != 2:
                raise ArcaSyntaxError("card takes a variable and a formula", *_pos(sx))
            new, inner = self._bind(args[0], scope)
            return Card(new, self.formula(args[1], inner))
        raise ArcaSyntaxError(f"unknown term operator {op!r}", *_pos(sx[0]))


def parse(text: str, allow_reserved: bool = False) -> tuple:
    """Parse ``.arca`` text into ``(SymbolTable, [Formula, ...])``."""
    symbols = SymbolTable()
    formulas = []
    for form in read_sexprs(text):
        if not isinstance(form, list) or not form or not isinstance(form[0], Atom):
            raise ArcaSyntaxError("expected a top-level command", *_pos(form))
        cmd = form[0].text
        if cmd in ("declare-param", "declare-var", "declare-array"):
            if len(form) != 2:
                raise ArcaSyntaxError(f"{cmd} takes one symbol", *_pos(form))
            name = check_symbol(form[1], allow_reserved)
            if name == "N":
                continue
            try:
                symbols.declare(cmd.split("-")[1], name)
            except ArcaError as e:
                raise ArcaSyntaxError(str(e), *_pos(form[1])) from None
        elif cmd == "assert":
            if len(form) != 2:
                raise ArcaSyntaxError("assert takes one formula", *_pos(form))
            formulas.append(FormulaReader(symbols, allow_reserved).read(form[1]))
        else:
            raise ArcaSyntaxError(f"unknown command {cmd!r}", *_pos(form[0]))
    return symbols, formulas


def parse_formula(text: str, symbols: SymbolTable, allow_reserved: bool = False) -> Formula:
    forms = read_sexprs(text)
    if len(forms) != 1:
        raise ArcaSyntaxError("expected exactly one formula")
    return FormulaReader(symbols, allow_reserved).read(forms[0])


def print_script(symbols: SymbolTable, formulas) -> str:
    lines = []
    for p in sorted(symbols.params - {"N"}):
        lines.append(f"(declare-param {p})")
    for v in sorted(symbols.vars):
        lines.append(f"(declare-var {v})")
    for a in sorted(symbols.arrays):
        lines.append(f"(declare-array {a})")
    for f in formulas:
        lines.append(f"(assert {show(f)})")
    return "\n".join(lines) + "\n"
