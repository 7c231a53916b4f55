"""Reference evaluator over finite models."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .parser import ArcaError
from .syntax import (
    And, Card, Cong, Eq, Exists, Lt, Mul, Neg, Not, Num, Param, Read, Sum, Var,
)


class UnboundedQuantifierError(ArcaError):
    pass


@dataclass
class FiniteModel:
    """Values for ``N``, parameters, variables and arrays on ``[0, n)``."""

    n: int
    params: dict = field(default_factory=dict)
    vars: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)

    def read(self, array: str, i: int) -> int:
        if 0 <= i < self.n:
            vals = self.arrays.get(array)
            if vals is None:
                raise KeyError(f"array {array} has no value")
            return vals[i]
        return 0

    def to_dict(self) -> dict:
        return {"N": self.n, "params": dict(self.params), "vars": dict(self.vars),
                "arrays": {a: list(v) for a, v in self.arrays.items()}}

    def __str__(self):
        parts = [f"N = {self.n}"]
        for k in sorted(self.params):
            parts.append(f"{k} = {self.params[k]}")
        for k in sorted(self.vars):
            parts.append(f"{k} = {self.vars[k]}")
        for k in sorted(self.arrays):
            parts.append(f"{k} = {list(self.arrays[k])}")
        return "\n".join(parts)


def quantifier_range(n: int, bound: int) -> range:
    return range(min(-bound, 0), max(bound + 1, n))


def eval_term(t, m: FiniteModel, env: dict, qbound: Optional[int] = None) -> int:
    if isinstance(t, Num):
        return t.value
    if isinstance(t, Var):
        if t.name in env:
            return env[t.name]
        return m.vars[t.name]
    if isinstance(t, Param):
        if t.name == "N":
            return m.n
        return m.params[t.name]
    if isinstance(t, Sum):
        return sum(eval_term(a, m, env, qbound) for a in t.args)
    if isinstance(t, Neg):
        return -eval_term(t.arg, m, env, qbound)
    if isinstance(t, Mul):
        return t.coef * eval_term(t.arg, m, env, qbound)
    if isinstance(t, Read):
        return m.read(t.array, eval_term(t.index, m, env, qbound))
    if isinstance(t, Card):
        count = 0
        for i in range(m.n):
            env2 = dict(env)
            env2[t.var] = i
            if eval_formula(t.body, m, env2, qbound):
                count += 1
        return count
    raise TypeError(f"not a term: {t!r}")


def eval_formula(f, m: FiniteModel, env: dict, qbound: Optional[int] = None) -> bool:
    if isinstance(f, Lt):
        return eval_term(f.left, m, env, qbound) < eval_term(f.right, m, env, qbound)
    if isinstance(f, Eq):
        return eval_term(f.left, m, env, qbound) == eval_term(f.right, m, env, qbound)
    if isinstance(f, Cong):
        diff = eval_term(f.left, m, env, qbound) - eval_term(f.right, m, env, qbound)
        return diff % f.modulus == 0
    if isinstance(f, And):
        return all(eval_formula(a, m, env, qbound) for a in f.args)
    if isinstance(f, Not):
        return not eval_formula(f.arg, m, env, qbound)
    if isinstance(f, Exists):
        if qbound is None:
            raise UnboundedQuantifierError(
                f"cannot evaluate exists {f.var} without a quantifier bound")
        env2 = dict(env)
        for v in quantifier_range(m.n, qbound):
            env2[f.var] = v
            if eval_formula(f.body, m, env2, qbound):
                return True
        return False
    raise TypeError(f"not a formula: {f!r}")


def eval_finite(f, m: FiniteModel, quantifier_bound: Optional[int] = None) -> bool:
    """Truth value of ``f`` in ``m``.

    Existential quantifiers range over ``[-B, B] U [0, N)`` for
    ``B = quantifier_bound``; without a bound they raise
    :class:`UnboundedQuantifierError`.
    """
    return eval_formula(f, m, {}, quantifier_bound)
