"""Bounded brute-force model finder.

Formulas are evaluated on a whole batch of candidate models at once: every
scalar is a numpy vector with one entry per model and every array is a
``(models, positions)`` matrix.  ``find_model`` walks the candidates in a
fixed order (``N`` ascending, then lexicographically over the values of
parameters, variables and array cells, each running from ``-B`` to ``B``)
and returns the first hit.

Quantifiers range over ``[-q, max(n_max, q)]`` for the quantifier bound
``q``.  A model found is a genuine model; the absence of one says nothing
about larger models or witnesses outside the range.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import free_symbols
from .linear import NonLinearError, linearize
from .parser import ArcaError
from .semantics import FiniteModel
from .syntax import (
    And, Card, Cong, Eq, Exists, Formula, Lt, Mul, Neg, Not, Num, Param, Read,
    Sum, Var,
)
from .verdict import Sat, Unknown, Unsat


class SearchSpaceTooLarge(ArcaError):
    pass


@dataclass(frozen=True)
class Bounds:
    n_max: int = 3
    value_bound: int = 2
    quantifier_bound: Optional[int] = None
    cap: int = 10**7

    @property
    def qbound(self) -> int:
        return self.value_bound if self.quantifier_bound is None else self.quantifier_bound


# -- batch evaluation ------------------------------------------------------

@dataclass
class Batch:
    """A batch of models: ``n`` and scalars have shape ``(B,)``, arrays
    ``(B, L)`` with ``L >= max(n)``."""

    n: np.ndarray
    scalars: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.n)

    @property
    def width(self) -> int:
        return int(self.n.max(initial=0))

    @staticmethod
    def of_models(models) -> "Batch":
        models = list(models)
        n = np.array([m.n for m in models], dtype=np.int64)
        L = int(n.max(initial=0))
        names = set()
        for m in models:
            names |= set(m.params) | set(m.vars)
        scalars = {k: np.array([{**m.params, **m.vars}.get(k, 0) for m in models], dtype=np.int64)
                   for k in names}
        arrays = {}
        for a in {a for m in models for a in m.arrays}:
            mat = np.zeros((len(models), L), dtype=np.int64)
            for i, m in enumerate(models):
                vals = list(m.arrays.get(a, ()))[:m.n]
                mat[i, :len(vals)] = vals
            arrays[a] = mat
        return Batch(n, scalars, arrays)


class BatchEvaluator:
    def __init__(self, batch: Batch, qrange: range):
        self.batch = batch
        self.qrange = qrange
        self.B = batch.size

    def full(self, v) -> np.ndarray:
        return np.full(self.B, v, dtype=np.int64)

    def term(self, t, env) -> np.ndarray:
        if isinstance(t, Num):
            return self.full(t.value)
        if isinstance(t, Var):
            if t.name in env:
                return env[t.name]
            return self.batch.scalars[t.name]
        if isinstance(t, Param):
            return self.batch.n if t.name == "N" else self.batch.scalars[t.name]
        if isinstance(t, Sum):
            out = self.term(t.args[0], env)
            for a in t.args[1:]:
                out = out + self.term(a, env)
            return out
        if isinstance(t, Neg):
            return -self.term(t.arg, env)
        if isinstance(t, Mul):
            return t.coef * self.term(t.arg, env)
        if isinstance(t, Read):
            idx = self.term(t.index, env)
            mat = self.batch.arrays[t.array]
            if mat.shape[1] == 0:
                return self.full(0)
            ok = (idx >= 0) & (idx < self.batch.n)
            safe = np.clip(idx, 0, mat.shape[1] - 1)
            return np.where(ok, mat[np.arange(self.B), safe], 0)
        if isinstance(t, Card):
            count = self.full(0)
            for i in range(self.batch.width):
                env2 = dict(env)
                env2[t.var] = self.full(i)
                count += self.formula(t.body, env2) & (i < self.batch.n)
            return count
        raise TypeError(f"not a term: {t!r}")

    def formula(self, f, env) -> np.ndarray:
        if isinstance(f, Lt):
            return self.term(f.left, env) < self.term(f.right, env)
        if isinstance(f, Eq):
            return self.term(f.left, env) == self.term(f.right, env)
        if isinstance(f, Cong):
            return (self.term(f.left, env) - self.term(f.right, env)) % f.modulus == 0
        if isinstance(f, And):
            out = np.ones(self.B, dtype=bool)
            for a in f.args:
                out &= self.formula(a, env)
            return out
        if isinstance(f, Not):
            return ~self.formula(f.arg, env)
        if isinstance(f, Exists):
            vs = []
            g = f
            while isinstance(g, Exists):
                vs.append(g.var)
                g = g.body
            if len(vs) > 1:
                out = self._linked_sum(vs, g, env)
                if out is not None:
                    return out
            return self._exists(vs, g, env)
        raise TypeError(f"not a formula: {f!r}")

    def _exists(self, vs, body, env) -> np.ndarray:
        out = np.zeros(self.B, dtype=bool)
        for v in self.qrange:
            env2 = dict(env)
            env2[vs[0]] = self.full(v)
            out |= self._exists(vs[1:], body, env2) if len(vs) > 1 else self.formula(body, env2)
            if out.all():
                break
        return out

    def _linked_sum(self, vs, body, env):
        """``exists vs. sum(a_i v_i) + e = 0 /\\ F_1(v_1) /\\ ... /\\ F_k(v_k)``
        by dynamic programming over the reachable sums."""
        conjuncts = list(body.args) if isinstance(body, And) else [body]
        block = set(vs)
        own = {v: [] for v in vs}
        ground, link = [], None
        for c in conjuncts:
            used = free_symbols(c)[0] & block
            if len(used) <= 1:
                (own[used.pop()] if used else ground).append(c)
            elif link is None and isinstance(c, Eq):
                link = c
            else:
                return None
        if link is None:
            return None
        try:
            lin = linearize(link.left) - linearize(link.right)
        except NonLinearError:
            return None
        coefs = {}
        for k, c in lin.coeffs.items():
            if isinstance(k, Var) and k.name in block:
                coefs[k.name] = c
            elif free_symbols(k)[0] & block:
                return None
        rest = lin
        for v in coefs:
            rest = rest.drop(v)
        out = np.ones(self.B, dtype=bool)
        for c in ground:
            out &= self.formula(c, env)
        values = list(self.qrange)
        masks = {}
        for v in vs:
            m = np.ones((self.B, len(values)), dtype=bool)
            if own[v]:
                g = And(tuple(own[v]))
                for j, val in enumerate(values):
                    env2 = dict(env)
                    env2[v] = self.full(val)
                    m[:, j] = self.formula(g, env2)
            masks[v] = m
            if v not in coefs:
                out &= m.any(axis=1)
        lo, hi = values[0], values[-1]
        smin, reach = 0, np.ones((self.B, 1), dtype=bool)
        for v, a in coefs.items():
            span = (a * lo, a * hi) if a > 0 else (a * hi, a * lo)
            new_min = smin + span[0]
            new = np.zeros((self.B, reach.shape[1] + span[1] - span[0]), dtype=bool)
            for j, val in enumerate(values):
                off = smin + a * val - new_min
                new[:, off:off + reach.shape[1]] |= reach & masks[v][:, j:j + 1]
            smin, reach = new_min, new
        target = -self.term(rest.term(), env) - smin
        ok = (target >= 0) & (target < reach.shape[1])
        hit = reach[np.arange(self.B), np.clip(target, 0, reach.shape[1] - 1)]
        return out & ok & hit


def eval_batch(f: Formula, batch: Batch, qrange: range) -> np.ndarray:
    return BatchEvaluator(batch, qrange).formula(f, {})


# -- model search ----------------------------------------------------------

def _signature(f: Formula) -> tuple:
    vs, ps, arrs = free_symbols(f)
    scalars = sorted(ps - {"N"}) + sorted(vs)
    return scalars, sorted(arrs)


def search_space(f: Formula, b: Bounds) -> int:
    scalars, arrays = _signature(f)
    w = 2 * b.value_bound + 1
    return w ** len(scalars) * sum(w ** (n * len(arrays)) for n in range(b.n_max + 1))


def _decode(idx: np.ndarray, digits: int, w: int) -> np.ndarray:
    out = np.zeros((len(idx), digits), dtype=np.int64)
    rem = idx.copy()
    for d in range(digits - 1, -1, -1):
        out[:, d] = rem % w
        rem //= w
    return out


def iter_models(f: Formula, b: Bounds, chunk: int = 1 << 15):
    """Yield ``(n, Batch)`` chunks of candidate models in search order."""
    scalars, arrays = _signature(f)
    w = 2 * b.value_bound + 1
    for n in range(b.n_max + 1):
        digits = len(scalars) + n * len(arrays)
        total = w ** digits
        for start in range(0, total, chunk):
            idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
            vals = _decode(idx, digits, w) - b.value_bound
            sc = {s: vals[:, i] for i, s in enumerate(scalars)}
            ar = {}
            for j, a in enumerate(arrays):
                base = len(scalars) + j * n
                ar[a] = vals[:, base:base + n]
            yield n, Batch(np.full(len(idx), n, dtype=np.int64), sc, ar)


def _model_at(batch: Batch, i: int, f: Formula) -> FiniteModel:
    vs, ps, _ = free_symbols(f)
    return FiniteModel(
        int(batch.n[i]),
        params={p: int(batch.scalars[p][i]) for p in sorted(ps - {"N"})},
        vars={v: int(batch.scalars[v][i]) for v in sorted(vs)},
        arrays={a: [int(x) for x in m[i]] for a, m in sorted(batch.arrays.items())},
    )


def find_model(f: Formula, b: Bounds = Bounds()) -> Optional[FiniteModel]:
    """First model of ``f`` within ``b`` in search order, or ``None``."""
    size = search_space(f, b)
    if size > b.cap:
        raise SearchSpaceTooLarge(f"{size} candidate models exceed the cap of {b.cap}")
    q = b.qbound
    qrange = range(-q, max(b.n_max, q) + 1)
    for _, batch in iter_models(f, b):
        hits = np.flatnonzero(eval_batch(f, batch, qrange))
        if len(hits):
            return _model_at(batch, int(hits[0]), f)
    return None


# -- cross-checking --------------------------------------------------------

@dataclass
class CrosscheckReport:
    """``status`` is one of ``contradiction``, ``agree-sat``, ``agree-unsat``,
    ``consistent`` (solver sat, no bounded model) or ``inconclusive``."""

    status: str
    detail: str = ""
    oracle_model: Optional[FiniteModel] = None

    @property
    def contradiction(self) -> bool:
        return self.status == "contradiction"


def crosscheck(f: Formula, verdict, b: Bounds = Bounds()) -> CrosscheckReport:
    model = find_model(f, b)
    if isinstance(verdict, Unsat):
        if model is not None:
            return CrosscheckReport("contradiction", "solver unsat but the oracle found a model", model)
        return CrosscheckReport("agree-unsat", "no bounded model", None)
    if isinstance(verdict, Sat):
        cert = verdict.model
        if cert is not None:
            q = b.qbound
            ok = eval_batch(f, Batch.of_models([cert]), range(-q, max(cert.n, q) + 1))[0]
            if not ok:
                return CrosscheckReport("contradiction", "solver model does not satisfy the formula", model)
        if model is not None:
            return CrosscheckReport("agree-sat", "oracle-sat/solver-sat", model)
        return CrosscheckReport("consistent", "solver sat, no bounded model", None)
    reason = verdict.reason if isinstance(verdict, Unknown) else str(verdict)
    return CrosscheckReport("inconclusive", f"solver unknown: {reason}", model)
