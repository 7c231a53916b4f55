import itertools
import random

import pytest
from hypothesis import given, strategies as st

from arca.core import FormulaClass, classify
from arca.normalize import (
    EFlatForm, NotFlatError, eliminate_parameter_reads, flatten, lift_exists, make_partition,
    set_partitions, simple_preprocess, to_eflat,
)
from arca.semantics import FiniteModel, eval_finite, eval_term
from arca.syntax import Card, Exists, Read, Var, walk

from conftest import F
from generators import WRITE, simple_flat


def holds(e: EFlatForm, m: FiniteModel, lo=-2) -> bool:
    """Whether ``e.formula()`` is true in ``m``.  Count results are computed
    directly; the remaining existential names are enumerated."""
    results = {c.result: c for c in e.cards}
    others = [z for z in e.zs if z not in results]
    span = range(lo, max(m.n, 2) + 2)
    for vals in itertools.product(span, repeat=len(others)):
        env = dict(zip(others, vals))
        m2 = FiniteModel(m.n, m.params, {**m.vars, **env}, m.arrays)
        for z, c in results.items():
            env[z] = eval_term(Card(c.var, c.body), m2, {})
        m3 = FiniteModel(m.n, m.params, {**m.vars, **env}, m.arrays)
        if eval_finite(e.matrix, m3):
            return True
    return False


def random_model(rng, n=None, arrays=("a", "b")):
    n = rng.randint(0, 3) if n is None else n
    return FiniteModel(n, {"M": rng.randint(-1, 2)},
                       {v: rng.randint(-1, 3) for v in ("y", "z", "w", "v")},
                       {a: [rng.randint(-1, 1) for _ in range(n)] for a in arrays})


def models(seed, count=40):
    rng = random.Random(seed)
    return [random_model(rng) for _ in range(count)]


# -- flatten -----------------------------------------------------------------


def test_flatten_without_counts():
    e = flatten(F("(< (a y) N)"))
    assert e.K == 0 and e.zs == () and e.matrix == F("(< (a y) N)")


def test_flatten_shares_identical_bodies():
    e = flatten(F(WRITE))
    assert e.K == 1
    assert e.cards[0].body == F("(= (b x) (a x))", vars={"x"})
    assert not any(isinstance(n, Card) for n in walk(e.matrix))


def test_flatten_nested_counts_innermost_first():
    e = flatten(F("(< (card x (< (a x) (card w (> (a w) 0)))) N)"))
    assert e.K == 2
    inner, outer = e.cards
    assert Var(inner.result) in list(walk(outer.body))
    assert e.dependency_graph() == {inner.result: [], outer.result: [inner.result]}
    assert e.is_acyclic()


def test_flatten_rejects_general_formulas():
    with pytest.raises(NotFlatError):
        flatten(F("(= (a (a y)) 0)"))


def test_flatten_is_equivalent_on_random_models():
    rng = random.Random(11)
    for _ in range(40):
        f = F(simple_flat(rng))
        e = flatten(f)
        for m in models(rng.random(), 10):
            assert holds(e, m) == eval_finite(f, m), f


def test_from_eflat_reads_explicit_form():
    e = to_eflat(F("(exists (w) (and (= (card x (= (a x) w)) w) (< w N)))"))
    assert e.K == 1 and len(e.zs) == 1
    assert e.cards[0].result == e.zs[0]


def test_lift_exists_only_positive_binders():
    f = F("(and (exists (w) (< w N)) (not (exists (v) (< v 0))))")
    g, lifted = lift_exists(f)
    assert len(lifted) == 1
    assert sum(isinstance(n, Exists) for n in walk(g)) == 1


# -- reads at parameters --------------------------------------------------------


def test_eliminate_parameter_reads_example():
    e = to_eflat(F("(= (a y) 3)"))
    out = eliminate_parameter_reads(e)
    # inside: a fresh u with one position at y holding it; outside: 0 = 3 is pruned
    assert len(out) == 1
    d = out[0]
    assert d.K == 1
    assert not any(isinstance(n, Read) and n.index != Var(d.var) for n in walk(d.formula()))
    for n in range(0, 3):
        for y in range(-1, 4):
            for vals in itertools.product(range(2, 4), repeat=n):
                m = FiniteModel(n, vars={"y": y}, arrays={"a": list(vals)})
                assert holds(d, m) == eval_finite(F("(= (a y) 3)"), m)


def test_eliminate_parameter_reads_noop():
    e = to_eflat(F("(= (card x (= (a x) 1)) N)"))
    assert eliminate_parameter_reads(e) == [e]


def test_eliminate_parameter_reads_at_count_result():
    f = F("(and (= (card x (= (a x) 1)) z) (= (a z) 1))")
    e = to_eflat(f)
    out = eliminate_parameter_reads(e)
    for m in models(5, 60):
        assert any(holds(d, m) for d in out) == eval_finite(f, m)


def test_eliminate_parameter_reads_equivalent_on_random_formulas():
    rng = random.Random(3)
    for _ in range(30):
        f = F(simple_flat(rng))
        out = eliminate_parameter_reads(to_eflat(f))
        for m in models(rng.random(), 8):
            assert any(holds(d, m) for d in out) == eval_finite(f, m), f


# -- partition -----------------------------------------------------------------


def test_make_partition_k0_unchanged():
    e = to_eflat(F("(< y N)"))
    assert make_partition(e) is e


def test_make_partition_k1_two_regions():
    p = make_partition(to_eflat(F("(= (card x (= (a x) 1)) z)")))
    assert p.K == 2
    for m in models(8):
        assert holds(p, m, lo=0) == eval_finite(F("(= (card x (= (a x) 1)) z)"), m)


def test_make_partition_k2_regions_are_disjoint_and_cover():
    f = F("(and (= (card x (= (a x) 1)) z) (= (card x (< (b x) 1)) y))")
    e = to_eflat(f)
    p = make_partition(e)
    assert p.K == 4
    for m in models(9):
        assert holds(p, m, lo=0) == eval_finite(f, m)
        for i in range(m.n):
            hits = sum(eval_finite(c.body, FiniteModel(m.n, m.params, {**m.vars, "x": i}, m.arrays))
                       for c in p.cards)
            assert hits == 1


@given(st.randoms(use_true_random=False))
def test_partition_is_invariant_under_body_permutation(rng):
    f = F(simple_flat(rng, n_cards=2))
    e = to_eflat(f)
    cards = list(e.cards)
    rng.shuffle(cards)
    q = make_partition(EFlatForm(e.matrix, tuple(cards), e.zs))
    for m in models(rng.random(), 6):
        assert holds(q, m, lo=0) == eval_finite(f, m)


# -- simple preprocessing -----------------------------------------------------------


def test_set_partitions_bell_numbers():
    assert [len(set_partitions(list(range(n)))) for n in range(5)] == [1, 1, 2, 5, 15]


def test_simple_preprocess_without_reads():
    e = to_eflat(F("(= (card x (= (a x) 1)) N)"))
    [r] = simple_preprocess(e)
    assert r.form == e and r.arrays == ("a",)


def test_simple_preprocess_guesses_on_write_formula():
    e = to_eflat(F(WRITE))
    out = simple_preprocess(e)
    # y inside with one block and one class; y outside
    assert [r.guess.describe() for r in out] == [
        "in range: y; out of range: -; equal indices: y; equal tuples: 0",
        "in range: -; out of range: y",
    ]
    for r in out:
        assert classify(r.matrix) is FormulaClass.Arithmetic
        for c in r.cards:
            assert all(n.index == Var(c.var) for n in walk(c.body) if isinstance(n, Read))


def test_simple_preprocess_keeps_every_model():
    rng = random.Random(21)
    for _ in range(30):
        f = F(simple_flat(rng))
        out = simple_preprocess(to_eflat(f), ("a", "b"))
        for m in models(rng.random(), 8):
            if eval_finite(f, m):
                assert any(holds(r.form, m) for r in out), f


def test_simple_preprocess_rejects_counting_variable_outside_reads():
    e = to_eflat(F("(= (card x (= (+ (a x) x) N)) z)"))
    with pytest.raises(NotFlatError):
        simple_preprocess(e)
