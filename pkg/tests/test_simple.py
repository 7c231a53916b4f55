import copy
import random

import pytest

from arca.backend import SolverConfig, open_session
from arca.normalize import simple_preprocess, to_eflat
from arca.oracle import Bounds, find_model
from arca.semantics import eval_finite
from arca.simple import (
    AtomBasis, NotSimpleError, SigmaProblem, build_sigma_system, decide_reduced, decide_simple,
    enumerate_assignments, max_support, prepare, rewrite_bounded_universal, verify_certificate,
)
from arca.syntax import TRUE, Card, Eq, Num, Param, Read, Var, walk
from arca.verdict import Sat, Unknown, Unsat

from conftest import F, needs_solver
from generators import WRITE, simple_flat, write_suite

pytestmark = needs_solver


@pytest.mark.parametrize("K, M", [(1, 4), (2, 12), (3, 22), (4, 32)])
def test_max_support(K, M):
    assert max_support(K) == M


def test_max_support_needs_positive_k():
    with pytest.raises(ValueError):
        max_support(0)


# -- bounded universals ---------------------------------------------------------


def test_rewrite_bounded_universal():
    f = F("(forall (x) (=> (and (<= 0 x) (< x N)) (= (a x) 0)))", vars={"x"})
    pins = set()
    g = rewrite_bounded_universal(f, pins)
    assert isinstance(g, Eq) and g.left == Param("N") and isinstance(g.right, Card)
    assert g.right.body == Eq(Read("a", Var(g.right.var)), Num(0))
    assert pins == {g.right}


def test_rewrite_bounded_universal_keeps_unbounded():
    f = F("(forall (w) (=> (< w N) (= (a w) 0)))")
    assert rewrite_bounded_universal(f) == f


def test_rewrite_bounded_universal_keeps_dependent_bodies():
    # the body mentions the enclosing binder
    f = F("(exists (v) (forall (w) (=> (and (<= 0 w) (< w N)) (< (a w) v))))")
    g = rewrite_bounded_universal(f)
    assert not any(isinstance(n, Card) for n in walk(g))


# -- assignment enumeration ----------------------------------------------------------


def U(text):
    return F(text, vars={"u"})


def test_enumerate_assignments_mutually_exclusive_atoms():
    basis = AtomBasis((U("(= u 0)"), U("(= u 1)")))
    with open_session() as s:
        out = enumerate_assignments(basis, TRUE, s)
    assert sorted(out) == [(0, 0), (0, 1), (1, 0)]


def test_enumerate_assignments_under_alpha():
    basis = AtomBasis((U("(< u y)"),))
    with open_session() as s:
        assert enumerate_assignments(basis, F("(< y (- 1000000))"), s) == [(1,), (0,)]
    # u is free in alpha too, so alpha can fix the atom
    with open_session() as s:
        assert enumerate_assignments(basis, U("(and (= y 0) (= u 5))"), s) == [(0,)]


def test_enumerate_assignments_empty_basis():
    with open_session() as s:
        assert enumerate_assignments(AtomBasis(()), TRUE, s) == [()]
        assert enumerate_assignments(AtomBasis(()), F("(< N 0)"), s) == []


def test_enumerate_assignments_pinned_members_are_true():
    basis = AtomBasis((U("(= u 0)"), U("(< u 3)")), pinned=1)
    with open_session() as s:
        assert enumerate_assignments(basis, TRUE, s) == [(1, 1)]


# -- the linear system ------------------------------------------------------------------


def _reduced(text):
    return simple_preprocess(to_eflat(F(text)))


def test_build_sigma_system_shape():
    [r] = _reduced("(= (card x (= (a x) 1)) z)")
    prob = SigmaProblem.of(r)
    assert len(prob.basis) == 1
    sys_ = build_sigma_system(prob, [(1,), (0,)])
    assert sys_.v == ["v!0", "v!1"] and sys_.mode == "guarded"
    strict = build_sigma_system(prob, [(1,)], "strict")
    assert strict.mode == "strict"
    with pytest.raises(ValueError):
        build_sigma_system(prob, [], "lazy")


def test_decide_reduced_count_all_ones():
    [r] = _reduced("(and (= (card x (= (a x) 1)) z) (= z N) (= N 3))")
    out = decide_reduced(r)
    v = out.verdict
    assert isinstance(v, Sat) and v.values["N"] == 3
    assert v.model.arrays["a"] == [1, 1, 1]
    assert verify_certificate(r, v.certificate, prob=out.problem)


def test_verify_certificate_rejects_tampering():
    [r] = _reduced("(and (= (card x (= (a x) 1)) z) (= (+ z 1) N) (= N 3))")
    out = decide_reduced(r)
    cert = out.verdict.certificate
    assert verify_certificate(r, cert, prob=out.problem)

    bad = copy.deepcopy(cert)
    bad.multiplicity[0] += 1
    assert not verify_certificate(r, bad, prob=out.problem)

    bad = copy.deepcopy(cert)
    bad.values["N"] = 5
    assert not verify_certificate(r, bad, prob=out.problem)

    bad = copy.deepcopy(cert)
    bad.witness[0] = {a: w + 7 for a, w in bad.witness[0].items()}
    assert not verify_certificate(r, bad, prob=out.problem)

    bad = copy.deepcopy(cert)
    bad.values.pop("N")
    assert not verify_certificate(r, bad, prob=out.problem)


# -- decide_simple ---------------------------------------------------------------------


@pytest.mark.parametrize("text, expected", [
    (f"(and {WRITE} (not (= (b y) z)))", Unsat),
    (f"(and {WRITE} (= (b y) z) (>= N 1))", Sat),
    ("(and (= (card x (= (a x) 1)) z) (> z N))", Unsat),
    ("(and (= (card x (= (a x) 1)) (card x (= (a x) 2))) (= N 3))", Sat),
    ("(and (= (card x (= (a x) 1)) (card x (= (a x) 2)))"
     " (= (+ (card x (= (a x) 1)) (card x (= (a x) 2))) N) (= N 3))", Unsat),
    ("(and (= (card x (= (a x) 1)) (card x (= (a x) 2)))"
     " (= (+ (card x (= (a x) 1)) (card x (= (a x) 2))) N) (= N 4))", Sat),
    ("(forall (x) (=> (and (<= 0 x) (< x N)) (and (< 0 (a x)) (< (a x) 0))))", Sat),
    ("(and (> N 0) (forall (x) (=> (and (<= 0 x) (< x N)) (and (< 0 (a x)) (< (a x) 0)))))", Unsat),
    ("(and (= (a y) 4) (<= 0 y) (< y N) (= (card x (= (a x) 4)) 0))", Unsat),
    # a read nowhere in range is 0
    ("(and (= (a y) 4) (= (card x (= (a x) 4)) 0) (> N 2))", Unsat),
    ("(and (= (a y) 0) (= (card x (= (a x) 4)) N) (> N 2))", Sat),
])
def test_decide_simple_examples(text, expected):
    f = F(text, vars={"x"})
    v = decide_simple(f)
    assert isinstance(v, expected), v
    if isinstance(v, Sat) and v.model is not None:
        assert eval_finite(f, v.model, quantifier_bound=v.model.n + 2)


def test_decide_simple_rejects_general_input():
    with pytest.raises(NotSimpleError):
        decide_simple(F("(= (a (a y)) 0)"))


def test_prepare_pins_bounded_universals():
    p = prepare(F("(and (> N 0) (forall (x) (=> (and (<= 0 x) (< x N)) (= (a x) 2))))", vars={"x"}))
    assert [c.pinned for c in p.form.cards] == [True]


def test_sat_certificates_have_small_support():
    for text in write_suite() + ["(and (= (card x (= (a x) 1)) z) (= (card x (< (a x) 3)) y) (> N 5))"]:
        v = decide_simple(F(text))
        if isinstance(v, Sat):
            c = v.certificate
            assert c.K == 0 or c.support <= max_support(c.K)


def test_strict_and_guarded_modes_agree():
    rng = random.Random(77)
    for _ in range(12):
        f = F(simple_flat(rng))
        g = decide_simple(f, mode="guarded")
        s = decide_simple(f, mode="strict")
        if isinstance(g, Unknown) or isinstance(s, Unknown):
            continue
        assert type(g) is type(s), f


def test_bodies_and_atoms_bases_agree():
    rng = random.Random(78)
    for _ in range(12):
        f = F(simple_flat(rng))
        assert type(decide_simple(f, basis="atoms")) is type(decide_simple(f, basis="bodies")), f


def test_unsat_agrees_with_oracle_on_random_formulas():
    rng = random.Random(79)
    for _ in range(15):
        f = F(simple_flat(rng))
        v = decide_simple(f)
        model = find_model(f, Bounds(n_max=2, value_bound=1))
        if model is not None:
            assert isinstance(v, Sat), f


def test_timeout_config_is_passed_through():
    v = decide_simple(F(WRITE), SolverConfig(timeout_ms=60_000))
    assert isinstance(v, Sat)
