from pathlib import Path

import pytest

from arca.mcheck import (
    bmc, invariant_check, load_file, load_system, replay, shipped, trace, unroll, unroll_parts,
)
from arca.parser import ArcaError, ArcaSyntaxError
from arca.syntax import FALSE, Read, walk
from arca.verdict import Sat, Unsat

from conftest import needs_solver

FIX = Path(__file__).parent / "fixtures"

TOGGLE = """
(system (params N) (state-vars c) (state-arrays a)
  (init (= c 0))
  (trans (= c' (+ c 1)))
  (unsafe (= c 2)))
"""


def test_load_counter():
    spec = load_file(FIX / "counter.arcs")
    assert spec.params == ("N",) and spec.state_vars == ("c",) and spec.state_arrays == ("a",)
    assert spec.invariant is not None


@pytest.mark.parametrize("text, msg", [
    ("(system (params N) (state-vars c) (init (= c' 0)) (trans (= c' c)))", "c'"),
    ("(system (params N) (state-vars c__1) (init (= c__1 0)) (trans TRUE))", "__"),
    ("(system (params N) (state-vars c) (trans (= c' c)))", "init"),
    ("(system (params N) (state-vars c) (init (= c 0)) (trans (= c' c)) (bogus 1))", "bogus"),
    ("(system (params N) (state-vars c) (init (= c 0)) (init (= c 1)) (trans (= c' c)))",
     "duplicate"),
    ("(system (params N) (state-vars c) (state-arrays a) (init (= (a (a c)) 0)) (trans (= c' c)))",
     "simple"),
])
def test_load_errors(text, msg):
    with pytest.raises(ArcaError) as e:
        load_system(text)
    assert msg in str(e.value)


def test_missing_unsafe_rejected_for_bmc():
    text = "(system (params N) (state-vars c) (init (= c 0)) (trans (= c' c)))"
    with pytest.raises(ArcaError):
        load_system(text, require_unsafe=True)
    spec = load_system(text)
    with pytest.raises(ArcaError):
        bmc(spec, 1)


def test_syntax_error_positions():
    with pytest.raises(ArcaSyntaxError):
        load_system("(system (params N) (state-vars c)")


def test_unroll_copies_trans_per_step():
    spec = load_system(TOGGLE)
    for d in (0, 1, 3):
        parts = unroll_parts(spec, d)
        assert len(parts) == d + 2
        names = {n.name for p in parts for n in walk(p) if hasattr(n, "name")}
        assert {f"c__{k}" for k in range(d + 1)} <= names
        assert f"c__{d + 1}" not in names
    with pytest.raises(ValueError):
        unroll(spec, -1)


def test_state_arrays_are_renamed_per_step():
    spec = load_file(FIX / "counter.arcs")
    arrays = {n.array for n in walk(unroll(spec, 2)) if isinstance(n, Read)}
    assert arrays == {"a__0", "a__1", "a__2"}


@needs_solver
def test_bmc_toggle_finds_counterexample_at_depth_two():
    r = bmc(load_system(TOGGLE), 4)
    assert r.status == "counterexample" and r.depth == 2
    assert [type(v) for v in r.verdicts] == [Unsat, Unsat, Sat]
    assert all(replay(r.obligation))
    steps = trace(load_system(TOGGLE), r.obligation.verdict.model, 2)
    assert [s["c"] for s in steps] == [0, 1, 2]


@needs_solver
def test_bmc_false_unsafe_is_safe():
    spec = load_system(TOGGLE)
    spec.unsafe = FALSE
    r = bmc(spec, 3)
    assert r.status == "safe" and r.summary() == "safe up to depth 3"


@needs_solver
def test_bmc_counter_is_safe():
    r = bmc(load_file(FIX / "counter.arcs"), 3)
    assert r.status == "safe" and len(r.verdicts) == 4


@needs_solver
def test_invariant_confirmed():
    r = invariant_check(load_file(FIX / "counter.arcs"))
    assert r.status == "confirmed"


@needs_solver
def test_invariant_refuted_by_consecution():
    r = invariant_check(load_file(FIX / "counter_bad.arcs"))
    assert r.status == "refuted"
    assert isinstance(r.verdicts["initiation"], Unsat)
    assert isinstance(r.verdicts["consecution"], Sat)
    assert all(replay(r.consecution))


def test_invariant_required():
    with pytest.raises(ArcaError):
        invariant_check(load_system(TOGGLE))


@pytest.mark.parametrize("name", ["srbp_correct.arcs", "srbp_correct_f.arcs", "srbp_relay.arcs",
                                  "srbp_unforgeability.arcs"])
def test_shipped_systems_load(name):
    spec = load_system(shipped(name), require_unsafe=True)
    assert spec.state_arrays and spec.axioms


@needs_solver
def test_srbp_with_only_f_correct_senders_is_unsafe():
    r = bmc(load_system(shipped("srbp_correct_f.arcs")), 2)
    assert r.status == "counterexample" and r.depth == 2
    assert all(replay(r.obligation))


@needs_solver
def test_srbp_correct_safe_at_small_depth():
    r = bmc(load_system(shipped("srbp_correct.arcs")), 1)
    assert r.status == "safe"
