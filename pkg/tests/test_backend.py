import pytest
from hypothesis import given, settings, strategies as st

from arca.backend import (
    Session, SolverConfig, SolverProcessError, emit_script, open_session, parse_response,
    parse_values, run_solver, smt_symbol, solve,
)
from arca.parser import ArcaError
from arca.semantics import FiniteModel, eval_finite
from arca.verdict import ProcessError, Sat, Unknown, Unsat

from conftest import F, needs_solver

pytestmark = needs_solver


def test_script_shape():
    s = emit_script(F("(and (mod-eq 2 y 1) (< y N))"))
    assert s.splitlines() == [
        "(set-logic QF_LIA)",
        "(declare-const N Int)",
        "(declare-const y Int)",
        "(assert (>= N 0))",
        "(assert (and (= (mod (- y 1) 2) 0) (< y N)))",
        "(check-sat)",
        "(get-value (N y))",
    ]


def test_script_logic_with_quantifiers():
    assert emit_script(F("(exists (w) (< w N))")).startswith("(set-logic LIA)")


def test_script_is_deterministic():
    f = F("(and (< (+ y (* 2 z) M) N) (not (= w v)) (mod-eq 3 (- y) z))")
    assert emit_script(f) == emit_script(F("(and (< (+ y (* 2 z) M) N) (not (= w v)) (mod-eq 3 (- y) z))"))


def test_script_rejects_arrays_and_counts():
    with pytest.raises(ArcaError):
        emit_script(F("(= (a y) 0)"))
    with pytest.raises(ArcaError):
        emit_script(F("(= (card x (< x 2)) 0)"))


def test_quoting_of_generated_names():
    assert smt_symbol("z!1") == "z!1"
    assert smt_symbol("and") == "|and|"
    assert smt_symbol("x'") == "|x'|"


def test_sat_with_values():
    v = solve(F("(= N 3)"))
    assert isinstance(v, Sat) and v.values["N"] == 3


def test_parity_unsat():
    assert isinstance(solve(F("(and (mod-eq 2 y 1) (= y 4))")), Unsat)


def test_n_is_nonnegative():
    assert isinstance(solve(F("(< N 0)")), Unsat)


def test_missing_binary_is_process_error():
    v = run_solver("(check-sat)\n", SolverConfig(executable="/nonexistent/solver"))
    assert isinstance(v, ProcessError)


def test_timeout_must_be_positive():
    with pytest.raises(ValueError):
        SolverConfig(timeout_ms=0)


@pytest.mark.parametrize("out, kind", [
    ("unsat\n", Unsat), ("unknown\n", Unknown), ("timeout\n", Unknown),
    ("(error \"line 1\")\n", ProcessError), ("", ProcessError),
])
def test_parse_response(out, kind):
    assert isinstance(parse_response(out), kind)


def test_parse_values_handles_negatives_and_quotes():
    assert parse_values("((N 3) (|x'| (- 2)) (z!1 0))") == {"N": 3, "x'": -2, "z!1": 0}


def test_env_variable_selects_solver(monkeypatch):
    monkeypatch.setenv("ARCA_SOLVER", "/nonexistent/from-env")
    assert SolverConfig().command()[0] == "/nonexistent/from-env"
    assert isinstance(run_solver("(check-sat)\n"), ProcessError)


# -- sessions --------------------------------------------------------------------


def test_session_stack_semantics():
    with open_session() as s:
        s.push()
        s.add(F("(< y 0)"))
        assert isinstance(s.check(), Sat)
        s.push()
        s.add(F("(> y 0)"))
        assert isinstance(s.check(), Unsat)
        s.pop()
        v = s.check(["y"])
        assert isinstance(v, Sat) and v.values["y"] < 0


def test_session_many_push_pop_cycles():
    with open_session() as s:
        s.add(F("(< 5 N)"))
        for i in range(100):
            s.push()
            s.add(F(f"(= N {i})"))
            want = Sat if i > 5 else Unsat
            assert isinstance(s.check(), want)
            s.pop()
        assert isinstance(s.check(), Sat)


def test_session_reports_crash():
    s = Session()
    s.proc.kill()
    s.proc.wait()
    assert isinstance(s.check(), ProcessError)
    with pytest.raises(SolverProcessError):
        s.add(F("(< y 0)"))
    s.close()


def test_session_rejects_arrays():
    with open_session() as s:
        with pytest.raises(ArcaError):
            s.add(F("(= (a y) 0)"))


def test_session_cannot_start_missing_binary():
    with pytest.raises(SolverProcessError):
        Session(SolverConfig(executable="/nonexistent/solver"))


# -- emission is total and faithful ------------------------------------------------

_lin = st.lists(st.tuples(st.integers(-3, 3), st.sampled_from(["y", "z", "N", "1"])),
                min_size=1, max_size=3).map(
    lambda ps: "(+ " + " ".join(f"(* {c} {t})" for c, t in ps) + " 0)")
_atom = st.one_of(
    st.tuples(st.sampled_from(["<", "=", "<=", "distinct"]), _lin, _lin)
    .map(lambda p: f"({p[0]} {p[1]} {p[2]})"),
    st.tuples(st.integers(1, 4), _lin, _lin).map(lambda p: f"(mod-eq {p[0]} {p[1]} {p[2]})"),
)
_qf = st.recursive(_atom, lambda f: st.one_of(
    st.tuples(f, f).map(lambda p: f"(and {p[0]} {p[1]})"),
    st.tuples(f, f).map(lambda p: f"(or {p[0]} {p[1]})"),
    f.map(lambda x: f"(not {x})")), max_leaves=4)


@settings(max_examples=25)
@given(_qf)
def test_solver_models_satisfy_quantifier_free_emissions(text):
    f = F(text)
    v = solve(f)
    assert isinstance(v, (Sat, Unsat))
    if isinstance(v, Sat):
        vals = dict(v.values)
        m = FiniteModel(vals.pop("N"), vars={k: vals.get(k, 0) for k in ("y", "z")})
        assert eval_finite(f, m)
