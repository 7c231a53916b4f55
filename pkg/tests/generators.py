"""Seeded random formula generators shared by the property and acceptance
suites.  Everything is printed in .arca syntax and parsed back, so the
generators also exercise the parser."""
import random

from conftest import F

WRITE = ("(and (= (b y) z) (>= (card x (= (b x) (a x))) (- N 1))"
         " (=> (< (card x (= (b x) (a x))) N) (not (= (a y) z))))")


def _coef(rng, t):
    c = rng.choice([1, 1, 1, 2, -1, -2])
    return t if c == 1 else f"(* {c} {t})"


def _lin(rng, atoms, k=None):
    k = k or rng.randint(1, 2)
    parts = [_coef(rng, rng.choice(atoms)) for _ in range(k)]
    if rng.random() < 0.4:
        parts.append(str(rng.randint(-2, 2)))
    return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"


def _atom(rng, atoms, const=True):
    op = rng.choice(["<", "=", "<=", "distinct", "mod-eq"])
    left = _lin(rng, atoms)
    right = str(rng.randint(-2, 2)) if const and rng.random() < 0.5 else _lin(rng, atoms, 1)
    if op == "mod-eq":
        return f"(mod-eq 2 {left} {right})"
    return f"({op} {left} {right})"


def _bool(rng, atom, depth=1):
    if depth == 0 or rng.random() < 0.5:
        f = atom()
        return f"(not {f})" if rng.random() < 0.2 else f
    op = rng.choice(["and", "or"])
    return f"({op} {_bool(rng, atom, depth - 1)} {_bool(rng, atom, depth - 1)})"


def simple_flat(rng: random.Random, arrays=("a", "b"), n_cards=None, scalars=("y", "z")):
    """A random simple flat formula: at most two arrays, at most two counts,
    coefficients of absolute value at most 2."""
    arrays = list(arrays[:rng.randint(1, len(arrays))])
    n_cards = rng.choice([0, 1, 1, 2, 2]) if n_cards is None else n_cards
    inner = [f"({a} x)" for a in arrays] + list(scalars)
    cards = []
    for _ in range(n_cards):
        body = _bool(rng, lambda: _atom(rng, inner[:len(arrays)] + list(scalars[:1])), 1)
        # the counting variable may occur only as a read index
        if not any(f"({a} x)" in body for a in arrays):
            body = f"(and {body} (= ({arrays[0]} x) {rng.randint(-1, 1)}))"
        cards.append(f"(card x {body})")
    outer = list(scalars) + ["N"] + cards
    if rng.random() < 0.6:
        outer.append(f"({rng.choice(arrays)} {rng.choice(scalars)})")
    conj = [_bool(rng, lambda: _atom(rng, outer), 1) for _ in range(rng.randint(1, 3))]
    used = " ".join(conj)
    for c in cards:
        if c not in used:
            conj.append(f"(<= {c} {rng.choice(outer[:3])})")
    text = conj[0] if len(conj) == 1 else "(and " + " ".join(conj) + ")"
    return text


def simple_flat_suite(seed=2024, n=200):
    rng = random.Random(seed)
    return [simple_flat(rng) for _ in range(n)]


def write_suite():
    return [f"(and {WRITE} (not (= (b y) z)))", f"(and {WRITE} (= (b y) z) (>= N 1))"]


def constraint_atom(rng: random.Random, params=("M",)):
    """A random counted body over x with coefficients up to 3, moduli up to 4
    and at most two parameters (``N`` and one more)."""
    terms = ["x", "x", "N"] + list(params)

    def lin():
        parts = []
        for _ in range(rng.randint(1, 2)):
            t = rng.choice(terms)
            c = rng.choice([1, 1, 2, 3, -1, -2])
            parts.append(t if c == 1 else f"(* {c} {t})")
        if rng.random() < 0.5:
            parts.append(str(rng.randint(-3, 3)))
        return parts[0] if len(parts) == 1 else "(+ " + " ".join(parts) + ")"

    def atom():
        op = rng.choice(["<", "=", "<=", "mod-eq"])
        if op == "mod-eq":
            return f"(mod-eq {rng.randint(1, 4)} {lin()} {lin()})"
        return f"({op} {lin()} {lin()})"

    return _bool(rng, atom, 2)


def parse(text):
    return F(text)


def eflat_formula(rng: random.Random, k=None):
    """A random flat formula with ``k`` counts whose bodies may also use the
    counting variable outside reads."""
    k = k or rng.randint(1, 3)
    inner = ["(a x)", "(b x)", "x", "y", "N"]
    bounds = ["N", "y", "z", "(+ y 1)"]
    conj = [f"(<= (card x {_bool(rng, lambda: _atom(rng, inner), 1)}) {rng.choice(bounds)})"
            for _ in range(k)]
    return "(and " + " ".join(conj) + ")"
