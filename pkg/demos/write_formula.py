"""Array writes expressed with counting.

``b`` is ``a`` with position ``y`` overwritten by ``z`` exactly when ``b y = z``
and ``a`` and ``b`` agree on at least N-1 positions, and on all N positions
unless ``a y`` already held ``z``.  Reading back the written position must
give ``z``; the procedure proves that and finds a model of the sat case.
"""
from arca.parser import SymbolTable, parse_formula
from arca.simple import decide_simple

T = SymbolTable(arrays={"a", "b"}, vars={"y", "z"})
WRITE = ("(and (= (b y) z) (>= (card x (= (b x) (a x))) (- N 1))"
         " (=> (< (card x (= (b x) (a x))) N) (not (= (a y) z))))")

for label, extra in [("read-back differs", "(not (= (b y) z))"),
                     ("read-back agrees", "(and (= (b y) z) (>= N 1))")]:
    f = parse_formula(f"(and {WRITE} {extra})", T)
    v = decide_simple(f)
    print(f"{label}: {v.name}")
    if v.name == "sat":
        print(v.model)
        print("certificate:")
        print(v.certificate.dumps())
