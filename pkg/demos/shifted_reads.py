"""A count whose body uses the position itself: #{x | a(x) + x = N} = N.

The simple procedure rejects it (x occurs outside a read); the E-flat
procedure decides it through the region system and counting elimination.
"""
from arca.core import classify
from arca.general import decide_eflat
from arca.oracle import Bounds, find_model
from arca.parser import SymbolTable, parse_formula

f = parse_formula("(and (= (card x (= (+ (a x) x) N)) z) (= z N))",
                  SymbolTable(arrays={"a"}, vars={"z"}))
print("class:", classify(f))
v = decide_eflat(f)
print("decide_eflat:", v.name, v.values if v.name == "sat" else "")
fixed = parse_formula("(and (= (card x (= (+ (a x) x) N)) N) (= N 2))", SymbolTable(arrays={"a"}))
print("oracle model at N=2:")
print(find_model(fixed, Bounds(n_max=2, value_bound=2)))
