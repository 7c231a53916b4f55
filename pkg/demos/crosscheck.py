"""Compare the decision procedure with brute-force search on random
formulas.  Any unsat verdict with a small model is a soundness bug."""
import random
import sys

sys.path.insert(0, "tests")
from generators import simple_flat  # noqa: E402
from conftest import F  # noqa: E402

from arca.oracle import Bounds, crosscheck  # noqa: E402
from arca.simple import decide_simple  # noqa: E402

rng = random.Random(int(sys.argv[1]) if len(sys.argv) > 1 else 1)
tally = {}
for _ in range(30):
    f = F(simple_flat(rng))
    r = crosscheck(f, decide_simple(f), Bounds(n_max=3, value_bound=2))
    tally[r.status] = tally.get(r.status, 0) + 1
    if r.contradiction:
        print("CONTRADICTION:", r.detail)
print(tally)
