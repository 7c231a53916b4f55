"""Bounded model checking of the send-receive broadcast primitive.

With at least f+1 correct senders every correct process eventually accepts;
with at most f of them acceptance can fail.  The second system yields a
counterexample, replayed against the unrolled formula and printed per step.
"""
import sys

from arca.mcheck import bmc, load_system, replay, shipped, trace

depth = int(sys.argv[1]) if len(sys.argv) > 1 else 4
for name in ("srbp_correct.arcs", "srbp_correct_f.arcs"):
    spec = load_system(shipped(name), require_unsafe=True)
    r = bmc(spec, depth)
    print(f"{name}: {r.summary()}")
    if r.status == "counterexample":
        print("  replay:", "ok" if all(replay(r.obligation)) else "FAILED")
        for st in trace(spec, r.obligation.verdict.model, r.depth):
            print("  ", st)
