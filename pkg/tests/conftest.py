import shutil

import pytest
from hypothesis import HealthCheck, settings

from arca.parser import SymbolTable, parse_formula

settings.register_profile(
    "arca", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("arca")

needs_solver = pytest.mark.skipif(shutil.which("z3") is None, reason="z3 not on PATH")


def table(**extra):
    t = SymbolTable(params={"N", "M"}, arrays={"a", "b", "c"}, vars={"y", "z", "w", "v"})
    for kind, names in extra.items():
        getattr(t, kind).update(names)
    return t


def F(text, **extra):
    """Parse a formula over the usual test symbols: arrays a b c, vars y z w v,
    params N M."""
    return parse_formula(text, table(**extra))
