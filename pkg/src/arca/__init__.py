"""Decision procedures for Presburger arithmetic with arrays and counting."""

from .parser import ArcaError, SymbolTable, parse, parse_formula
from .core import FormulaClass, classify, free_symbols, substitute
from .semantics import FiniteModel, eval_finite
from .verdict import ProcessError, Sat, Unknown, Unsat

__all__ = [
    "ArcaError", "SymbolTable", "parse", "parse_formula", "FormulaClass", "classify",
    "free_symbols", "substitute", "FiniteModel", "eval_finite", "ProcessError", "Sat",
    "Unknown", "Unsat",
]

__version__ = "0.1.0"
