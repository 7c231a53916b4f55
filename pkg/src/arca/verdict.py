"""Verdicts shared by the decision procedures."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from .semantics import FiniteModel


@dataclass
class Sat:
    """Satisfiable.  ``values`` holds the scalar part of the model;
    ``model`` is a full finite model when arrays could be materialized."""

    values: dict = field(default_factory=dict)
    model: Optional[FiniteModel] = None
    certificate: Any = None
    name = "sat"


@dataclass
class Unsat:
    name = "unsat"


@dataclass
class Unknown:
    reason: str = ""
    name = "unknown"


Verdict = Sat | Unsat | Unknown


@dataclass
class ProcessError:
    """The solver process could not be run or misbehaved."""

    detail: str = ""
    name = "error"
