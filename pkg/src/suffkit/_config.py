"""Tolerance constants shared by every module."""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12
    density: float = 1e-10
    probability: float = 1e-10
    povm_psd: float = 1e-9
    povm_sum: float = 1e-8
    choi: float = 1e-8
    commutator: float = 1e-9
    rank: float = 1e-9
    solver: float = 1e-8
    max_dim: int = 64


TOL = Tolerances()


def default_solver_tol() -> float:
    """Solver tolerance, overridable through ``SUFFKIT_TOL``."""
    raw = os.environ.get("SUFFKIT_TOL")
    if raw is None:
        return TOL.solver
    value = float(raw)
    if not value > 0:
        raise ValueError(f"SUFFKIT_TOL must be positive, got {raw!r}")
    return value
