#!/usr/bin/env python
"""
errors.py

Last Header Update: 10/18/26
"""


class ErgodicityError(ValueError):
    """Induced chain has no unique stationary distribution or a state with zero mass."""


class SingularSystemError(ArithmeticError):
    """Fundamental matrix is singular or too ill-conditioned to trust."""


class NoConvergenceError(RuntimeError):
    """Iterative solver exhausted its iteration cap."""


class UnsupportedStructureError(ValueError):
    """Operation requires a potential-certified game."""


class InfeasibleError(ValueError):
    """Simplex floor exceeds what the simplex can hold (lower_bound * n > 1)."""


class ZeroSupportError(ValueError):
    """Policy assigns zero probability where an estimator or update divides by it."""


class LengthError(ValueError):
    """Trajectory is shorter than the estimator parameters require."""


class GenerationError(RuntimeError):
    """Random game generator could not produce an ergodic game."""


class InfeasibleSpecError(ValueError):
    """Generator parameters describe no valid game."""
