"""Semantic exception hierarchy for w2lab.

Public functions raise these instead of bare ValueError so callers can
distinguish contract violations from numerical breakdowns.
"""

from __future__ import annotations


class W2LabError(Exception):
    """Base error for this package."""


class InvalidMeasureError(W2LabError, ValueError):
    """A grid or metric measure violates its contract (negative weight,
    non-finite potential, unnormalized mass, broken metric axioms)."""


class InvalidDensityError(W2LabError, ValueError):
    """A density ratio violates its contract (negative entry, wrong length,
    mean bounded away from one)."""


class DegenerateInputError(W2LabError, ValueError):
    """An input hit a documented degeneracy (zero mass, sigma^2 below the
    vacuousness floor, empty support) for which no numeric answer exists."""


class NumericalFailureError(W2LabError, FloatingPointError):
    """A backend failed to certify its own output (LP did not converge,
    duality gap too large, eigensolver disagreement)."""


class ConfigError(W2LabError, ValueError):
    """A suite configuration file is malformed or references unknown names."""
