"""Hopf-Lax semigroup on grid functions and the transport lower bound it
certifies.

Q_t h(x) = min_y [ h(y) + |x - y|^2 / (2t) ], minimized exactly over the
grid (no descent, no pruning). The grid minimum is a lower bound for the
continuum infimum restricted to the interval, off by at most
dx * Lip(h) / 2 + dx^2 / (8t) at any node, which is why the residual and
expansion checks below carry explicit dx-aware tolerances instead of
pretending to machine precision.

The dual route: for any h, 2 * (mean of Q_1 h under the source - mean of h
under the target) never exceeds the squared quadratic transport distance
between source and target. Feeding in the (scaled, negated) target potential
of the exact LP turns this into an equality check of two independent
solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidMeasureError
from .measures import DensityRatio, GridMeasure

# Target rows per chunk of the exact minimization; bounds peak memory at
# roughly HOPF_LAX_CHUNK * n floats.
HOPF_LAX_CHUNK = 512

# A node counts as a kink when its one-sided slopes differ by more than this
# factor times dx (smooth functions give O(dx) mismatch, corners give O(1)).
KINK_SLOPE_FACTOR = 10.0


@dataclass(frozen=True)
class GridFunction:
    """Real function sampled on a uniform grid."""

    x: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)
        if x.ndim != 1 or x.size < 2:
            raise InvalidMeasureError("grid needs at least 2 nodes")
        if v.shape != x.shape:
            raise InvalidMeasureError(f"values shape {v.shape} does not match grid {x.shape}")
        if np.any(~np.isfinite(x)) or np.any(~np.isfinite(v)):
            raise InvalidMeasureError("grid and values must be finite")
        steps = np.diff(x)
        if np.any(steps <= 0):
            raise InvalidMeasureError("grid must be strictly increasing")
        dx = float(steps[0])
        if float(np.max(np.abs(steps - dx))) > 1e-9 * dx:
            raise InvalidMeasureError("grid must be uniformly spaced")
        object.__setattr__(self, "_dx", dx)

    @property
    def dx(self) -> float:
        return self._dx  # type: ignore[attr-defined]

    @property
    def n(self) -> int:
        return self.x.size

    @cached_property
    def lipschitz(self) -> float:
        """Largest one-sided slope magnitude; the grid Lipschitz constant."""
        return float(np.max(np.abs(np.diff(self.values)))) / self.dx

    def gradient(self) -> np.ndarray:
        return np.gradient(self.values, self.dx, edge_order=1)

    @classmethod
    def on_measure(cls, mu: GridMeasure, values: np.ndarray) -> "GridFunction":
        return cls(x=mu.x, values=values)


@dataclass(frozen=True)
class HopfLaxResult:
    """Q_t of one grid function: infimal values and, per node, the index of
    the grid point achieving the minimum (lowest index on ties)."""

    function: GridFunction
    argmin: np.ndarray
    t: float

    def __post_init__(self) -> None:
        arg = np.asarray(self.argmin)
        arg.setflags(write=False)
        object.__setattr__(self, "argmin", arg)
        if arg.shape != self.function.x.shape:
            raise InvalidMeasureError("argmin must align with the grid")

    @property
    def values(self) -> np.ndarray:
        return self.function.values

    @property
    def touches_boundary(self) -> np.ndarray:
        """Nodes whose minimizer sits on the domain edge; expansion checks
        exclude them because the continuum minimizer escaped the window."""
        n = self.function.n
        return (self.argmin == 0) | (self.argmin == n - 1)


def hopf_lax(h: GridFunction, t: float) -> HopfLaxResult:
    """Exact grid evaluation of the infimal convolution at time t > 0.

    t = 0 is rejected: the semigroup degenerates to the identity there and
    callers that want the identity should not pay for an O(n^2) argmin.
    """
    if not math.isfinite(t) or t <= 0:
        raise InvalidMeasureError(f"time must be finite and > 0, got {t!r}")
    x, v = h.x, h.values
    out = np.empty(h.n)
    arg = np.empty(h.n, dtype=np.intp)
    inv = 0.5 / t
    for start in range(0, h.n, HOPF_LAX_CHUNK):
        stop = min(start + HOPF_LAX_CHUNK, h.n)
        block = v[None, :] + inv * (x[start:stop, None] - x[None, :]) ** 2
        arg[start:stop] = np.argmin(block, axis=1)  # first minimum = lowest index
        out[start:stop] = block[np.arange(stop - start), arg[start:stop]]
    return HopfLaxResult(function=GridFunction(x=x, values=out), argmin=arg, t=float(t))


@dataclass(frozen=True)
class ResidualReport:
    """Hamilton-Jacobi residual d/dt Q_t h + |grad Q_t h|^2 / 2, forward
    difference in time, central difference in space.

    `kink` marks nodes where Q_t is not differentiable on the grid (one-sided
    slope mismatch above KINK_SLOPE_FACTOR * dx) plus the two boundary nodes;
    `max_abs` is the worst residual over the remaining nodes.
    """

    residual: np.ndarray
    kink: np.ndarray
    max_abs: float
    t: float
    dt: float

    def __post_init__(self) -> None:
        for name in ("residual", "kink"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def hj_residual(
    h: GridFunction, t: float, dt: float | None = None, kink_slope_tol: float | None = None
) -> ResidualReport:
    """Check that Q_t h solves the Hamilton-Jacobi equation away from kinks.

    dt defaults to t/100.
    """
    if not math.isfinite(t) or t <= 0:
        raise InvalidMeasureError(f"t must be finite and > 0, got {t!r}")
    if dt is None:
        dt = t / 100.0
    if not math.isfinite(dt) or dt <= 0:
        raise InvalidMeasureError(f"dt must be finite and > 0, got {dt!r}")
    q_now = hopf_lax(h, t)
    q_next = hopf_lax(h, t + dt)
    time_deriv = (q_next.values - q_now.values) / dt
    grad = q_now.function.gradient()
    residual = time_deriv + 0.5 * grad * grad

    slopes = np.diff(q_now.values) / h.dx
    mismatch = np.abs(np.diff(slopes))
    tol = KINK_SLOPE_FACTOR * h.dx if kink_slope_tol is None else float(kink_slope_tol)
    kink = np.ones(h.n, dtype=bool)
    kink[1:-1] = mismatch > tol  # boundary nodes always excluded
    if bool(np.all(kink)):
        raise InvalidMeasureError(
            "every node is a kink at this time; nothing left to measure the residual on"
        )
    max_abs = float(np.max(np.abs(residual[~kink])))
    return ResidualReport(residual=residual, kink=kink, max_abs=max_abs, t=float(t), dt=float(dt))


def small_time_error(h: GridFunction, t: float) -> tuple[float, np.ndarray]:
    """Deviation of Q_t h from the first-order expansion h - (t/2)|grad h|^2.

    Returns the max absolute deviation over interior nodes whose minimizer
    stays off the domain edge, plus the mask of nodes that entered. For
    smooth h the deviation is O(t^2) until it hits the grid floor of order
    dx * Lip + dx^2 / (8t).
    """
    q = hopf_lax(h, t)
    grad = h.gradient()
    predicted = h.values - 0.5 * t * grad * grad
    deviation = np.abs(q.values - predicted)
    valid = ~q.touches_boundary
    valid[0] = valid[-1] = False  # gradient is one-sided there
    if not np.any(valid):
        raise InvalidMeasureError("no interior node with an interior minimizer")
    return float(np.max(deviation[valid])), valid


def dual_lower_bound(f: DensityRatio, h: GridFunction) -> float:
    """2 * (mean of Q_1 h under the tilted measure f*mu - mean of h under mu).

    A certified lower bound for the squared quadratic transport distance
    between f*mu and mu, for ANY h: the supremum over h is the distance
    itself. Feeding the (negated, halved) reference-side potential of the
    exact LP should close the gap up to discretization.
    """
    mu = f.measure
    if mu.x.shape != h.x.shape or not np.allclose(mu.x, h.x, rtol=0.0, atol=1e-12):
        raise InvalidMeasureError("density and function do not live on the same grid")
    q1 = hopf_lax(h, 1.0)
    tilted = float(np.dot(f.weights, q1.values))
    plain = float(np.dot(mu.weights, h.values))
    return 2.0 * (tilted - plain)
