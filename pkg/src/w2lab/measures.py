"""Grid measures, density ratios, and the scalar functionals built from them.

A model here is a probability measure mu on a uniform one-dimensional grid,
with weights proportional to exp(-V) for a potential V sampled at the nodes.
Test densities are nonnegative ratios f with mu(f) = 1, so nu = f.mu is again
a probability measure on the same grid.

Conventions used throughout:

- gradients are central differences in the interior and first-order one-sided
  at the two boundary nodes (numpy.gradient with edge_order=1);
- 0*log(0) = 0 in the entropy sum;
- 0/0 = 0 in the Fisher quotient; a node with f = 0 but nonzero gradient
  makes the Fisher information +infinity (flagged, never raised).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateInputError, InvalidDensityError, InvalidMeasureError

# Mass-normalization slack accepted by the GridMeasure constructor; build paths
# normalize by exact division so only summation roundoff remains.
MASS_TOL = 1e-12

# mu-mean slack accepted for density ratios.
DENSITY_MEAN_TOL = 1e-10

# Below this variance of sqrt(f), centering is treated as degenerate (f = 1
# mu-a.e. up to roundoff) and downstream checks report vacuously.
SIGMA2_FLOOR = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GridMeasure:
    """Probability measure on a uniform grid, weights proportional to exp(-V).

    Attributes:
        x: node coordinates, strictly increasing, uniform spacing.
        potential: V sampled at the nodes (finite).
        weights: positive weights summing to one.
        dx: grid spacing.
        base_index: index of the distinguished base node x0 (defaults to the
            node nearest the origin; ties toward the lower index).
    """

    x: np.ndarray
    potential: np.ndarray
    weights: np.ndarray
    dx: float
    base_index: int = 0

    def __post_init__(self) -> None:
        x = _readonly(self.x)
        v = _readonly(self.potential)
        w = _readonly(self.weights)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "potential", v)
        object.__setattr__(self, "weights", w)

        n = x.size
        if n < 2:
            raise InvalidMeasureError(f"grid needs at least 2 nodes, got {n}")
        if v.shape != x.shape or w.shape != x.shape:
            raise InvalidMeasureError(
                f"shape mismatch: x{x.shape}, potential{v.shape}, weights{w.shape}"
            )
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(v)):
            raise InvalidMeasureError("nodes and potential must be finite")

        steps = np.diff(x)
        if np.any(steps <= 0):
            raise InvalidMeasureError("nodes must be strictly increasing")
        dx = float(self.dx)
        if not math.isfinite(dx) or dx <= 0:
            raise InvalidMeasureError(f"dx must be positive, got {dx}")
        if np.max(np.abs(steps - dx)) > 1e-9 * dx:
            raise InvalidMeasureError("grid spacing is not uniform")

        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            bad = int(np.argmin(w))
            raise InvalidMeasureError(
                f"weights must be finite and positive; offending node {bad} "
                f"(x={x[bad]!r}, w={w[bad]!r})"
            )
        mass = float(np.sum(w))
        if abs(mass - 1.0) > MASS_TOL:
            raise InvalidMeasureError(f"weights sum to {mass!r}, expected 1 within {MASS_TOL}")

        if not (0 <= int(self.base_index) < n):
            raise InvalidMeasureError(f"base_index {self.base_index} outside [0, {n})")
        object.__setattr__(self, "base_index", int(self.base_index))

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def base_point(self) -> float:
        return float(self.x[self.base_index])

    def mean(self, values: np.ndarray) -> float:
        """mu-integral of a node function."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.x.shape:
            raise InvalidMeasureError(f"expected {self.x.shape} values, got {values.shape}")
        return float(np.dot(self.weights, values))

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Grid gradient: central in the interior, one-sided at the ends."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.x.shape:
            raise InvalidMeasureError(f"expected {self.x.shape} values, got {values.shape}")
        return np.gradient(values, self.dx, edge_order=1)

    def squared_distance_to_base(self) -> np.ndarray:
        return (self.x - self.base_point) ** 2

    def diameter(self) -> float:
        return float(self.x[-1] - self.x[0])


def build_grid_measure(
    potential: Callable[[np.ndarray], np.ndarray],
    domain: tuple[float, float],
    n: int,
    *,
    tail_tol: float = 1e-12,
    tail_mass: float | None = None,
) -> GridMeasure:
    """Sample exp(-V) on a uniform grid over `domain` and normalize.

    The potential callable must be vectorized over a float array. Non-finite
    potential values and vanishing total mass are rejected with the offending
    node named. Truncation quality is checked against `tail_tol`: either a
    caller-supplied `tail_mass` estimate, or (default) an estimate obtained by
    extending the domain by half its width on both sides at the same spacing
    and measuring how much relative mass the extension adds.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise InvalidMeasureError(f"domain must be a finite interval, got ({lo}, {hi})")
    if n < 3:
        raise InvalidMeasureError(f"build_grid_measure needs n >= 3, got {n}")

    x = np.linspace(lo, hi, n)
    dx = float(x[1] - x[0])
    v = np.asarray(potential(x), dtype=float)
    if v.shape != x.shape:
        raise InvalidMeasureError(f"potential returned shape {v.shape}, expected {x.shape}")
    if np.any(~np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(v))[0])
        raise InvalidMeasureError(
            f"potential is not finite at node {bad} (x={x[bad]!r}, V={v[bad]!r})"
        )

    # Shift before exponentiating so a large potential offset cannot overflow;
    # weights are invariant under V -> V + const.
    shifted = v - float(np.min(v))
    raw = np.exp(-shifted)
    total = float(np.sum(raw))
    if total <= 0.0 or not math.isfinite(total):
        raise InvalidMeasureError(f"total mass underflowed to {total!r}; domain/potential unusable")
    if np.any(raw <= 0.0):
        bad = int(np.argmin(raw))
        raise InvalidMeasureError(
            f"weight underflowed to zero at node {bad} (x={x[bad]!r}, V={v[bad]!r}); "
            "shrink the domain or lower the potential range"
        )
    w = raw / total
    # One more exact normalization pass: np.sum ordering can leave ~1e-16.
    w = w / float(np.sum(w))

    if tail_mass is None:
        tail_mass = _doubling_tail_estimate(potential, lo, hi, dx, total, float(np.min(v)))
    if tail_mass > tail_tol:
        raise InvalidMeasureError(
            f"domain truncation leaves ~{tail_mass:.3e} relative mass outside "
            f"[{lo}, {hi}], above tail_tol={tail_tol:.3e}"
        )

    base = _nearest_index(x, 0.0)
    return GridMeasure(x=x, potential=v, weights=w, dx=dx, base_index=base)


def _nearest_index(x: np.ndarray, point: float) -> int:
    """Index of the node nearest `point`, ties toward the lower index."""
    d = np.abs(x - point)
    return int(np.argmin(d))


def _doubling_tail_estimate(
    potential: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    dx: float,
    inner_total: float,
    inner_min: float,
) -> float:
    """Relative mass the measure would gain if the domain grew by width/2 per side.

    `inner_total` must have been accumulated with the potential shifted by
    `inner_min`; the extension uses the same shift so the ratio is exact.
    """
    half = (hi - lo) / 2.0
    k = max(1, int(round(half / dx)))
    left = lo - dx * np.arange(k, 0, -1)
    right = hi + dx * np.arange(1, k + 1)
    ext = np.concatenate([left, right])
    v_ext = np.asarray(potential(ext), dtype=float)
    v_ext = v_ext[np.isfinite(v_ext)]
    if v_ext.size == 0:
        return 0.0
    extra = float(np.sum(np.exp(-np.clip(v_ext - inner_min, -700.0, 700.0))))
    return extra / (inner_total + extra)


@dataclass(frozen=True)
class DensityRatio:
    """Nonnegative density f against a GridMeasure, with mu(f) = 1.

    `label` is a short deterministic identifier used in report contexts
    (e.g. "tilt:+0.50"); it carries no semantics.
    """

    values: np.ndarray
    measure: GridMeasure
    label: str = "density"

    def __post_init__(self) -> None:
        f = _readonly(self.values)
        object.__setattr__(self, "values", f)
        mu = self.measure
        if f.shape != mu.x.shape:
            raise InvalidDensityError(f"expected {mu.x.shape} values, got {f.shape}")
        if np.any(~np.isfinite(f)):
            bad = int(np.flatnonzero(~np.isfinite(f))[0])
            raise InvalidDensityError(f"density is not finite at node {bad}")
        if np.any(f < 0):
            bad = int(np.argmin(f))
            raise InvalidDensityError(
                f"density is negative at node {bad} (f={f[bad]!r}); densities are ratios >= 0"
            )
        mean = mu.mean(f)
        if abs(mean - 1.0) > DENSITY_MEAN_TOL:
            raise InvalidDensityError(
                f"mu-mean of density is {mean!r}, expected 1 within {DENSITY_MEAN_TOL}; "
                "use density_from_positive to normalize"
            )

    @property
    def weights(self) -> np.ndarray:
        """Weights of the tilted measure nu = f.mu (sum to 1 up to roundoff)."""
        w = self.values * self.measure.weights
        return w / float(np.sum(w))


def density_from_positive(
    values: np.ndarray, mu: GridMeasure, label: str = "density"
) -> DensityRatio:
    """Normalize a nonnegative, not-identically-zero node function into a ratio."""
    f = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(f)) or np.any(f < 0):
        raise InvalidDensityError("density_from_positive needs finite nonnegative values")
    mean = mu.mean(f)
    if mean <= 0.0:
        raise DegenerateInputError("density has zero mu-mass; cannot normalize")
    return DensityRatio(values=f / mean, measure=mu, label=label)


def gaussian_tilt(m: float, mu: GridMeasure, label: str | None = None) -> DensityRatio:
    """Exponential tilt f proportional to exp(m*x), normalized on the grid.

    Overflow-stable: the exponent is shifted by its max before normalizing.
    """
    m = float(m)
    if not math.isfinite(m):
        raise InvalidDensityError(f"tilt parameter must be finite, got {m}")
    expo = m * mu.x
    f = np.exp(expo - float(np.max(expo)))
    if label is None:
        label = f"tilt:{m:+.2f}"
    return density_from_positive(f, mu, label=label)


@dataclass(frozen=True)
class FunctionalBundle:
    """The four scalar functionals of a density: variance, entropy, Fisher
    information, and Dirichlet energy of f itself (grid gradients).

    All are nonnegative; `fisher` may be +inf when f vanishes on a node where
    its gradient does not.
    """

    variance: float
    entropy: float
    fisher: float
    dirichlet: float

    def __post_init__(self) -> None:
        for name in ("variance", "entropy", "dirichlet"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise InvalidDensityError(f"{name} must be finite, got {val!r}")
            if val < -1e-12:
                raise InvalidDensityError(f"{name} is negative: {val!r}")
            object.__setattr__(self, name, max(0.0, val))
        fisher = float(self.fisher)
        if math.isnan(fisher) or fisher < -1e-12:
            raise InvalidDensityError(f"fisher must be >= 0 or +inf, got {fisher!r}")
        object.__setattr__(self, "fisher", max(0.0, fisher))

    @property
    def fisher_finite(self) -> bool:
        return math.isfinite(self.fisher)


def functionals(f: DensityRatio, mu: GridMeasure | None = None) -> FunctionalBundle:
    """Variance, entropy, Fisher information, and Dirichlet energy of f."""
    if mu is None:
        mu = f.measure
    elif mu is not f.measure:
        _require_same_grid(mu, f.measure)
    vals = f.values
    w = mu.weights

    mean = float(np.dot(w, vals))
    variance = float(np.dot(w, vals * vals)) - mean * mean

    # 0*log(0) = 0: xlogy implements exactly that convention.
    from scipy.special import xlogy

    entropy = float(np.dot(w, xlogy(vals, vals)))

    grad = mu.gradient(vals)
    dirichlet = float(np.dot(w, grad * grad))

    zero = vals == 0.0
    if np.any(zero & (grad != 0.0)):
        fisher = math.inf
    else:
        quot = np.zeros_like(vals)
        nz = ~zero
        quot[nz] = grad[nz] * grad[nz] / vals[nz]
        fisher = float(np.dot(w, quot))

    return FunctionalBundle(variance=variance, entropy=entropy, fisher=fisher, dirichlet=dirichlet)


@dataclass(frozen=True)
class Centering:
    """Square-root centering of a density: c = mu(sqrt f), sigma2 = Var(sqrt f),
    and the centered density f_c = (sqrt f - c)^2 / sigma2 (None when degenerate).

    For a normalized f, c^2 + sigma2 = mu(f) = 1 up to roundoff.
    """

    c: float
    sigma2: float
    centered: DensityRatio | None

    @property
    def is_degenerate(self) -> bool:
        return self.centered is None


def sqrt_centering(f: DensityRatio, mu: GridMeasure | None = None) -> Centering:
    """Center sqrt(f) at its mean and renormalize the squared remainder.

    When Var(sqrt f) falls below SIGMA2_FLOOR the density is flat up to
    roundoff and no centered density exists; the returned Centering is
    degenerate and callers report vacuously rather than dividing by ~0.
    """
    if mu is None:
        mu = f.measure
    elif mu is not f.measure:
        _require_same_grid(mu, f.measure)
    root = np.sqrt(f.values)
    c = mu.mean(root)
    sigma2 = mu.mean((root - c) ** 2)
    if sigma2 < SIGMA2_FLOOR:
        return Centering(c=c, sigma2=sigma2, centered=None)
    centered = (root - c) ** 2 / sigma2
    ratio = density_from_positive(centered, mu, label=f.label + "|centered")
    return Centering(c=c, sigma2=sigma2, centered=ratio)


def _require_same_grid(a: GridMeasure, b: GridMeasure) -> None:
    if a.n != b.n or abs(a.dx - b.dx) > 1e-12 * a.dx or a.x[0] != b.x[0]:
        raise InvalidMeasureError("operands live on different grids")
