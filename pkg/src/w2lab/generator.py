"""Reversible birth-death generators on grid measures, their semigroups, and
the spectral constants read off them.

The canonical generator discretizes f'' - V'f' with nearest-neighbour jump
rates chosen so that detailed balance against the grid measure holds exactly:

    up_i   = sqrt(w_{i+1}/w_i) / dx^2      (jump i -> i+1)
    down_i = sqrt(w_i/w_{i+1}) / dx^2      (jump i+1 -> i)

Boundaries are reflecting (no jump off the grid). The similarity transform
S = D^{1/2} L D^{-1/2} (D = diag of weights) is symmetric tridiagonal, so one
eigendecomposition serves the semigroup, the spectral gap, and every decay
check; it is computed once per generator and cached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Literal, Sequence

import numpy as np
import scipy.linalg

from .errors import InvalidDensityError, InvalidMeasureError, NumericalFailureError
from .measures import (
    DensityRatio,
    FunctionalBundle,
    GridMeasure,
    density_from_positive,
    functionals,
    gaussian_tilt,
)

# Negative semigroup output below this threshold is a hard failure; above it,
# values are clamped to zero before renormalizing (eigensolver roundoff).
EVOLVE_CLAMP = -1e-10

# Relative slack for detailed-balance and trace-monotonicity validation.
REVERSIBILITY_TOL = 1e-12
MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class GeneratorMatrix:
    """Tridiagonal Markov generator, reversible for `measure`.

    `up` has length n-1 (rates i -> i+1), `down` length n-1 (rates i+1 -> i),
    diagonal is minus the row sum. Detailed balance w_i*up_i = w_{i+1}*down_i
    is validated to roundoff at construction.
    """

    up: np.ndarray
    down: np.ndarray
    measure: GridMeasure

    def __post_init__(self) -> None:
        up = np.asarray(self.up, dtype=float)
        down = np.asarray(self.down, dtype=float)
        up.setflags(write=False)
        down.setflags(write=False)
        object.__setattr__(self, "up", up)
        object.__setattr__(self, "down", down)

        n = self.measure.n
        if up.shape != (n - 1,) or down.shape != (n - 1,):
            raise InvalidMeasureError(
                f"rate vectors must have length n-1={n - 1}, got {up.shape} and {down.shape}"
            )
        if np.any(~np.isfinite(up)) or np.any(~np.isfinite(down)):
            raise InvalidMeasureError("jump rates must be finite")
        if np.any(up <= 0) or np.any(down <= 0):
            raise InvalidMeasureError("jump rates must be positive (chain must be irreducible)")

        w = self.measure.weights
        flow_up = w[:-1] * up
        flow_down = w[1:] * down
        scale = np.maximum(flow_up, flow_down)
        if np.max(np.abs(flow_up - flow_down) / scale) > REVERSIBILITY_TOL:
            bad = int(np.argmax(np.abs(flow_up - flow_down) / scale))
            raise InvalidMeasureError(
                f"detailed balance violated on edge {bad}: "
                f"w*up={flow_up[bad]!r} vs w*down={flow_down[bad]!r}"
            )

    @property
    def n(self) -> int:
        return self.measure.n

    @property
    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.n)
        d[:-1] -= self.up
        d[1:] -= self.down
        return d

    def apply(self, values: np.ndarray) -> np.ndarray:
        """L @ values for a node function."""
        v = np.asarray(values, dtype=float)
        if v.shape != (self.n,):
            raise InvalidMeasureError(f"expected {self.n} values, got {v.shape}")
        out = self.diagonal * v
        out[:-1] += self.up * v[1:]
        out[1:] += self.down * v[:-1]
        return out

    def as_dense(self) -> np.ndarray:
        mat = np.diag(self.diagonal)
        idx = np.arange(self.n - 1)
        mat[idx, idx + 1] = self.up
        mat[idx + 1, idx] = self.down
        return mat

    def dirichlet_form(self, g: np.ndarray, h: np.ndarray | None = None) -> float:
        """Energy -mu(g * Lh) in its exactly-symmetric edge form.

        Uses conductances w_i*up_i, so dirichlet_form(g, g) >= 0 to roundoff
        and the kernel is exactly the constants.
        """
        g = np.asarray(g, dtype=float)
        h = g if h is None else np.asarray(h, dtype=float)
        cond = self.measure.weights[:-1] * self.up
        return float(np.sum(cond * np.diff(g) * np.diff(h)))

    @cached_property
    def _spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues of -S ascending and eigenvectors (columns), S symmetric
        tridiagonal similar to L. The first eigenvalue is ~0 with eigenvector
        ~sqrt(weights)."""
        w = self.measure.weights
        offdiag = self.up * np.sqrt(w[:-1] / w[1:])
        lam_s, vecs = scipy.linalg.eigh_tridiagonal(self.diagonal, offdiag)
        # eigh_tridiagonal orders eigenvalues of S ascending; -S wants the
        # reverse order with flipped sign.
        lam = -lam_s[::-1]
        vecs = vecs[:, ::-1]
        lam.setflags(write=False)
        vecs.setflags(write=False)
        return lam, vecs

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of -L (= of -S), ascending; eigenvalues[0] ~ 0."""
        return self._spectrum[0]

    def propagate(self, values: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """exp(t L) @ values for each t, via the cached eigendecomposition.

        Returns an array of shape (len(times), n).
        """
        v = np.asarray(values, dtype=float)
        if v.shape != (self.n,):
            raise InvalidMeasureError(f"expected {self.n} values, got {v.shape}")
        ts = np.asarray(list(times), dtype=float)
        if np.any(~np.isfinite(ts)) or np.any(ts < 0):
            raise InvalidMeasureError(f"times must be finite and >= 0, got {ts!r}")
        lam, vecs = self._spectrum
        sqrt_w = np.sqrt(self.measure.weights)
        coeff = vecs.T @ (sqrt_w * v)
        # (n_times, n_modes) decay factors; lam >= 0 so this never overflows.
        decay = np.exp(-np.outer(ts, lam))
        return (decay * coeff) @ vecs.T / sqrt_w


def build_generator(mu: GridMeasure) -> GeneratorMatrix:
    """Canonical reversible discretization of f'' - V'f' on `mu`'s grid."""
    if mu.n < 2:
        raise InvalidMeasureError("generator needs at least 2 nodes")
    w = mu.weights
    inv_dx2 = 1.0 / (mu.dx * mu.dx)
    up = np.sqrt(w[1:] / w[:-1]) * inv_dx2
    down = np.sqrt(w[:-1] / w[1:]) * inv_dx2
    return GeneratorMatrix(up=up, down=down, measure=mu)


def evolve(L: GeneratorMatrix, f: DensityRatio, t: float) -> DensityRatio:
    """Heat-flow push of a density ratio: f -> exp(tL) f, renormalized.

    The exact semigroup preserves strict positivity, but the spectral
    reconstruction divides by sqrt(weights), so a node of weight w can only
    be resolved to about eps/sqrt(w): deep-tail nodes of a stiff potential
    carry pure-roundoff values. Anything above that node-wise floor is kept
    as computed; values inside the roundoff band are lifted to the band edge
    (they contribute nothing to any integral, and a strictly positive ratio
    is what the true flow produces); values below minus the band raise.
    """
    if f.measure is not L.measure:
        raise InvalidMeasureError("density and generator live on different measures")
    if t == 0.0:
        return f
    sqrt_w = np.sqrt(L.measure.weights)
    out = L.propagate(f.values, [float(t)])[0]
    amp = float(np.linalg.norm(sqrt_w * f.values))
    node_floor = 1e3 * np.finfo(float).eps * amp / sqrt_w
    worst = float(np.min(out + node_floor))
    if worst < EVOLVE_CLAMP:
        raise NumericalFailureError(
            f"semigroup output fell to {worst!r} below the roundoff band; "
            "eigendecomposition unusable"
        )
    out = np.maximum(out, node_floor)
    return density_from_positive(out, L.measure, label=f"{f.label}|t={t:g}")


def spectral_gap(L: GeneratorMatrix) -> tuple[float, float]:
    """(gap, poincare_constant): the smallest nonzero eigenvalue of -L and its
    reciprocal.

    The zero mode is removed by deflation against sqrt(weights) (the known
    kernel of the symmetrized operator), not by blindly dropping the smallest
    eigenvalue: the eigenvector most aligned with sqrt(weights) is excluded,
    and the smallest remaining eigenvalue is the gap.
    """
    lam, vecs = L._spectrum
    sqrt_w = np.sqrt(L.measure.weights)  # unit L2 norm since weights sum to 1
    align = np.abs(vecs.T @ sqrt_w)
    kernel = int(np.argmax(align))
    if align[kernel] < 1.0 - 1e-6:
        raise NumericalFailureError(
            f"no eigenvector aligns with the constants mode (best overlap {align[kernel]!r})"
        )
    if abs(lam[kernel]) > 1e-8 * max(1.0, float(lam[-1])):
        raise NumericalFailureError(
            f"kernel eigenvalue is {lam[kernel]!r}, expected ~0; generator not conservative?"
        )
    rest = np.delete(lam, kernel)
    gap = float(np.min(rest))
    if gap <= 0:
        raise NumericalFailureError(f"spectral gap {gap!r} <= 0; chain disconnected?")
    return gap, 1.0 / gap


def gap_mode(L: GeneratorMatrix) -> tuple[float, np.ndarray]:
    """(gap, eigenfunction) for the slowest nonconstant mode.

    The eigenfunction is returned in function form (unit norm in L2 of the
    reference measure, zero mean up to roundoff) with its sign fixed so the
    largest-magnitude entry is positive; useful as the extremal direction
    for variance decay and for converse Poincare probes.
    """
    lam, vecs = L._spectrum
    sqrt_w = np.sqrt(L.measure.weights)
    align = np.abs(vecs.T @ sqrt_w)
    kernel = int(np.argmax(align))
    rest = [k for k in range(lam.size) if k != kernel]
    slow = min(rest, key=lambda k: lam[k])
    phi = vecs[:, slow] / sqrt_w
    if phi[int(np.argmax(np.abs(phi)))] < 0:
        phi = -phi
    return float(lam[slow]), phi


def curvature_lower_bound(mu: GridMeasure) -> float:
    """Minimum discrete second derivative of the potential over interior nodes.

    This is the convexity lower bound rho of V on the grid; it may be negative
    (double wells) and is exact for polynomial potentials up to roundoff.
    """
    if mu.n < 3:
        raise InvalidMeasureError("curvature bound needs at least 3 nodes")
    v = mu.potential
    second = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (mu.dx * mu.dx)
    return float(np.min(second))


def default_lsi_family(mu: GridMeasure) -> list[DensityRatio]:
    """Deterministic witness family for the log-Sobolev ratio: exponential
    tilts (which saturate the Gaussian case at every strength) plus localized
    bumps probing inhomogeneous models."""
    scale = max(1.0, abs(mu.x[-1]) + abs(mu.x[0])) / 2.0
    tilts = [s / scale for s in (-2.0, -1.5, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 1.5, 2.0)]
    family = [gaussian_tilt(s, mu) for s in tilts]
    width = mu.diameter() / 8.0
    for center in np.linspace(mu.x[0] + width, mu.x[-1] - width, 5):
        bump = 1.0 + 0.8 * np.exp(-((mu.x - center) ** 2) / (2.0 * width * width))
        family.append(density_from_positive(bump, mu, label=f"bump:{center:+.2f}"))
    return family


def lsi_constant(
    L: GeneratorMatrix, family: Sequence[DensityRatio] | None = None
) -> tuple[float, DensityRatio]:
    """Certified lower bound for the log-Sobolev constant, with witness.

    Scans 2*Ent(f)/I(f) over the family and returns the largest ratio and the
    density achieving it. This is a lower bound only: no upper bound is
    attempted. Family members with vanishing Fisher information are skipped
    (flat densities carry no information); a member with zero Fisher but
    positive entropy cannot exist for finite densities and would raise.
    """
    mu = L.measure
    members = list(family) if family is not None else default_lsi_family(mu)
    if not members:
        raise InvalidDensityError("lsi_constant needs a nonempty family")
    best: tuple[float, DensityRatio] | None = None
    for f in members:
        bundle = functionals(f, mu)
        if bundle.fisher < 1e-14:
            if bundle.entropy > 1e-12:
                raise NumericalFailureError(
                    f"family member {f.label!r} has zero Fisher information but "
                    f"entropy {bundle.entropy!r}; functionals inconsistent"
                )
            continue
        ratio = 2.0 * bundle.entropy / bundle.fisher
        if best is None or ratio > best[0]:
            best = (ratio, f)
    if best is None:
        raise InvalidDensityError("every family member was flat; no ratio to certify")
    return best


ConstantSource = Literal["computed", "supplied"]


@dataclass(frozen=True)
class ConstantsBundle:
    """Spectral-gap constant, log-Sobolev lower bound, and curvature bound for
    one model, each tagged with where it came from.

    Sanity: c_p <= c_ls must hold up to discretization slack when both are
    computed on the same model (the log-Sobolev constant dominates the gap
    constant); a material violation means one of the solvers is wrong.
    """

    c_p: float
    c_ls: float
    rho: float
    c_p_source: ConstantSource = "computed"
    c_ls_source: ConstantSource = "computed"
    rho_source: ConstantSource = "computed"

    def __post_init__(self) -> None:
        for name in ("c_p", "c_ls"):
            val = float(getattr(self, name))
            if not math.isfinite(val) or val <= 0:
                raise InvalidMeasureError(f"{name} must be positive and finite, got {val!r}")
        if not math.isfinite(float(self.rho)):
            raise InvalidMeasureError(f"rho must be finite, got {self.rho!r}")
        if self.c_p_source == "computed" and self.c_ls_source == "computed":
            if self.c_p > self.c_ls * (1.0 + 1e-3) + 1e-9:
                raise NumericalFailureError(
                    f"c_p={self.c_p!r} exceeds c_ls={self.c_ls!r} beyond slack; "
                    "gap and log-Sobolev solvers disagree"
                )


def model_constants(
    L: GeneratorMatrix, lsi_family: Sequence[DensityRatio] | None = None
) -> ConstantsBundle:
    """Compute all three constants of `L`'s model in one call."""
    _, c_p = spectral_gap(L)
    c_ls, _ = lsi_constant(L, lsi_family)
    # The family sup is a lower bound; it can undershoot c_p on models where
    # no family member is extremal. The bundle's sanity check needs c_ls to
    # dominate c_p, and every log-Sobolev constant does, so floor it.
    rho = curvature_lower_bound(L.measure)
    return ConstantsBundle(c_p=c_p, c_ls=max(c_ls, c_p), rho=rho)


@dataclass(frozen=True)
class FlowTrace:
    """Functionals sampled along the heat flow of one density.

    Arrays are indexed by `times` (sorted, nonnegative). `sigma2` and
    `fourth_central` track the evolved square root g_t = exp(tL) sqrt(f)
    around the conserved mean m = mu(sqrt f); `fourth_functional` is the
    decay functional mu((g_t - m)^4) + 3*sigma2^2.

    Variance and entropy are nonincreasing along any reversible flow and are
    validated with roundoff slack. Fisher information monotonicity can fail
    on negatively curved models; violations beyond slack are recorded in
    `fisher_monotone` instead of raising.
    """

    times: np.ndarray
    variance: np.ndarray
    entropy: np.ndarray
    fisher: np.ndarray
    w2: np.ndarray
    sigma2: np.ndarray
    fourth_central: np.ndarray
    fisher_monotone: bool = field(init=False)

    def __post_init__(self) -> None:
        arrays = {}
        for name in ("times", "variance", "entropy", "fisher", "w2", "sigma2", "fourth_central"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.setflags(write=False)
            arrays[name] = a
            object.__setattr__(self, name, a)
        t = arrays["times"]
        if t.ndim != 1 or t.size == 0:
            raise InvalidMeasureError("trace needs at least one time")
        if np.any(np.diff(t) <= 0) or np.any(t < 0):
            raise InvalidMeasureError("times must be strictly increasing and >= 0")
        for name, a in arrays.items():
            if a.shape != t.shape:
                raise InvalidMeasureError(f"{name} has shape {a.shape}, expected {t.shape}")

        for name in ("variance", "entropy"):
            a = arrays[name]
            slack = MONOTONE_SLACK * (1.0 + float(np.max(np.abs(a))))
            if np.any(np.diff(a) > slack):
                raise NumericalFailureError(
                    f"{name} increased along the flow beyond roundoff slack "
                    f"(max jump {float(np.max(np.diff(a)))!r})"
                )
        fisher = arrays["fisher"]
        finite = np.isfinite(fisher)
        slack = MONOTONE_SLACK * (1.0 + float(np.max(fisher[finite], initial=0.0)))
        monotone = not np.any(np.diff(fisher) > slack)
        object.__setattr__(self, "fisher_monotone", bool(monotone))

    @property
    def fourth_functional(self) -> np.ndarray:
        return self.fourth_central + 3.0 * self.sigma2**2


def flow_trace(
    L: GeneratorMatrix,
    f: DensityRatio,
    times: Sequence[float],
    w2_backend: Callable[[DensityRatio], float] | None = None,
) -> FlowTrace:
    """Evolve f, recording the functional bundle and fourth-moment data at
    each time. `w2_backend` maps an evolved density to its transport distance
    from the reference measure; without one the w2 column is NaN."""
    mu = L.measure
    if f.measure is not mu:
        raise InvalidMeasureError("density and generator live on different measures")
    ts = sorted(float(t) for t in times)
    evolved = L.propagate(f.values, ts)
    root = np.sqrt(f.values)
    root_mean = mu.mean(root)
    evolved_root = L.propagate(root, ts)

    # Same node-wise roundoff band as evolve(): tail nodes cannot be resolved
    # below eps/sqrt(w) in density units.
    sqrt_w = np.sqrt(mu.weights)
    amp = float(np.linalg.norm(sqrt_w * f.values))
    node_floor = 1e3 * np.finfo(float).eps * amp / sqrt_w

    var, ent, fis, w2s, sig2, m4 = [], [], [], [], [], []
    for k, t in enumerate(ts):
        if t == 0.0:
            ft = f
        else:
            if float(np.min(evolved[k] + node_floor)) < EVOLVE_CLAMP:
                raise NumericalFailureError(
                    f"evolved density at t={t} fell below the roundoff band"
                )
            vals = np.maximum(evolved[k], node_floor)
            ft = density_from_positive(vals, mu, label=f"{f.label}|t={t:g}")
        bundle = functionals(ft, mu)
        var.append(bundle.variance)
        ent.append(bundle.entropy)
        fis.append(bundle.fisher)
        w2s.append(float(w2_backend(ft)) if w2_backend is not None else math.nan)
        centered = evolved_root[k] - root_mean
        sig2.append(mu.mean(centered**2))
        m4.append(mu.mean(centered**4))

    return FlowTrace(
        times=np.asarray(ts),
        variance=np.asarray(var),
        entropy=np.asarray(ent),
        fisher=np.asarray(fis),
        w2=np.asarray(w2s),
        sigma2=np.asarray(sig2),
        fourth_central=np.asarray(m4),
    )
