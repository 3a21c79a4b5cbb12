"""Executable inequality checks tying together measures, generators, and
transport backends.

Every check returns one or more `InequalityReport` records: lhs, rhs, the
constants that went into the rhs, an explicit tolerance, and a verdict that
is a pure function of (lhs, rhs, tolerance). Nothing here ever decides
"close enough" silently; when a check cannot run (missing constant,
degenerate input) it reports a vacuous verdict with the reason in the
context string instead of passing.

Tolerance convention: quantities built from a transport distance carry
1e-6 absolute plus 2*dx times the larger side (transport discretization
dominates every other error source on a grid); purely spectral or algebraic
identities carry roundoff-level slack only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.special

from .errors import (
    DegenerateInputError,
    InvalidMeasureError,
    NumericalFailureError,
)
from .generator import (
    GeneratorMatrix,
    evolve,
    flow_trace,
    spectral_gap,
)
from .hopflax import GridFunction
from .measures import (
    DensityRatio,
    GridMeasure,
    functionals,
    sqrt_centering,
)
from .transport import OneDimensional, w2_quantile

Verdict = Literal["pass", "fail", "vacuous"]

# W2 backend signature: distance between two measures on the same line.
TransportBackend = Callable[[OneDimensional, OneDimensional], float]

ALGEBRAIC_SLACK = 1e-9

# Lemma-level hypothesis: derivative bounds need densities bounded away from
# zero; this is the default floor.
DENSITY_FLOOR = 1e-8


def quantile_backend(source: OneDimensional, target: OneDimensional) -> float:
    """Default transport backend: the inverse-CDF route."""
    return w2_quantile(source, target).distance


def transport_tolerance(dx: float, lhs: float, rhs: float) -> float:
    """Slack for a comparison whose sides involve a grid transport distance."""
    scale = max(abs(lhs), abs(rhs))
    if not math.isfinite(scale):
        scale = abs(lhs) if math.isfinite(lhs) else 0.0
    return 1e-6 + 2.0 * dx * scale


@dataclass(frozen=True)
class InequalityReport:
    """One checked inequality: lhs <= rhs within tolerance.

    `constants` records every constant entering the rhs. `context` names the
    model and test density. The verdict is recomputable from the numeric
    fields and construction validates that it was.
    """

    id: str
    lhs: float
    rhs: float
    margin: float
    tolerance: float
    verdict: Verdict
    constants: dict[str, float] = field(default_factory=dict)
    context: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "constants", dict(self.constants))
        if self.verdict not in ("pass", "fail", "vacuous"):
            raise InvalidMeasureError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "vacuous":
            return
        for name in ("lhs", "rhs", "margin", "tolerance"):
            val = getattr(self, name)
            if isinstance(val, float) and math.isnan(val):
                raise InvalidMeasureError(f"{name} is NaN on a non-vacuous report {self.id!r}")
        expected = self.rhs - self.lhs
        if math.isfinite(expected) and abs(self.margin - expected) > 1e-9 * (1.0 + abs(expected)):
            raise InvalidMeasureError(
                f"report {self.id!r}: margin {self.margin!r} disagrees with rhs-lhs {expected!r}"
            )
        if self.verdict != self.recomputed_verdict():
            raise InvalidMeasureError(
                f"report {self.id!r}: stored verdict {self.verdict!r} disagrees with its fields"
            )

    def recomputed_verdict(self) -> Verdict:
        if self.verdict == "vacuous":
            return "vacuous"
        return "pass" if self.margin >= -self.tolerance else "fail"

    @classmethod
    def evaluate(
        cls,
        id: str,
        lhs: float,
        rhs: float,
        tolerance: float,
        constants: Mapping[str, float] | None = None,
        context: str = "",
    ) -> "InequalityReport":
        lhs = float(lhs)
        rhs = float(rhs)
        margin = rhs - lhs
        if math.isnan(margin):
            raise NumericalFailureError(
                f"report {id!r}: NaN entered a live comparison (lhs={lhs!r}, rhs={rhs!r})"
            )
        verdict: Verdict = "pass" if margin >= -tolerance else "fail"
        return cls(
            id=id,
            lhs=lhs,
            rhs=rhs,
            margin=margin,
            tolerance=float(tolerance),
            verdict=verdict,
            constants=dict(constants or {}),
            context=context,
        )

    @classmethod
    def vacuous_report(
        cls,
        id: str,
        reason: str,
        context: str = "",
        constants: Mapping[str, float] | None = None,
    ) -> "InequalityReport":
        tagged = f"{context} [vacuous: {reason}]" if context else f"[vacuous: {reason}]"
        return cls(
            id=id,
            lhs=math.nan,
            rhs=math.nan,
            margin=math.nan,
            tolerance=0.0,
            verdict="vacuous",
            constants=dict(constants or {}),
            context=tagged,
        )


def best_p(v: float) -> tuple[float, float]:
    """Minimize p^2 * v^(1/p) over p >= 1.

    The stationary point is p = ln(v)/2, valid when it lands above 1;
    otherwise the boundary p = 1 wins (every 0 <= v <= e^2 case). A coarse
    scan over [1, 20] guards the closed form.
    """
    v = float(v)
    if not math.isfinite(v) or v < 0:
        raise DegenerateInputError(f"best_p needs a finite v >= 0, got {v!r}")
    if v == 0.0:
        return 1.0, 0.0

    def objective(p: float) -> float:
        return p * p * math.exp(math.log(v) / p)

    candidates = [1.0]
    stationary = math.log(v) / 2.0
    if stationary > 1.0:
        candidates.append(stationary)
    candidates.extend(np.linspace(1.0, 20.0, 1901))
    best_pair = min(((objective(p), p) for p in candidates), key=lambda t: (t[0], t[1]))
    return best_pair[1], best_pair[0]


def check_variance_bounds(
    f: DensityRatio,
    L: GeneratorMatrix,
    c_p: float | None = None,
    w2: TransportBackend = quantile_backend,
) -> list[InequalityReport]:
    """The five-way family of transport-by-variance bounds.

    lhs is the squared distance from f*mu to mu; the five rhs routes go
    through sqrt(Var*Ent), Var, the optimized p-power of Var, the optimized
    p-power of the gradient energy, and the plain gradient energy. Report
    ids thm1.1 .. thm1.5.
    """
    mu = L.measure
    if c_p is None:
        _, c_p = spectral_gap(L)
    bundle = functionals(f, mu)
    dist = w2(f, mu)
    lhs = dist * dist

    var, ent, dirichlet = bundle.variance, bundle.entropy, bundle.dirichlet
    p3, val3 = best_p(var)
    p4, val4 = best_p(c_p * dirichlet)
    items: list[tuple[str, float, dict[str, float]]] = [
        ("thm1.1", 2.0 * c_p * math.sqrt(var * ent), {"C_P": c_p}),
        ("thm1.2", 2.0 * c_p * var, {"C_P": c_p}),
        ("thm1.3", 2.0 * c_p * val3, {"C_P": c_p, "p_star": p3}),
        ("thm1.4", 2.0 * c_p * val4, {"C_P": c_p, "p_star": p4}),
        ("thm1.5", 2.0 * c_p * c_p * dirichlet, {"C_P": c_p}),
    ]
    return [
        InequalityReport.evaluate(
            rid, lhs, rhs, transport_tolerance(mu.dx, lhs, rhs), consts, context=f.label
        )
        for rid, rhs, consts in items
    ]


def check_interpolation_bound(
    f: DensityRatio,
    L: GeneratorMatrix,
    w2: TransportBackend = quantile_backend,
    t_max: float | None = None,
    quadrature_step: float = 0.02,
    tail_tol: float = 1e-9,
) -> InequalityReport:
    """Entropy-interpolation route: squared distance against
    2*sqrt(Ent(f)) * integral of sqrt(Ent(flow)) dt.

    The integral is truncated where the decay bound
    Ent(flow at t) <= exp(-2t/C_P) * Var(f) pushes the tail below tail_tol,
    and the analytic tail bound is added to the rhs so truncation can only
    make the check stricter for us, never laxer. Report id interp.
    """
    mu = L.measure
    _, c_p = spectral_gap(L)
    bundle = functionals(f, mu)
    dist = w2(f, mu)
    lhs = dist * dist

    ent0 = bundle.entropy
    if ent0 <= 0.0:
        rhs = 0.0
        return InequalityReport.evaluate(
            "interp", lhs, rhs, transport_tolerance(mu.dx, lhs, rhs),
            {"C_P": c_p, "T_max": 0.0, "tail_bound": 0.0}, context=f.label,
        )

    var0 = max(bundle.variance, 1e-300)
    if t_max is None:
        t_max = c_p * max(1.0, math.log(c_p * math.sqrt(var0) / tail_tol))
    n_quad = max(3, int(math.ceil(t_max / quadrature_step)) + 1)
    times = np.linspace(0.0, t_max, n_quad)

    evolved = L.propagate(f.values, times)
    evolved = np.maximum(evolved, 0.0)
    masses = evolved @ mu.weights
    evolved = evolved / masses[:, None]
    ent_rows = np.sum(mu.weights[None, :] * scipy.special.xlogy(evolved, evolved), axis=1)
    sqrt_ent = np.sqrt(np.maximum(ent_rows, 0.0))

    integral = float(np.trapezoid(sqrt_ent, times))
    tail = c_p * math.sqrt(var0) * math.exp(-t_max / c_p)
    rhs = 2.0 * math.sqrt(ent0) * (integral + tail)
    return InequalityReport.evaluate(
        "interp", lhs, rhs, transport_tolerance(mu.dx, lhs, rhs),
        {"C_P": c_p, "T_max": float(t_max), "tail_bound": tail, "n_quadrature": float(n_quad)},
        context=f.label,
    )


def check_derivative_bound(
    f: DensityRatio,
    L: GeneratorMatrix,
    times: Sequence[float],
    w2: TransportBackend = quantile_backend,
    dt: float | None = None,
    floor: float = DENSITY_FLOOR,
) -> list[InequalityReport]:
    """Along-the-flow derivative bound: |d/dt squared distance| against
    2 * distance * sqrt(Fisher information), one report per time (id lemma1).

    The time derivative is a central difference refined by one Richardson
    step; the leftover step error is reported as fd_error and folded into
    the tolerance. Densities must stay above `floor` (the bound's
    hypothesis); violations are rejected, not silently checked.
    """
    mu = L.measure
    low = float(np.min(f.values))
    if low < floor:
        node = int(np.argmin(f.values))
        raise DegenerateInputError(
            f"density {f.label!r} dips to {low!r} at node {node}, below the "
            f"required floor {floor}; the derivative bound assumes a positive lower bound"
        )
    reports = []
    for t in times:
        t = float(t)
        step = min(0.05, t / 2.0) if dt is None else float(dt)
        if step <= 0 or t - step <= 0:
            raise InvalidMeasureError(f"time {t} leaves no room for a central step {step}")

        def sq_dist(s: float) -> float:
            d = w2(evolve(L, f, s), mu)
            return d * d

        coarse = (sq_dist(t + step) - sq_dist(t - step)) / (2.0 * step)
        half = step / 2.0
        fine = (sq_dist(t + half) - sq_dist(t - half)) / (2.0 * half)
        extrapolated = (4.0 * fine - coarse) / 3.0
        fd_error = abs(extrapolated - fine)

        ft = evolve(L, f, t)
        bundle = functionals(ft, mu)
        dist_t = w2(ft, mu)
        lhs = abs(extrapolated)
        rhs = 2.0 * dist_t * math.sqrt(max(bundle.fisher, 0.0))
        tol = transport_tolerance(mu.dx, lhs, rhs) + fd_error
        reports.append(
            InequalityReport.evaluate(
                "lemma1", lhs, rhs, tol,
                {"t": t, "dt": step, "fd_error": fd_error, "fisher": bundle.fisher},
                context=f"{f.label}|t={t:g}",
            )
        )
    return reports


@dataclass(frozen=True)
class ContractionConstants:
    """Decay constants assembled from a curvature bound and a log-Sobolev
    constant: waiting time t0, the rate kappa = 1/c_ls, and the prefactor
    (reported as C in constants maps). beta_t0 and gamma_t0 are the
    intermediate quantities at t0."""

    rho: float
    c_ls: float
    t0: float
    beta_t0: float
    gamma_t0: float
    prefactor: float
    kappa: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.c_ls) and self.c_ls > 0):
            raise DegenerateInputError(f"c_ls must be positive, got {self.c_ls!r}")
        if not math.isfinite(self.rho):
            raise DegenerateInputError(f"rho must be finite, got {self.rho!r}")
        if self.prefactor < 1.0 - 1e-12:
            raise NumericalFailureError(f"prefactor {self.prefactor!r} < 1 is impossible")
        if abs(self.kappa * self.c_ls - 1.0) > 1e-12:
            raise NumericalFailureError("kappa must be the reciprocal of c_ls")
        for name in ("t0", "beta_t0", "gamma_t0"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise NumericalFailureError(f"{name} must be positive and finite, got {val!r}")

    def as_constants(self) -> dict[str, float]:
        return {
            "rho": self.rho,
            "C_LS": self.c_ls,
            "T0": self.t0,
            "beta_T0": self.beta_t0,
            "gamma_T0": self.gamma_t0,
            "C": self.prefactor,
            "kappa": self.kappa,
        }


def inverse_beta(rho: float, t: float) -> float:
    """1/beta(t) = rho/(1 - exp(-2 rho t)) - rho, with the rho -> 0 limit
    1/(2t). Positive for every rho and t > 0."""
    if t <= 0:
        raise DegenerateInputError(f"t must be positive, got {t!r}")
    if abs(rho) < 1e-12:
        return 1.0 / (2.0 * t)
    return rho / (-math.expm1(-2.0 * rho * t)) - rho


def contraction_constants(rho: float, c_ls: float) -> ContractionConstants:
    """Evaluate the explicit waiting-time construction.

    t0 = log(1 + c_ls|rho|)/(2|rho|) (limit c_ls/2 at rho = 0),
    gamma(t) = c_ls * exp(2t/c_ls) / beta(t), prefactor
    sqrt(max(gamma(t0), exp((2/c_ls - 2 rho) t0), 1)), kappa = 1/c_ls.
    """
    if not (math.isfinite(c_ls) and c_ls > 0):
        raise DegenerateInputError(f"c_ls must be positive, got {c_ls!r}")
    if not math.isfinite(rho):
        raise DegenerateInputError(f"rho must be finite, got {rho!r}")
    if abs(rho) < 1e-12:
        t0 = c_ls / 2.0
    else:
        t0 = math.log1p(c_ls * abs(rho)) / (2.0 * abs(rho))
    inv_beta = inverse_beta(rho, t0)
    beta_t0 = 1.0 / inv_beta
    gamma_t0 = c_ls * math.exp(2.0 * t0 / c_ls) * inv_beta
    prefactor = math.sqrt(max(gamma_t0, math.exp((2.0 / c_ls - 2.0 * rho) * t0), 1.0))
    return ContractionConstants(
        rho=float(rho),
        c_ls=float(c_ls),
        t0=t0,
        beta_t0=beta_t0,
        gamma_t0=gamma_t0,
        prefactor=prefactor,
        kappa=1.0 / c_ls,
    )


def check_contraction(
    f: DensityRatio,
    L: GeneratorMatrix,
    constants: ContractionConstants,
    times: Sequence[float],
    w2: TransportBackend = quantile_backend,
) -> list[InequalityReport]:
    """Exponential decay of the distance to equilibrium: distance at time t
    against prefactor * exp(-kappa t) * initial distance, per time (id
    prop1.contraction). Zero initial distance makes every time vacuous."""
    mu = L.measure
    d0 = w2(f, mu)
    consts = constants.as_constants()
    if d0 <= 1e-7:
        return [
            InequalityReport.vacuous_report(
                "prop1.contraction", "initial distance is zero", context=f.label,
                constants=consts,
            )
        ]
    reports = []
    for t in times:
        t = float(t)
        dist_t = w2(evolve(L, f, t), mu)
        rhs = constants.prefactor * math.exp(-constants.kappa * t) * d0
        reports.append(
            InequalityReport.evaluate(
                "prop1.contraction", dist_t, rhs,
                transport_tolerance(mu.dx, dist_t, rhs),
                {**consts, "w2_initial": d0},
                context=f"{f.label}|t={t:g}",
            )
        )
    return reports


def w2i_constant(constants: ContractionConstants) -> tuple[float, float]:
    """(K, t_half): the information-to-transport constant obtained by running
    the contraction until the prefactor decays to one half, i.e.
    t_half = log(2C)/kappa, K = 2C^2(1 - exp(-2 rho t_half))/(kappa rho)
    with the rho -> 0 limit 4C^2 t_half / kappa."""
    c = constants.prefactor
    kappa = constants.kappa
    rho = constants.rho
    t_half = math.log(2.0 * c) / kappa
    if abs(rho) < 1e-12:
        return 4.0 * c * c * t_half / kappa, t_half
    return 2.0 * c * c * (-math.expm1(-2.0 * rho * t_half)) / (kappa * rho), t_half


def check_transport_inequalities(
    f: DensityRatio,
    L: GeneratorMatrix,
    constants: Mapping[str, float],
    w2: TransportBackend = quantile_backend,
) -> list[InequalityReport]:
    """The transport-inequality family for one density.

    Emitted reports: talagrand (needs C_T), hwi (needs rho), w2i (needs C_LS
    and rho), and w2v.converse (needs C_V, the transport-by-variance constant
    measured from the forward family; the converse asserts the variance form
    Var(h) <= sqrt(2) * C_V * gradient energy of h, instantiated at h = the
    density's own values). A missing constant downgrades its report to
    vacuous with the reason recorded; it never passes silently.
    """
    mu = L.measure
    bundle = functionals(f, mu)
    dist = w2(f, mu)
    sq = dist * dist
    reports: list[InequalityReport] = []

    c_t = constants.get("C_T")
    if c_t is None:
        reports.append(
            InequalityReport.vacuous_report(
                "talagrand", "no entropy-transport constant supplied for this model",
                context=f.label,
            )
        )
    else:
        rhs = 2.0 * float(c_t) * bundle.entropy
        reports.append(
            InequalityReport.evaluate(
                "talagrand", sq, rhs, transport_tolerance(mu.dx, sq, rhs),
                {"C_T": float(c_t)}, context=f.label,
            )
        )

    rho = constants.get("rho")
    if rho is None:
        reports.append(
            InequalityReport.vacuous_report(
                "hwi", "no curvature bound supplied", context=f.label
            )
        )
    else:
        rho = float(rho)
        root_i = math.sqrt(max(bundle.fisher, 0.0)) if bundle.fisher_finite else math.inf
        rhs = dist * root_i - 0.5 * rho * sq
        reports.append(
            InequalityReport.evaluate(
                "hwi", bundle.entropy, rhs, transport_tolerance(mu.dx, bundle.entropy, rhs),
                {"rho": rho}, context=f.label,
            )
        )

    c_ls = constants.get("C_LS")
    if c_ls is None or rho is None:
        reports.append(
            InequalityReport.vacuous_report(
                "w2i", "needs both a log-Sobolev constant and a curvature bound",
                context=f.label,
            )
        )
    else:
        cc = contraction_constants(rho, float(c_ls))
        k_const, t_half = w2i_constant(cc)
        rhs = k_const * bundle.fisher if bundle.fisher_finite else math.inf
        reports.append(
            InequalityReport.evaluate(
                "w2i", sq, rhs, transport_tolerance(mu.dx, sq, rhs),
                {**cc.as_constants(), "K": k_const, "t_half": t_half},
                context=f.label,
            )
        )

    c_v = constants.get("C_V")
    if c_v is None:
        reports.append(
            InequalityReport.vacuous_report(
                "w2v.converse", "no measured transport-by-variance constant supplied",
                context=f.label,
            )
        )
    else:
        h = f.values
        mean = mu.mean(h)
        var_h = mu.mean((h - mean) ** 2)
        grad = mu.gradient(h)
        energy = mu.mean(grad * grad)
        rhs = math.sqrt(2.0) * float(c_v) * energy
        tol = ALGEBRAIC_SLACK * (1.0 + max(var_h, rhs))
        reports.append(
            InequalityReport.evaluate(
                "w2v.converse", var_h, rhs, tol, {"C_V": float(c_v)}, context=f.label,
            )
        )
    return reports


def check_centralization(
    f: DensityRatio,
    mu: GridMeasure,
    c_p: float,
    w2: TransportBackend = quantile_backend,
    bounded: bool = False,
) -> list[InequalityReport]:
    """Split a density into its centered square-root part and check the
    squared distance against 2*sigma^2 times the centered distance plus
    96*C_P*sigma^2 (id thm2). With `bounded`, additionally check the
    coarser diameter form sigma^2*(2*diam^2 + 96*C_P) (id thm2.bounded).

    Degenerate sigma^2 (density indistinguishable from flat) is vacuous:
    both sides vanish at rate sigma^2 and the quotient is uninformative.
    """
    cen = sqrt_centering(f, mu)
    consts = {"C_1": 2.0, "C_2": 96.0 * c_p, "C_P": c_p, "sigma2": cen.sigma2}
    if cen.is_degenerate:
        out = [
            InequalityReport.vacuous_report(
                "thm2", "centered square-root mass below floor", context=f.label,
                constants=consts,
            )
        ]
        if bounded:
            out.append(
                InequalityReport.vacuous_report(
                    "thm2.bounded", "centered square-root mass below floor",
                    context=f.label, constants=consts,
                )
            )
        return out

    dist = w2(f, mu)
    lhs = dist * dist
    centered_dist = w2(cen.centered, mu)
    sigma2 = cen.sigma2
    rhs = 2.0 * sigma2 * centered_dist * centered_dist + 96.0 * c_p * sigma2
    out = [
        InequalityReport.evaluate(
            "thm2", lhs, rhs, transport_tolerance(mu.dx, lhs, rhs),
            {**consts, "w2_centered": centered_dist}, context=f.label,
        )
    ]
    if bounded:
        diam = mu.diameter()
        rhs_b = sigma2 * (2.0 * diam * diam + 96.0 * c_p)
        out.append(
            InequalityReport.evaluate(
                "thm2.bounded", lhs, rhs_b, transport_tolerance(mu.dx, lhs, rhs_b),
                {**consts, "diameter": diam}, context=f.label,
            )
        )
    return out


def check_decay(
    f: DensityRatio,
    L: GeneratorMatrix,
    times: Sequence[float],
    c_p: float | None = None,
) -> list[InequalityReport]:
    """Spectral decay along the flow: variance against exp(-2t/C_P) times its
    initial value (id decay.var) and the fourth-moment functional against
    exp(-3t/C_P) times its initial value (id decay.fourth).

    With C_P taken from the same generator's gap both bounds are exact
    discrete statements, so the tolerance is roundoff-level.
    """
    if c_p is None:
        _, c_p = spectral_gap(L)
    ts = sorted(set(float(t) for t in times) | {0.0})
    trace = flow_trace(L, f, ts)
    var0 = trace.variance[0]
    fourth = trace.fourth_functional
    fourth0 = fourth[0]
    reports = []
    for k, t in enumerate(trace.times):
        if t == 0.0:
            continue
        rhs_v = math.exp(-2.0 * t / c_p) * var0
        tol_v = ALGEBRAIC_SLACK * (1.0 + max(abs(rhs_v), trace.variance[k]))
        reports.append(
            InequalityReport.evaluate(
                "decay.var", trace.variance[k], rhs_v, tol_v,
                {"C_P": c_p, "t": float(t), "initial": var0},
                context=f"{f.label}|t={t:g}",
            )
        )
        rhs_l = math.exp(-3.0 * t / c_p) * fourth0
        tol_l = ALGEBRAIC_SLACK * (1.0 + max(abs(rhs_l), fourth[k]))
        reports.append(
            InequalityReport.evaluate(
                "decay.fourth", fourth[k], rhs_l, tol_l,
                {"C_P": c_p, "t": float(t), "initial": fourth0},
                context=f"{f.label}|t={t:g}",
            )
        )
    return reports


@dataclass(frozen=True)
class LyapunovWitness:
    """Candidate drift witness: positive W with rate c > 0, offset b >= 0,
    and a base node."""

    function: GridFunction
    c: float
    b: float
    x0: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.c) and self.c > 0):
            raise DegenerateInputError(f"c must be positive, got {self.c!r}")
        if not (math.isfinite(self.b) and self.b >= 0):
            raise DegenerateInputError(f"b must be >= 0, got {self.b!r}")
        if float(np.min(self.function.values)) <= 0:
            node = int(np.argmin(self.function.values))
            raise DegenerateInputError(
                f"witness must be strictly positive; value "
                f"{float(self.function.values[node])!r} at node {node}"
            )
        if not 0 <= self.x0 < self.function.n:
            raise DegenerateInputError(f"base node {self.x0} outside grid of {self.function.n}")


@dataclass(frozen=True)
class LyapunovReport:
    """Drift-condition check: residual (LW) - (-c d^2 + b) W per node, its
    worst interior value as an InequalityReport, and the set of interior
    nodes violating the tolerance."""

    report: InequalityReport
    residual: np.ndarray
    violation_nodes: np.ndarray

    def __post_init__(self) -> None:
        for name in ("residual", "violation_nodes"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def passed(self) -> bool:
        return self.report.verdict == "pass"


def check_lyapunov(
    witness: LyapunovWitness, L: GeneratorMatrix, tol_coeff: float = 10.0
) -> LyapunovReport:
    """Verify the drift inequality LW <= (-c d^2(x, x0) + b) W node by node.

    Boundary nodes are excluded (the reflecting discretization is only
    interior-consistent) and the tolerance is tol_coeff * dx^2 scaled by the
    largest interior witness value, matching the discretization error of the
    second difference. Id lyapunov.witness.
    """
    mu = L.measure
    wf = witness.function
    if wf.x.shape != mu.x.shape or not np.allclose(wf.x, mu.x, rtol=0.0, atol=1e-12):
        raise InvalidMeasureError("witness does not live on the generator's grid")
    if mu.n < 3:
        raise InvalidMeasureError("drift check needs interior nodes")
    d2 = (mu.x - mu.x[witness.x0]) ** 2
    lw = L.apply(wf.values)
    bound = (-witness.c * d2 + witness.b) * wf.values
    residual = lw - bound

    interior = slice(1, mu.n - 1)
    scale = float(np.max(wf.values[interior]))
    tol = tol_coeff * mu.dx * mu.dx * scale
    worst = float(np.max(residual[interior]))
    report = InequalityReport.evaluate(
        "lyapunov.witness", worst, 0.0, tol,
        {"c": witness.c, "b": witness.b, "x0": float(mu.x[witness.x0]),
         "tol_coeff": tol_coeff, "scale": scale},
        context=f"drift[c={witness.c:g},b={witness.b:g}]",
    )
    inner = np.arange(mu.n)[interior]
    violations = inner[residual[interior] > tol]
    return LyapunovReport(report=report, residual=residual, violation_nodes=violations)


@dataclass(frozen=True)
class WeightedPoincareFit:
    """Smallest c3 making the distance-weighted bound
    mean(d^2 h^2) <= c3 * energy(h) + c4 * mean(h^2) hold for every grid
    function h. `witness` is the extremizing h (sup-normalized); an
    infeasible c4 (too small against mean(d^2)) yields c3 = inf with a
    diagnostic and no witness."""

    c3: float
    c4: float
    witness: np.ndarray | None
    diagnostic: str = ""

    def __post_init__(self) -> None:
        if self.witness is not None:
            arr = np.asarray(self.witness, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, "witness", arr)

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.c3)


def fit_weighted_poincare(L: GeneratorMatrix, x0: int, c4: float) -> WeightedPoincareFit:
    """Fit the minimal c3 by generalized eigencomputation.

    The constraint quadratic form (weighted d^2 minus c4) is diagonal; the
    energy form is the generator's Dirichlet matrix, whose kernel is the
    constants. Feasibility requires strictly negative action on that kernel
    (mean(d^2) < c4); the kernel direction is then eliminated by a rank-one
    Schur complement and the ratio is maximized over the energy's positive
    eigenspace.
    """
    mu = L.measure
    if not 0 <= x0 < mu.n:
        raise InvalidMeasureError(f"base node {x0} outside grid of {mu.n}")
    if not (math.isfinite(c4) and c4 >= 0):
        raise DegenerateInputError(f"c4 must be finite and >= 0, got {c4!r}")
    w = mu.weights
    d2 = (mu.x - mu.x[x0]) ** 2
    a_vec = w * (d2 - c4)  # diagonal of the constraint form
    head = float(np.sum(a_vec))  # action on the constants direction
    if head >= -1e-14 * (1.0 + c4):
        return WeightedPoincareFit(
            c3=math.inf, c4=c4, witness=None,
            diagnostic=f"constraint form is nonnegative on constants "
                       f"(mean d^2 = {float(np.dot(w, d2))!r} vs c4 = {c4!r}); increase C4",
        )

    g_mat = -(w[:, None] * L.as_dense())
    g_mat = 0.5 * (g_mat + g_mat.T)  # reversibility makes it symmetric; kill roundoff
    g_vals, g_vecs = scipy.linalg.eigh(g_mat)
    if g_vals[1] < -1e-10 * max(1.0, g_vals[-1]):
        raise NumericalFailureError(
            "energy form has a negative eigenvalue beyond the constants"
        )
    # Tail conductances are exponentially small, so the energy spectrum
    # reaches toward zero without the chain being disconnected. Flooring the
    # eigenvalues before whitening caps the roundoff amplification in those
    # directions; their constraint action is equally tiny, so the maximizer
    # is unaffected.
    floor = 1e-13 * max(g_vals[-1], 1e-300)
    whitened = np.sqrt(np.maximum(g_vals[1:], floor))
    # Rank-one Schur complement removes the constants direction from the
    # constraint form: schur(h) = a.h^2 - (a.h)^2/head for h in the
    # complement, maximized over alpha*1 + h already.
    basis = g_vecs[:, 1:] / whitened[None, :]
    schur_dense = basis.T @ (a_vec[:, None] * basis) - np.outer(
        basis.T @ a_vec, basis.T @ a_vec
    ) / head
    m = schur_dense.shape[0]
    top_val, top_vec = scipy.linalg.eigh(schur_dense, subset_by_index=[m - 1, m - 1])
    c3 = max(0.0, float(top_val[0]))

    h_perp = basis @ top_vec[:, 0]
    alpha = -float(np.dot(a_vec, h_perp)) / head
    h_star = alpha + h_perp
    h_star = h_star / float(np.max(np.abs(h_star)))
    return WeightedPoincareFit(c3=c3, c4=c4, witness=h_star)


def weighted_poincare_violation(
    L: GeneratorMatrix, x0: int, c3: float, c4: float, h: np.ndarray
) -> float:
    """Signed violation of the fitted bound at one test function
    (positive means the bound failed there)."""
    mu = L.measure
    d2 = (mu.x - mu.x[x0]) ** 2
    h = np.asarray(h, dtype=float)
    lhs = float(np.dot(mu.weights, d2 * h * h))
    rhs = c3 * L.dirichlet_form(h) + c4 * float(np.dot(mu.weights, h * h))
    return lhs - rhs


def check_w2i_from_lyapunov(
    f: DensityRatio,
    L: GeneratorMatrix,
    witness: LyapunovWitness,
    c4: float | None = None,
    w2: TransportBackend = quantile_backend,
    tol_coeff: float = 10.0,
) -> tuple[list[InequalityReport], WeightedPoincareFit | None]:
    """Chain a drift witness into an information-to-transport bound.

    Three reports: (w2i.chain.bound) squared distance against
    C*(sigma^2 + mean(d^2 (sqrt f - c)^2)) with C = 4 + 4*mean(d^2) + 96*C_P;
    (w2i.chain.poincare) that weighted second moment against the fitted
    c3 * energy(sqrt f) + c4 * sigma^2; (w2i.chain.final) squared distance
    against C_7 * Fisher, C_7 = C*((1 + c4)*C_P + c3)/4. The witness must
    first pass its own drift check; refusing to chain from a failed witness
    is the point of the pipeline.
    """
    lyap = check_lyapunov(witness, L, tol_coeff=tol_coeff)
    if not lyap.passed:
        raise DegenerateInputError(
            f"drift witness fails its own check (worst residual {lyap.report.lhs!r}); "
            "cannot chain a transport bound from it"
        )
    mu = L.measure
    _, c_p = spectral_gap(L)
    x0 = witness.x0
    d2 = (mu.x - mu.x[x0]) ** 2
    mu_d2 = float(np.dot(mu.weights, d2))
    c4_eff = float(c4) if c4 is not None else 1.0 + 2.0 * mu_d2

    cen = sqrt_centering(f, mu)
    base_consts = {"C_P": c_p, "mean_d2": mu_d2, "C_4": c4_eff}
    if cen.is_degenerate:
        reason = "centered square-root mass below floor"
        return (
            [
                InequalityReport.vacuous_report(rid, reason, context=f.label,
                                                constants=base_consts)
                for rid in ("w2i.chain.bound", "w2i.chain.poincare", "w2i.chain.final")
            ],
            None,
        )

    sigma2 = cen.sigma2
    root = np.sqrt(f.values)
    centered_root = root - mu.mean(root)
    weighted_moment = float(np.dot(mu.weights, d2 * centered_root**2))
    dist = w2(f, mu)
    lhs = dist * dist
    c_big = 4.0 + 4.0 * mu_d2 + 96.0 * c_p

    rhs1 = c_big * (sigma2 + weighted_moment)
    reports = [
        InequalityReport.evaluate(
            "w2i.chain.bound", lhs, rhs1, transport_tolerance(mu.dx, lhs, rhs1),
            {**base_consts, "C": c_big, "sigma2": sigma2}, context=f.label,
        )
    ]

    fit = fit_weighted_poincare(L, x0, c4_eff)
    if not fit.feasible:
        reports.append(
            InequalityReport.vacuous_report(
                "w2i.chain.poincare", fit.diagnostic, context=f.label,
                constants=base_consts,
            )
        )
        reports.append(
            InequalityReport.vacuous_report(
                "w2i.chain.final", "no finite weighted-bound constant", context=f.label,
                constants=base_consts,
            )
        )
        return reports, fit

    energy_root = L.dirichlet_form(root)
    rhs2 = fit.c3 * energy_root + c4_eff * sigma2
    tol2 = ALGEBRAIC_SLACK * (1.0 + max(abs(weighted_moment), abs(rhs2)))
    reports.append(
        InequalityReport.evaluate(
            "w2i.chain.poincare", weighted_moment, rhs2, tol2,
            {**base_consts, "C_3": fit.c3, "energy_root": energy_root},
            context=f.label,
        )
    )

    c7 = c_big * ((1.0 + c4_eff) * c_p + fit.c3) / 4.0
    fisher = functionals(f, mu).fisher
    rhs3 = c7 * fisher if math.isfinite(fisher) else math.inf
    reports.append(
        InequalityReport.evaluate(
            "w2i.chain.final", lhs, rhs3, transport_tolerance(mu.dx, lhs, rhs3),
            {**base_consts, "C": c_big, "C_3": fit.c3, "C_7": c7},
            context=f.label,
        )
    )
    return reports, fit
