"""Batch suites: named models, deterministic density families, and the
runners that turn battery checks into report records.

A run is fully determined by its config (model, family parameters, seed,
suite selection, time grids): rerunning the same config yields byte-identical
report files. Suites decompose into independent tasks at (density, check)
granularity, so a thread pool may execute them in any order; records are
sorted before emission, which makes aggregation order-irrelevant.

Constants policy: the spectral-gap constant and the curvature bound are
computed per model and always trusted (they are exact discrete quantities).
The log-Sobolev constant is only ever a certified input: on the quadratic
model the computed value is certified by the saturating tilt family, on
anything else it must be supplied in the config or the checks that need it
report vacuous instead of guessing.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import battery, figures, reporting
from .battery import InequalityReport, quantile_backend, transport_tolerance
from .errors import ConfigError
from .generator import (
    GeneratorMatrix,
    build_generator,
    curvature_lower_bound,
    flow_trace,
    gap_mode,
    lsi_constant,
    spectral_gap,
)
from .hopflax import GridFunction, dual_lower_bound
from .measures import (
    DensityRatio,
    GridMeasure,
    build_grid_measure,
    density_from_positive,
    gaussian_tilt,
    functionals,
)
from .transport import FiniteMetricMeasure, sinkhorn_bracket, w2_lp, w2_quantile

SUITE_IDS = (
    "thm1",
    "interp",
    "lemma1",
    "decay",
    "contraction",
    "transport",
    "thm2",
    "lyapunov",
)

DEFAULT_TIMES: dict[str, tuple[float, ...]] = {
    "decay": (0.25, 0.5, 1.0, 2.0, 4.0),
    "lemma1": (0.25, 0.5, 1.0),
    "contraction": (0.25, 0.5, 1.0, 2.0),
}

# Two-bump mixture parameter table: bump centers as domain fractions, shared
# width fraction, flat floor, second amplitude. Deterministic by design.
MIXTURE_PARAMS: tuple[tuple[float, float, float, float, float], ...] = (
    (0.30, 0.70, 0.060, 0.20, 0.80),
    (0.25, 0.75, 0.100, 0.30, 1.00),
    (0.35, 0.60, 0.080, 0.15, 0.60),
    (0.20, 0.55, 0.050, 0.25, 0.90),
    (0.40, 0.80, 0.070, 0.20, 0.70),
    (0.30, 0.65, 0.120, 0.35, 1.00),
)


@dataclass(frozen=True)
class ModelSpec:
    """A named potential with its default discretization."""

    name: str
    potential: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float]
    n: int
    bounded: bool = False
    lsi_certified: bool = False


def _expr_potential(expression: str) -> Callable[[np.ndarray], np.ndarray]:
    try:
        code = compile(expression, "<model-expression>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"model.name: expression does not parse ({exc.msg})") from exc
    safe = {"np": np, "pi": math.pi, "e": math.e, "__builtins__": {}}

    def potential(x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(eval(code, safe, {"x": x}), dtype=float), x.shape).copy()

    return potential


def resolve_model(name: str, domain: tuple[float, float] | None, n: int | None) -> ModelSpec:
    """Look up a named model, or build one from an `expr:` potential in x."""
    # Odd node counts put a grid node exactly at the potential minimum, which
    # keeps distance-to-base quantities second-order accurate.
    registry: dict[str, ModelSpec] = {
        "ou": ModelSpec("ou", lambda x: 0.5 * x * x, (-8.0, 8.0), 1025, lsi_certified=True),
        "doublewell": ModelSpec("doublewell", lambda x: x**4 - 2.0 * x * x, (-3.0, 3.0), 1025),
        "uniform": ModelSpec("uniform", lambda x: np.zeros_like(x), (0.0, 1.0), 257, bounded=True),
        "quartic": ModelSpec("quartic", lambda x: 0.25 * x**4, (-4.0, 4.0), 1025),
    }
    if name in registry:
        spec = registry[name]
    elif name.startswith("expr:"):
        expression = name[len("expr:"):]
        if not expression.strip():
            raise ConfigError("model.name: empty expression after 'expr:'")
        if domain is None:
            raise ConfigError("model.domain: required for expression models")
        spec = ModelSpec(name, _expr_potential(expression), tuple(domain), n or 1024)
    else:
        known = ", ".join(sorted(registry))
        raise ConfigError(f"model.name: unknown model {name!r} (known: {known}, or expr:<formula>)")
    if domain is not None:
        spec = ModelSpec(spec.name, spec.potential, (float(domain[0]), float(domain[1])),
                         spec.n, spec.bounded, spec.lsi_certified)
    if n is not None:
        spec = ModelSpec(spec.name, spec.potential, spec.domain, int(n),
                         spec.bounded, spec.lsi_certified)
    return spec


@dataclass(frozen=True)
class SuiteConfig:
    """Everything a run depends on. Immutable; `echo()` reproduces the exact
    dictionary that will be embedded in the JSON report."""

    model_name: str = "ou"
    domain: tuple[float, float] | None = None
    n: int | None = None
    tilts: tuple[float, ...] = (-1.0, -0.5, -0.25, 0.25, 0.5, 1.0)
    mixtures: int = 6
    perturbations: int = 8
    seed: int = 1729
    suites: tuple[str, ...] = SUITE_IDS
    times: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    constants: Mapping[str, float] = field(default_factory=dict)
    lyapunov_c: float = 0.25
    lyapunov_b: float = 0.5
    lyapunov_c4: float | None = 2.0
    figures: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", dict(self.times))
        object.__setattr__(self, "constants", dict(self.constants))
        for sid in self.suites:
            if sid not in SUITE_IDS:
                raise ConfigError(
                    f"suites: unknown suite id {sid!r} (known: {', '.join(SUITE_IDS)})"
                )
        if self.mixtures < 0 or self.mixtures > len(MIXTURE_PARAMS):
            raise ConfigError(
                f"densities.mixtures: must be between 0 and {len(MIXTURE_PARAMS)}"
            )
        if self.perturbations < 0:
            raise ConfigError("densities.perturbations: must be >= 0")
        for key, ts in self.times.items():
            if key not in DEFAULT_TIMES:
                raise ConfigError(f"times.{key}: no such time grid (known: {', '.join(DEFAULT_TIMES)})")
            if any(not math.isfinite(t) or t <= 0 for t in ts) or list(ts) != sorted(ts):
                raise ConfigError(f"times.{key}: must be positive, finite, ascending")
        for key in self.constants:
            if key not in ("C_P", "C_LS", "C_T", "rho"):
                raise ConfigError(f"constants.{key}: unknown constant name")

    def time_grid(self, suite: str) -> tuple[float, ...]:
        return tuple(self.times.get(suite, DEFAULT_TIMES[suite]))

    def echo(self) -> dict[str, Any]:
        return {
            "model": {
                "name": self.model_name,
                "domain": list(self.domain) if self.domain is not None else None,
                "n": self.n,
            },
            "densities": {
                "tilts": list(self.tilts),
                "mixtures": self.mixtures,
                "perturbations": self.perturbations,
                "seed": self.seed,
            },
            "suites": list(self.suites),
            "times": {k: list(v) for k, v in sorted(self.times.items())},
            "constants": dict(self.constants),
            "lyapunov": {"c": self.lyapunov_c, "b": self.lyapunov_b, "c4": self.lyapunov_c4},
            "figures": self.figures,
        }


def _expect(mapping: Mapping[str, Any], where: str, allowed: Sequence[str]) -> None:
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")


def config_from_dict(raw: Mapping[str, Any]) -> SuiteConfig:
    """Validate a parsed config file into a SuiteConfig, naming the offending
    field on every failure."""
    if not isinstance(raw, Mapping):
        raise ConfigError("config root must be an object")
    _expect(raw, "config", ["model", "densities", "suites", "times", "constants",
                            "lyapunov", "figures"])
    kwargs: dict[str, Any] = {}

    model = raw.get("model", {})
    if not isinstance(model, Mapping):
        raise ConfigError("model: must be an object")
    _expect(model, "model", ["name", "domain", "n"])
    if "name" in model:
        if not isinstance(model["name"], str):
            raise ConfigError("model.name: must be a string")
        kwargs["model_name"] = model["name"]
    if model.get("domain") is not None:
        dom = model["domain"]
        if (not isinstance(dom, Sequence)) or len(dom) != 2:
            raise ConfigError("model.domain: must be [lo, hi]")
        lo, hi = float(dom[0]), float(dom[1])
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ConfigError("model.domain: needs finite lo < hi")
        kwargs["domain"] = (lo, hi)
    if model.get("n") is not None:
        n = model["n"]
        if not isinstance(n, int) or n < 8:
            raise ConfigError("model.n: must be an integer >= 8")
        kwargs["n"] = n

    dens = raw.get("densities", {})
    if not isinstance(dens, Mapping):
        raise ConfigError("densities: must be an object")
    _expect(dens, "densities", ["tilts", "mixtures", "perturbations", "seed"])
    if "tilts" in dens:
        try:
            kwargs["tilts"] = tuple(float(t) for t in dens["tilts"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"densities.tilts: must be a list of numbers ({exc})") from exc
    for key in ("mixtures", "perturbations", "seed"):
        if key in dens:
            if not isinstance(dens[key], int):
                raise ConfigError(f"densities.{key}: must be an integer")
            kwargs[key] = dens[key]

    if "suites" in raw:
        suites = raw["suites"]
        if not isinstance(suites, Sequence) or isinstance(suites, str):
            raise ConfigError("suites: must be a list of suite ids")
        kwargs["suites"] = tuple(str(s) for s in suites)

    if "times" in raw:
        times = raw["times"]
        if not isinstance(times, Mapping):
            raise ConfigError("times: must be an object")
        parsed = {}
        for key, ts in times.items():
            try:
                parsed[str(key)] = tuple(float(t) for t in ts)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"times.{key}: must be a list of numbers ({exc})") from exc
        kwargs["times"] = parsed

    if "constants" in raw:
        consts = raw["constants"]
        if not isinstance(consts, Mapping):
            raise ConfigError("constants: must be an object")
        parsed_c = {}
        for key, val in consts.items():
            try:
                parsed_c[str(key)] = float(val)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"constants.{key}: must be a number ({exc})") from exc
        kwargs["constants"] = parsed_c

    lya = raw.get("lyapunov", {})
    if not isinstance(lya, Mapping):
        raise ConfigError("lyapunov: must be an object")
    _expect(lya, "lyapunov", ["c", "b", "c4"])
    if "c" in lya:
        kwargs["lyapunov_c"] = float(lya["c"])
    if "b" in lya:
        kwargs["lyapunov_b"] = float(lya["b"])
    if "c4" in lya:
        kwargs["lyapunov_c4"] = None if lya["c4"] is None else float(lya["c4"])

    if "figures" in raw:
        if not isinstance(raw["figures"], bool):
            raise ConfigError("figures: must be true or false")
        kwargs["figures"] = raw["figures"]

    return SuiteConfig(**kwargs)


def bump_mixture(mu: GridMeasure, params: tuple[float, float, float, float, float],
                 label: str) -> DensityRatio:
    """Two Gaussian bumps on a flat floor; bounded above and below by
    construction, so every hypothesis needing a positive floor holds."""
    lo, hi = float(mu.x[0]), float(mu.x[-1])
    span = hi - lo
    f1, f2, sfrac, eps, a2 = params
    s = sfrac * span
    c1, c2 = lo + f1 * span, lo + f2 * span
    values = (
        eps
        + np.exp(-((mu.x - c1) ** 2) / (2.0 * s * s))
        + a2 * np.exp(-((mu.x - c2) ** 2) / (2.0 * s * s))
    )
    return density_from_positive(values, mu, label=label)


def density_family(mu: GridMeasure, config: SuiteConfig) -> list[DensityRatio]:
    """The deterministic test family: exponential tilts, two-bump mixtures,
    seeded rough positive perturbations."""
    family = [gaussian_tilt(m, mu) for m in config.tilts]
    for k in range(config.mixtures):
        family.append(bump_mixture(mu, MIXTURE_PARAMS[k], label=f"mix:{k + 1}"))
    rng = np.random.default_rng(config.seed)
    for k in range(config.perturbations):
        values = 1.0 + 0.5 * rng.random(mu.n)
        family.append(density_from_positive(values, mu, label=f"perturb:{k + 1}"))
    return family


@dataclass(frozen=True)
class RunContext:
    """Shared per-run state every suite task reads from."""

    config: SuiteConfig
    model: ModelSpec
    mu: GridMeasure
    L: GeneratorMatrix
    c_p: float
    rho: float
    c_ls: float
    c_ls_certified: bool
    c_t: float | None
    family: tuple[DensityRatio, ...]
    sources: Mapping[str, str]


def build_context(config: SuiteConfig) -> RunContext:
    model = resolve_model(config.model_name, config.domain, config.n)
    mu = build_grid_measure(
        model.potential, model.domain, model.n,
        tail_mass=0.0 if model.bounded else None,
    )
    L = build_generator(mu)
    sources: dict[str, str] = {}

    supplied = config.constants
    if "C_P" in supplied:
        c_p = float(supplied["C_P"])
        sources["C_P"] = "supplied"
    else:
        _, c_p = spectral_gap(L)
        sources["C_P"] = "computed"
    if "rho" in supplied:
        rho = float(supplied["rho"])
        sources["rho"] = "supplied"
    else:
        rho = curvature_lower_bound(mu)
        sources["rho"] = "computed"
    if "C_LS" in supplied:
        c_ls = float(supplied["C_LS"])
        certified = True
        sources["C_LS"] = "supplied"
    else:
        lower, _ = lsi_constant(L)
        c_ls = max(lower, c_p)
        certified = model.lsi_certified
        sources["C_LS"] = "computed" if certified else "computed-lower-bound-only"
    if "C_T" in supplied:
        c_t: float | None = float(supplied["C_T"])
        sources["C_T"] = "supplied"
    elif certified:
        c_t = c_ls
        sources["C_T"] = "computed"
    else:
        c_t = None
        sources["C_T"] = "absent"

    family = tuple(density_family(mu, config))
    return RunContext(
        config=config, model=model, mu=mu, L=L, c_p=c_p, rho=rho,
        c_ls=c_ls, c_ls_certified=certified, c_t=c_t, family=family,
        sources=dict(sources),
    )


Task = Callable[[], list[dict]]


def _records(suite: str, reports: Sequence[InequalityReport]) -> list[dict]:
    return [reporting.report_record(suite, r) for r in reports]


def _tasks_thm1(ctx: RunContext) -> list[Task]:
    return [
        (lambda f=f: _records("thm1", battery.check_variance_bounds(f, ctx.L, ctx.c_p)))
        for f in ctx.family
    ]


def _tasks_interp(ctx: RunContext) -> list[Task]:
    return [
        (lambda f=f: _records("interp", [battery.check_interpolation_bound(f, ctx.L)]))
        for f in ctx.family
    ]


def _tasks_lemma1(ctx: RunContext) -> list[Task]:
    times = ctx.config.time_grid("lemma1")
    return [
        (lambda f=f: _records("lemma1", battery.check_derivative_bound(f, ctx.L, times)))
        for f in ctx.family
    ]


def _tasks_decay(ctx: RunContext) -> list[Task]:
    times = ctx.config.time_grid("decay")
    return [
        (lambda f=f: _records("decay", battery.check_decay(f, ctx.L, times, ctx.c_p)))
        for f in ctx.family
    ]


def _tasks_contraction(ctx: RunContext) -> list[Task]:
    times = ctx.config.time_grid("contraction")
    if not ctx.c_ls_certified:
        def vacuous() -> list[dict]:
            reports = [
                InequalityReport.vacuous_report(
                    "prop1.contraction",
                    "no certified log-Sobolev constant for this model; supply C_LS",
                    context=f.label,
                )
                for f in ctx.family
            ]
            return _records("contraction", reports)

        return [vacuous]
    constants = battery.contraction_constants(ctx.rho, ctx.c_ls)
    return [
        (lambda f=f: _records(
            "contraction", battery.check_contraction(f, ctx.L, constants, times)))
        for f in ctx.family
    ]


def _gap_mode_density(ctx: RunContext) -> DensityRatio:
    _, phi = gap_mode(ctx.L)
    eps = 0.45 / float(np.max(np.abs(phi)))
    return density_from_positive(1.0 + eps * phi, ctx.mu, label="gapmode")


def _measure_c_v(ctx: RunContext, members: Sequence[DensityRatio]) -> float:
    """Largest observed squared-distance-to-variance ratio: the empirical
    transport-by-variance constant the converse check runs against."""
    best = 0.0
    for f in members:
        var = functionals(f, ctx.mu).variance
        if var < 1e-10:
            continue
        dist = quantile_backend(f, ctx.mu)
        best = max(best, dist * dist / var)
    return best


def _transport_crosschecks(ctx: RunContext, f: DensityRatio) -> list[dict]:
    """Quantile vs LP vs entropic bracket on a coarsened copy of the model,
    plus the infimal-convolution duality route on the full grid."""
    mu = ctx.mu
    stride = max(1, -(-mu.n // 199))
    idx = np.arange(0, mu.n, stride)
    xs = mu.x[idx]
    ws = mu.weights[idx]
    wt = f.weights[idx]
    # Far-tail atoms below machine-noise mass destabilize the LP presolve;
    # dropping them moves either measure by < 1e-10 in squared cost.
    keep = np.maximum(ws, wt) >= 1e-12
    xs, ws, wt = xs[keep], ws[keep], wt[keep]
    ws = ws / np.sum(ws)
    wt = wt / np.sum(wt)
    dx_coarse = float(np.min(np.diff(xs)))

    space = FiniteMetricMeasure.from_points_1d(xs, ws)
    target = space.with_weights(wt)
    lp = w2_lp(space, target, p=2)
    quant = w2_quantile((xs, ws), (xs, wt))

    reports = [
        InequalityReport.evaluate(
            "transport.xcheck",
            abs(quant.distance - lp.distance),
            2.0 * dx_coarse,
            1e-9,
            {"lp": lp.distance, "quantile": quant.distance, "duality_gap": lp.duality_gap,
             "n_atoms": float(xs.size)},
            context=f.label,
        )
    ]

    # Reference-side LP potential, interpolated back to the full grid, feeds
    # the infimal-convolution lower bound; any h gives a valid bound, the
    # near-optimal one should come close to the measured distance.
    h_vals = np.interp(mu.x, xs, -0.5 * lp.source_potential)
    dual_val = dual_lower_bound(f, GridFunction(x=mu.x, values=h_vals))
    full_dist = quantile_backend(f, mu)
    sq = full_dist * full_dist
    reports.append(
        InequalityReport.evaluate(
            "transport.dual", dual_val, sq,
            transport_tolerance(mu.dx, dual_val, sq) + 2.0 * dx_coarse * max(sq, 1.0),
            {"w2_squared": sq}, context=f.label,
        )
    )

    sk = sinkhorn_bracket(space, target, p=2)
    bracket_miss = max(sk.lower - lp.cost, lp.cost - sk.upper)
    reports.append(
        InequalityReport.evaluate(
            "transport.sinkhorn", bracket_miss, 0.0, 1e-9 * (1.0 + lp.cost),
            {"lower": sk.lower, "upper": sk.upper, "lp_cost": lp.cost,
             "epsilon": sk.epsilon, "iterations": float(sk.iterations)},
            context=f.label,
        )
    )
    return _records("transport", reports)


def _tasks_transport(ctx: RunContext) -> list[Task]:
    probe = _gap_mode_density(ctx)
    members = list(ctx.family) + [probe]
    c_v = _measure_c_v(ctx, members)
    constants: dict[str, float] = {"rho": ctx.rho, "C_V": c_v}
    if ctx.c_t is not None:
        constants["C_T"] = ctx.c_t
    if ctx.c_ls_certified:
        constants["C_LS"] = ctx.c_ls

    tasks: list[Task] = [
        (lambda f=f: _records(
            "transport", battery.check_transport_inequalities(f, ctx.L, constants)))
        for f in members
    ]
    crosscheck_targets = [ctx.family[0]]
    if len(ctx.family) > len(ctx.config.tilts):
        crosscheck_targets.append(ctx.family[len(ctx.config.tilts)])
    tasks.extend(
        (lambda f=f: _transport_crosschecks(ctx, f)) for f in crosscheck_targets
    )
    return tasks


def _tasks_thm2(ctx: RunContext) -> list[Task]:
    flat = density_from_positive(np.ones(ctx.mu.n), ctx.mu, label="flat")
    members = list(ctx.family) + [flat]
    return [
        (lambda f=f: _records(
            "thm2",
            battery.check_centralization(f, ctx.mu, ctx.c_p, bounded=ctx.model.bounded)))
        for f in members
    ]


def _tasks_lyapunov(ctx: RunContext) -> list[Task]:
    def run() -> list[dict]:
        cfg = ctx.config
        wf = GridFunction.on_measure(ctx.mu, np.exp(0.25 * ctx.mu.x**2))
        witness = battery.LyapunovWitness(
            function=wf, c=cfg.lyapunov_c, b=cfg.lyapunov_b, x0=ctx.mu.base_index
        )
        lyap = battery.check_lyapunov(witness, ctx.L)
        out = _records("lyapunov", [lyap.report])
        if not lyap.passed:
            return out
        for f in ctx.family[:3]:
            chain, _ = battery.check_w2i_from_lyapunov(
                f, ctx.L, witness, c4=cfg.lyapunov_c4
            )
            out.extend(_records("lyapunov", chain))
        return out

    return [run]


SUITE_BUILDERS: dict[str, Callable[[RunContext], list[Task]]] = {
    "thm1": _tasks_thm1,
    "interp": _tasks_interp,
    "lemma1": _tasks_lemma1,
    "decay": _tasks_decay,
    "contraction": _tasks_contraction,
    "transport": _tasks_transport,
    "thm2": _tasks_thm2,
    "lyapunov": _tasks_lyapunov,
}


def figure_extras(ctx: RunContext) -> dict[str, dict[str, Any]]:
    """Data for suite-specific figures, computed deterministically from the
    first family member."""
    extras: dict[str, dict[str, Any]] = {}
    f = ctx.family[0]
    if "decay" in ctx.config.suites:
        times = np.linspace(0.0, max(ctx.config.time_grid("decay")), 33)
        trace = flow_trace(ctx.L, f, times)
        var0 = trace.variance[0]
        fourth = trace.fourth_functional
        extras["decay"] = {
            "times": trace.times,
            "observed": {"variance": trace.variance, "fourth-moment functional": fourth},
            "bounds": {
                "variance bound": var0 * np.exp(-2.0 * trace.times / ctx.c_p),
                "fourth-moment bound": fourth[0] * np.exp(-3.0 * trace.times / ctx.c_p),
            },
            "title": f"{ctx.model.name}: decay along the flow ({f.label})",
        }
    if "transport" in ctx.config.suites:
        result = w2_quantile(f, ctx.mu)
        extras["transport"] = {
            "map_source": result.map_source,
            "map_target": result.map_target,
            "title": f"{ctx.model.name}: quantile coupling ({f.label}, W2={result.distance:.4g})",
        }
    return extras


@dataclass(frozen=True)
class RunResult:
    records: tuple[dict, ...]
    exit_code: int
    json_path: Path | None
    csv_path: Path | None
    figure_paths: tuple[Path, ...]


def execute(config: SuiteConfig, jobs: int = 1) -> tuple[list[dict], RunContext]:
    """Compute every selected suite's records (unsorted; emission sorts)."""
    ctx = build_context(config)
    tasks: list[Task] = []
    for suite in config.suites:
        tasks.extend(SUITE_BUILDERS[suite](ctx))
    records: list[dict] = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for chunk in pool.map(lambda t: t(), tasks):
                records.extend(chunk)
    else:
        for task in tasks:
            records.extend(task())
    return records, ctx


def run_suite(
    config: SuiteConfig,
    out_dir: str | Path,
    jobs: int = 1,
    render_figures: bool | None = None,
) -> RunResult:
    """Execute, serialize, and (optionally) render figures; returns paths and
    the exit code contract (0 iff no non-vacuous failure)."""
    records, ctx = execute(config, jobs=jobs)
    echo = config.echo()
    echo["resolved_constants"] = {
        "C_P": ctx.c_p, "C_LS": ctx.c_ls, "rho": ctx.rho,
        "C_T": ctx.c_t if ctx.c_t is not None else float("nan"),
    }
    echo["constant_sources"] = dict(ctx.sources)
    json_path, csv_path = reporting.write_outputs(records, out_dir, echo)
    wants_figures = config.figures if render_figures is None else render_figures
    figure_paths: tuple[Path, ...] = ()
    if wants_figures:
        extras = figure_extras(ctx)
        figure_paths = tuple(
            figures.render_suite_figures(
                reporting.sort_records(records), config.suites, out_dir, extras
            )
        )
    return RunResult(
        records=tuple(reporting.sort_records(records)),
        exit_code=reporting.overall_exit_code(records),
        json_path=json_path,
        csv_path=csv_path,
        figure_paths=figure_paths,
    )
