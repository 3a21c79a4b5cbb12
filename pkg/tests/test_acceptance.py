"""Top-level acceptance gate.

Ten checks, run in order, each printing a single verdict line (run with -s
or -rA to see them on success). Tolerances are the release thresholds, not
the tighter ones used by the unit suites.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg
import scipy.optimize

from w2lab import (
    GridFunction,
    LyapunovWitness,
    SuiteConfig,
    build_generator,
    build_grid_measure,
    check_centralization,
    check_contraction,
    check_decay,
    check_derivative_bound,
    check_interpolation_bound,
    check_lyapunov,
    check_transport_inequalities,
    check_variance_bounds,
    check_w2i_from_lyapunov,
    contraction_constants,
    fit_weighted_poincare,
    functionals,
    gaussian_tilt,
    run_suite,
    spectral_gap,
    w2_lp,
    w2_quantile,
)
from w2lab.battery import quantile_backend, weighted_poincare_violation
from w2lab.hopflax import hopf_lax, small_time_error
from w2lab.suites import density_family
from w2lab.transport import FiniteMetricMeasure, sinkhorn_bracket


def _verdict(num: int, name: str, ok: bool, detail: str = "") -> None:
    line = f"acceptance {num:02d} {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


def _family20(mu):
    family = density_family(mu, SuiteConfig())
    assert len(family) == 20
    return family


@pytest.fixture(scope="module")
def models(ou, ou_gen, doublewell, doublewell_gen):
    return {"ou": (ou, ou_gen), "doublewell": (doublewell, doublewell_gen)}


def test_01_spectral_gap():
    quadratic = lambda x: 0.5 * x * x
    mu = build_grid_measure(quadratic, (-8.0, 8.0), 1024)
    _, c_p = spectral_gap(build_generator(mu))
    cal_err = abs(c_p - 1.0)

    small = build_grid_measure(quadratic, (-8.0, 8.0), 256)
    L = build_generator(small)
    gap, _ = spectral_gap(L)
    # dense-solver oracle: symmetrize by sqrt-weights, drop the constants mode
    sym = np.sqrt(small.weights)[:, None] * L.as_dense() / np.sqrt(small.weights)[None, :]
    vals, vecs = scipy.linalg.eigh(-0.5 * (sym + sym.T))
    k0 = int(np.argmax(np.abs(vecs.T @ np.sqrt(small.weights))))
    oracle = float(np.min(np.delete(vals, k0)))
    oracle_err = abs(gap - oracle)

    _verdict(
        1, "spectral gap",
        cal_err <= 1e-3 and oracle_err <= 1e-10,
        f"|C_P-1|={cal_err:.2e}, |gap-dense|={oracle_err:.2e}",
    )


def test_02_tilt_saturations(ou, ou_gen):
    f = gaussian_tilt(0.5, ou)
    consts = {"C_T": 1.0, "C_LS": 1.0, "rho": 1.0}
    bad: list[str] = []

    sq = quantile_backend(f, ou) ** 2
    if abs(sq - 0.25) > 1e-3:
        bad.append(f"w2_sq={sq:.6f}")

    bundle = functionals(f, ou)
    lsi_ratio = 2.0 * bundle.entropy / bundle.fisher
    if abs(lsi_ratio - 1.0) > 1e-3:
        bad.append(f"lsi={lsi_ratio:.6f}")

    by_id = {r.id: r for r in check_transport_inequalities(f, ou_gen, consts)}
    for rid, tol in (("talagrand", 1e-3), ("hwi", 1e-3)):
        ratio = by_id[rid].lhs / by_id[rid].rhs
        if abs(ratio - 1.0) > tol:
            bad.append(f"{rid}={ratio:.6f}")

    for rep in check_derivative_bound(f, ou_gen, (0.25, 0.5, 1.0)):
        ratio = rep.lhs / rep.rhs
        if abs(ratio - 1.0) > 1e-2:
            bad.append(f"deriv@{rep.constants['t']:g}={ratio:.4f}")

    interp = check_interpolation_bound(f, ou_gen)
    interp_ratio = interp.lhs / interp.rhs
    if abs(interp_ratio - 1.0) > 2e-2:
        bad.append(f"interp={interp_ratio:.4f}")

    _verdict(2, "tilt saturations", not bad, "; ".join(bad) or "6 ratios at unity")


def test_03_variance_bound_battery(models):
    worst = math.inf
    count = 0
    ok = True
    for mu, L in models.values():
        _, c_p = spectral_gap(L)
        for f in _family20(mu):
            for rep in check_variance_bounds(f, L, c_p):
                count += 1
                floor = -1e-6 - 2.0 * mu.dx * max(1.0, abs(rep.lhs), abs(rep.rhs))
                worst = min(worst, rep.margin - floor)
                if rep.margin < floor or rep.verdict != "pass":
                    ok = False
    _verdict(3, "variance bound battery", ok,
             f"{count} reports, worst margin slack {worst:.3e}")


def test_04_decay(ou, ou_gen):
    times = (0.25, 0.5, 1.0, 2.0, 4.0)
    reports = [r for f in _family20(ou) for r in check_decay(f, ou_gen, times)]
    violations = [r for r in reports if r.verdict != "pass"]
    _verdict(4, "decay along the flow", not violations,
             f"{len(reports)} reports, {len(violations)} violations")


def test_05_contraction_constants(ou, ou_gen):
    c = contraction_constants(1.0, 1.0)
    bad: list[str] = []
    if abs(c.t0 - 0.34657) > 1e-4:
        bad.append(f"t0={c.t0:.6f}")
    if abs(c.prefactor - 1.41421) > 1e-4:
        bad.append(f"C={c.prefactor:.6f}")

    def gamma(t: float) -> float:
        return 1.0 * math.exp(2.0 * t) * math.exp(2.0 * t) / math.expm1(2.0 * t)

    ts = np.linspace(1e-6, 5.0, 200001)
    k = int(np.argmin([gamma(t) for t in ts]))
    res = scipy.optimize.minimize_scalar(
        gamma, bounds=(ts[k - 1], ts[k + 1]), method="bounded", options={"xatol": 1e-12}
    )
    if abs(c.t0 - float(res.x)) > 1e-6:
        bad.append(f"brute t0 off by {abs(c.t0 - res.x):.2e}")

    reports = check_contraction(gaussian_tilt(0.5, ou), ou_gen, c, (0.25, 0.5, 1.0, 2.0, 4.0))
    failed = [r for r in reports if r.verdict != "pass"]
    if failed:
        bad.append(f"{len(failed)} traced times fail")
    _verdict(5, "contraction constants", not bad, "; ".join(bad) or
             f"t0={c.t0:.5f}, C={c.prefactor:.5f}, {len(reports)} times pass")


def test_06_centralization(models):
    bad: list[str] = []
    count = 0
    for name, (mu, L) in models.items():
        _, c_p = spectral_gap(L)
        for f in _family20(mu):
            for rep in check_centralization(f, mu, c_p):
                count += 1
                if rep.verdict != "pass" or rep.margin < 0.0:
                    bad.append(f"{name}/{f.label}: margin={rep.margin:.3e}")
    ou_mu, ou_L = models["ou"]
    _, c_p = spectral_gap(ou_L)
    flat = gaussian_tilt(0.0, ou_mu)
    flat_reports = check_centralization(flat, ou_mu, c_p)
    if any(r.verdict != "vacuous" for r in flat_reports):
        bad.append("flat density not vacuous")
    _verdict(6, "centralization bound", not bad,
             "; ".join(bad[:3]) or f"{count} margins >= 0, flat vacuous")


def test_07_transport_backends():
    rng = np.random.default_rng(2026)
    x = np.linspace(-4.0, 4.0, 200)
    dx = float(x[1] - x[0])
    space = FiniteMetricMeasure.from_points_1d(x, np.full(200, 1.0 / 200))
    bad: list[str] = []
    for pair in range(10):
        wa = rng.random(200) + 0.05
        wb = rng.random(200) + 0.05
        wa /= wa.sum()
        wb /= wb.sum()
        src = space.with_weights(wa)
        tgt = space.with_weights(wb)
        lp = w2_lp(src, tgt)
        quant = w2_quantile((x, wa), (x, wb))
        if abs(quant.distance - lp.distance) > 2.0 * dx:
            bad.append(f"pair {pair}: |q-lp|={abs(quant.distance - lp.distance):.3e}")
        if lp.duality_gap > 1e-8:
            bad.append(f"pair {pair}: gap={lp.duality_gap:.2e}")
        cost = lp.distance**2
        for eps in (1e-1, 1e-2, 1e-3):
            sk = sinkhorn_bracket(src, tgt, epsilon=eps)
            if not (sk.lower <= cost + 1e-9 * (1.0 + cost) and cost <= sk.upper + 1e-9 * (1.0 + cost)):
                bad.append(f"pair {pair} eps={eps:g}: [{sk.lower:.6f},{sk.upper:.6f}] vs {cost:.6f}")
    _verdict(7, "transport backends", not bad,
             "; ".join(bad[:3]) or "10 pairs x (quantile, LP gap, 3 brackets)")


def test_08_hopf_lax():
    x = np.linspace(-2.0, 2.0, 4001)
    dx = float(x[1] - x[0])
    h = GridFunction(x=x, values=np.sin(x))
    bad: list[str] = []

    scale_worst = 0.0
    for t in np.arange(0.1, 1.05, 0.1):
        t = float(t)
        left = hopf_lax(GridFunction(x=x, values=t * h.values), 1.0).values
        right = t * hopf_lax(h, t).values
        scale_worst = max(scale_worst, float(np.max(np.abs(left - right))))
    if scale_worst > 1e-12:
        bad.append(f"scaling={scale_worst:.2e}")

    stepped = hopf_lax(hopf_lax(h, 0.25).function, 0.25).values
    direct = hopf_lax(h, 0.5).values
    semi = float(np.max(np.abs(stepped - direct)))
    if semi > 5.0 * dx * h.lipschitz:
        bad.append(f"semigroup={semi:.2e}")

    fine = np.linspace(-2.0, 2.0, 16001)
    ts = np.array([1e-1, 1e-2, 1e-3])
    slopes = []
    for vals in (np.sin(fine), 0.25 * fine * fine, 0.3 * np.cos(2.0 * fine) + 0.1 * fine):
        g = GridFunction(x=fine, values=vals)
        errs = np.array([t * small_time_error(g, float(t))[0] for t in ts])
        slopes.append(float(np.polyfit(np.log(ts), np.log(errs), 1)[0]))
    if not all(s > 2.0 for s in slopes):
        bad.append(f"slopes={['%.3f' % s for s in slopes]}")

    _verdict(8, "inf-convolution", not bad, "; ".join(bad) or
             f"scaling {scale_worst:.1e}, semigroup {semi:.1e}, slopes "
             + "/".join(f"{s:.2f}" for s in slopes))


def test_09_lyapunov_pipeline(ou, ou_gen):
    bad: list[str] = []
    wf = GridFunction(x=ou.x, values=np.exp(0.25 * ou.x**2))

    good = check_lyapunov(LyapunovWitness(function=wf, c=0.25, b=0.5, x0=ou.base_index), ou_gen)
    if not good.passed or good.violation_nodes.size:
        bad.append("exact witness rejected")

    tight = check_lyapunov(LyapunovWitness(function=wf, c=0.3, b=0.5, x0=ou.base_index), ou_gen)
    if tight.passed or not tight.violation_nodes.size:
        bad.append("overtight rate not refused")

    fit = fit_weighted_poincare(ou_gen, ou.base_index, 2.0)
    rng = np.random.default_rng(99)
    violations = sum(
        weighted_poincare_violation(ou_gen, ou.base_index, fit.c3, fit.c4,
                                    rng.standard_normal(ou.n)) > 1e-10
        for _ in range(100)
    )
    if not fit.feasible or violations:
        bad.append(f"fit violations={violations}")

    witness = LyapunovWitness(function=wf, c=0.25, b=0.5, x0=ou.base_index)
    c7_min = math.inf
    for m in (-1.0, -0.5, -0.25, 0.25, 0.5, 1.0):
        reports, _ = check_w2i_from_lyapunov(gaussian_tilt(m, ou), ou_gen, witness, c4=2.0)
        if any(r.verdict != "pass" for r in reports):
            bad.append(f"chain fails at tilt {m:g}")
        c7_min = min(c7_min, reports[-1].constants["C_7"])
    if c7_min < 1.0:
        bad.append(f"C_7={c7_min:.3f}")

    _verdict(9, "drift-to-transport pipeline", not bad,
             "; ".join(bad) or f"witness exact, 100 clean fits, C_7>={c7_min:.1f}")


def test_10_determinism(tmp_path):
    config = SuiteConfig(n=257, tilts=(0.5, -0.5), mixtures=2, perturbations=2,
                         figures=False)
    first = run_suite(config, tmp_path / "one")
    second = run_suite(config, tmp_path / "two")
    same_json = first.json_path.read_bytes() == second.json_path.read_bytes()
    same_csv = first.csv_path.read_bytes() == second.csv_path.read_bytes()
    _verdict(10, "deterministic reports", same_json and same_csv,
             f"report.json identical={same_json}, summary.csv identical={same_csv}")
