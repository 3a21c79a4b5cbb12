"""Inf-convolution operator: closed forms, brute force, and the exact
algebraic invariants.

The aligned-grid closed-form cases are chosen so the continuum minimizer is
itself a grid node (kink at a node, offsets t that are integer multiples of
dx): the discrete operator then reproduces the continuum values exactly,
with no discretization term to excuse.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from w2lab import (
    GridFunction,
    InvalidMeasureError,
    dual_lower_bound,
    gaussian_tilt,
    hj_residual,
    hopf_lax,
    small_time_error,
    w2_quantile,
)


def brute_force_hopf_lax(h: GridFunction, t: float, refine: int = 10) -> np.ndarray:
    """Direct minimization over a refine-x denser candidate grid, with h
    linearly interpolated. Independent of the production code path."""
    y = np.linspace(h.x[0], h.x[-1], (h.n - 1) * refine + 1)
    hy = np.interp(y, h.x, h.values)
    out = np.empty(h.n)
    for i, xi in enumerate(h.x):
        out[i] = np.min(hy + (xi - y) ** 2 / (2.0 * t))
    return out


def aligned_grid(n: int = 513) -> np.ndarray:
    return np.linspace(-8.0, 8.0, n)  # dx = 1/32, so 1.0 = 32 dx


def test_abs_closed_form_exact():
    x = aligned_grid()
    h = GridFunction(x=x, values=np.abs(x))
    q = hopf_lax(h, 1.0)
    expected = np.where(np.abs(x) <= 1.0, 0.5 * x * x, np.abs(x) - 0.5)
    np.testing.assert_allclose(q.values, expected, rtol=0, atol=1e-14)


def test_quadratic_closed_form():
    # Q_t (x^2/2) = x^2 / (2(1+t)): minimizer y* = x/(1+t) is generally off
    # the grid, so the error is the grid-search O(dx^2) term, not zero.
    x = aligned_grid()
    h = GridFunction(x=x, values=0.5 * x * x)
    t = 1.0
    q = hopf_lax(h, t)
    expected = x * x / (2.0 * (1.0 + t))
    dx = float(x[1] - x[0])
    assert float(np.max(np.abs(q.values - expected))) < dx * dx


def test_matches_brute_force_kinked():
    x = aligned_grid(257)
    h = GridFunction(x=x, values=np.minimum(np.abs(x - 1.0), 0.5 * np.abs(x + 2.0)))
    for t in (0.3, 1.0, 2.5):
        q = hopf_lax(h, t)
        brute = brute_force_hopf_lax(h, t)
        # brute force explores strictly more candidates, so it sits at or
        # below the grid-restricted value, within its own refinement error
        dx = float(x[1] - x[0])
        assert np.all(q.values >= brute - 1e-12)
        assert float(np.max(q.values - brute)) < dx * dx


def test_rejects_nonpositive_time():
    x = aligned_grid(65)
    h = GridFunction(x=x, values=np.abs(x))
    for t in (0.0, -1.0):
        with pytest.raises(InvalidMeasureError):
            hopf_lax(h, t)


def test_scaling_identity_exact():
    """min_y[t h(y) + (x-y)^2/2] = t min_y[h(y) + (x-y)^2/(2t)]: both sides
    search the same finite candidate set, so equality is exact."""
    x = aligned_grid(129)
    h = GridFunction(x=x, values=np.sin(x) + 0.3 * np.abs(x))
    for t in np.arange(0.1, 1.05, 0.1):
        lhs = hopf_lax(GridFunction(x=x, values=t * h.values), 1.0).values
        rhs = t * hopf_lax(h, t).values
        assert float(np.max(np.abs(lhs - rhs))) < 1e-12


def test_sandwich_bounds():
    x = aligned_grid(257)
    h = GridFunction(x=x, values=np.cos(2 * x))
    for t in (0.05, 0.5, 2.0):
        q = hopf_lax(h, t).values
        assert np.all(q <= h.values + 1e-15)
        assert np.all(q >= h.values - 0.5 * h.lipschitz**2 * t - 1e-15)


def test_monotone_in_time():
    x = aligned_grid(257)
    h = GridFunction(x=x, values=np.cos(2 * x))
    prev = hopf_lax(h, 0.1).values
    for t in (0.2, 0.4, 0.8):
        cur = hopf_lax(h, t).values
        assert np.all(cur <= prev + 1e-15)
        prev = cur


def test_semigroup_within_tolerance():
    x = aligned_grid(513)
    h = GridFunction(x=x, values=np.sin(x))
    dx = float(x[1] - x[0])
    s, t = 0.4, 0.6
    direct = hopf_lax(h, s + t).values
    stepped = hopf_lax(GridFunction(x=x, values=hopf_lax(h, t).values), s).values
    # Q_s Q_t >= Q_{s+t} always on the grid; the gap is bounded by the
    # grid-restriction error of the intermediate minimization.
    assert np.all(stepped >= direct - 1e-12)
    assert float(np.max(np.abs(stepped - direct))) <= 5.0 * dx * h.lipschitz


@settings(max_examples=30, deadline=None)
@given(
    st.floats(min_value=0.05, max_value=2.0, allow_nan=False),
    st.integers(min_value=0, max_value=10**6),
)
def test_scaling_identity_random(t, seed):
    rng = np.random.default_rng(seed)
    x = np.linspace(-2.0, 2.0, 101)
    values = np.cumsum(rng.uniform(-0.2, 0.2, 101))
    h = GridFunction(x=x, values=values)
    lhs = hopf_lax(GridFunction(x=x, values=t * values), 1.0).values
    rhs = t * hopf_lax(h, t).values
    assert float(np.max(np.abs(lhs - rhs))) < 1e-12


def test_hj_residual_smooth_small():
    x = aligned_grid(513)
    h = GridFunction(x=x, values=np.sin(x))
    rep = hj_residual(h, 0.5)
    assert rep.max_abs < 0.05
    assert rep.dt == pytest.approx(0.005)


def test_hj_residual_dt_tradeoff():
    # The time-difference error grows with dt while the fixed spatial error
    # of Q is amplified like dx^2/dt as dt shrinks: a very coarse dt must
    # lose to a moderate one, but refinement below the spatial floor does
    # not keep improving.
    x = aligned_grid(513)
    h = GridFunction(x=x, values=np.sin(x))
    very_coarse = hj_residual(h, 0.5, dt=0.125).max_abs
    moderate = hj_residual(h, 0.5, dt=0.02).max_abs
    assert moderate < very_coarse


def test_hj_residual_flags_kinks():
    x = aligned_grid(513)
    h = GridFunction(x=x, values=np.abs(x))
    rep = hj_residual(h, 0.04)
    # At small t the solution keeps a genuine kink near the origin.
    assert np.any(rep.kink)
    kink_x = x[rep.kink]
    assert float(np.min(np.abs(kink_x))) < 0.2


def test_small_time_error_decays_quadratically():
    x = np.linspace(-2.0, 2.0, 4001)
    h = GridFunction(x=x, values=np.sin(1.3 * x))
    ts = np.array([2e-2, 1e-2, 5e-3])
    errs = []
    for t in ts:
        dev, valid = small_time_error(h, t)
        assert valid.any()
        errs.append(dev)
    # Q_t h = h - t/2 |h'|^2 + O(t^2): the residual after removing the
    # first-order term shrinks superlinearly.
    assert errs[1] < errs[0]
    assert errs[2] < errs[1]


class TestDualLowerBound:
    def test_any_h_bounds_squared_distance(self, ou_small):
        f = gaussian_tilt(0.5, ou_small)
        w2 = w2_quantile(f, ou_small).distance
        for freq in (0.5, 1.0, 2.0):
            h = GridFunction(x=ou_small.x, values=np.sin(freq * ou_small.x))
            val = dual_lower_bound(f, h)
            assert val <= w2 * w2 + 1e-6 + 2 * ou_small.dx * max(1.0, w2 * w2)

    def test_linear_h_optimal_for_tilt(self, ou_small):
        """For a translation by m the supremum is attained at h(x) = m x:
        Q_1(a x) = a y - a^2/2 exactly, so the bound is 2am - a^2, maximized
        at a = m with value m^2 = W2^2."""
        m = 0.5
        f = gaussian_tilt(m, ou_small)
        vals = [
            dual_lower_bound(f, GridFunction(x=ou_small.x, values=a * ou_small.x))
            for a in (0.25, 0.5, 1.0)
        ]
        # suboptimal slopes certify 2am - a^2, the optimal slope certifies m^2
        assert vals[0] == pytest.approx(2 * 0.25 * m - 0.25**2, abs=1e-3)
        assert vals[1] == pytest.approx(m * m, abs=1e-3)
        assert vals[2] == pytest.approx(2 * 1.0 * m - 1.0, abs=1e-2)
        assert max(vals) <= m * m + 1e-3

    def test_zero_h_gives_zero(self, ou_small):
        f = gaussian_tilt(1.0, ou_small)
        h = GridFunction(x=ou_small.x, values=np.zeros(ou_small.n))
        assert dual_lower_bound(f, h) == pytest.approx(0.0, abs=1e-15)
