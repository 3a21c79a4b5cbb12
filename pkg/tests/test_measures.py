"""Measure construction and closed-form functionals.

The exponential-tilt family on the quadratic model has closed forms for every
functional we compute, which makes it the primary oracle for the quadrature
conventions: any systematic factor error shows up here immediately.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from w2lab import (
    DegenerateInputError,
    InvalidDensityError,
    InvalidMeasureError,
    build_grid_measure,
    density_from_positive,
    functionals,
    gaussian_tilt,
    sqrt_centering,
)
from w2lab.measures import GridMeasure


def test_weights_normalized(ou):
    assert abs(float(np.sum(ou.weights)) - 1.0) < 1e-12
    assert np.all(ou.weights > 0)


def test_ou_weights_match_normal_density(ou):
    # V = x^2/2 makes the weights a discretized standard normal.
    pdf = np.exp(-0.5 * ou.x**2)
    pdf = pdf / np.sum(pdf)
    np.testing.assert_allclose(ou.weights, pdf, rtol=1e-12, atol=0)


def test_base_index_at_potential_minimum(ou):
    assert ou.x[ou.base_index] == 0.0


def test_truncation_tail_estimate_rejects_short_domain():
    with pytest.raises(InvalidMeasureError):
        build_grid_measure(lambda x: 0.5 * x * x, (-2.0, 2.0), 129)


def test_bounded_domain_opt_out():
    mu = build_grid_measure(lambda x: np.zeros_like(x), (0.0, 1.0), 65, tail_mass=0.0)
    assert mu.n == 65
    np.testing.assert_allclose(mu.weights, np.full(65, 1 / 65), rtol=1e-12)


def test_density_mean_validation(ou):
    from w2lab import DensityRatio

    with pytest.raises(InvalidDensityError):
        DensityRatio(values=np.full(ou.n, 2.0), measure=ou, label="bad")


def test_density_rejects_negative(ou):
    values = np.ones(ou.n)
    values[3] = -0.5
    with pytest.raises(InvalidDensityError):
        density_from_positive(values, ou, label="neg")


class TestTiltClosedForms:
    """e^{mx} tilts of the standard normal: every functional is explicit."""

    @pytest.mark.parametrize("m", [-1.0, -0.5, 0.25, 0.5, 1.0])
    def test_variance(self, ou, m):
        f = gaussian_tilt(m, ou)
        got = functionals(f, ou).variance
        assert got == pytest.approx(math.expm1(m * m), rel=1e-6, abs=1e-9)

    @pytest.mark.parametrize("m", [-1.0, 0.5, 1.0])
    def test_entropy(self, ou, m):
        f = gaussian_tilt(m, ou)
        got = functionals(f, ou).entropy
        assert got == pytest.approx(0.5 * m * m, rel=1e-6, abs=1e-9)

    @pytest.mark.parametrize("m", [-1.0, 0.5, 1.0])
    def test_fisher(self, ou, m):
        # I(f) = m^2: the tilt's score is constant. Gradient quadrature is
        # second order, hence the looser tolerance.
        f = gaussian_tilt(m, ou)
        got = functionals(f, ou).fisher
        assert got == pytest.approx(m * m, rel=1e-4)

    @pytest.mark.parametrize("m", [-1.0, 0.5, 1.0])
    def test_dirichlet(self, ou, m):
        f = gaussian_tilt(m, ou)
        got = functionals(f, ou).dirichlet
        assert got == pytest.approx(m * m * math.exp(m * m), rel=1e-4)

    def test_sqrt_centering_m1(self, ou):
        # c = mu(sqrt f) = e^{-m^2/8}, sigma^2 = 1 - e^{-m^2/4} at m=1.
        f = gaussian_tilt(1.0, ou)
        cen = sqrt_centering(f, ou)
        assert cen.c == pytest.approx(math.exp(-0.125), rel=1e-9)
        assert cen.sigma2 == pytest.approx(1.0 - math.exp(-0.25), rel=1e-8)
        assert not cen.is_degenerate


def test_flat_density_is_degenerate(ou):
    f = density_from_positive(np.ones(ou.n), ou, label="flat")
    cen = sqrt_centering(f, ou)
    assert cen.is_degenerate
    assert cen.sigma2 < 1e-12


def test_fisher_infinite_at_zero_node_with_gradient(ou):
    # A zero node with unequal neighbors has a nonzero central gradient
    # there, which makes the Fisher integrand infinite. (A symmetric pinch
    # does not: its central difference vanishes at the zero.)
    values = np.ones(ou.n)
    mid = ou.n // 2
    values[mid] = 0.0
    values[mid + 1] = 2.0
    f = density_from_positive(values, ou, label="pinched")
    assert functionals(f, ou).fisher == math.inf


def test_fisher_finite_at_symmetric_pinch(ou):
    values = np.ones(ou.n)
    values[ou.n // 2] = 0.0
    f = density_from_positive(values, ou, label="pinched-sym")
    assert math.isfinite(functionals(f, ou).fisher)


def test_entropy_zero_iff_flat(ou):
    flat = density_from_positive(np.ones(ou.n), ou, label="flat")
    assert functionals(flat, ou).entropy == pytest.approx(0.0, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_random_positive_density_invariants(seed):
    mu = build_grid_measure(lambda x: 0.5 * x * x, (-8.0, 8.0), 129)
    rng = np.random.default_rng(seed)
    f = density_from_positive(0.25 + rng.random(mu.n), mu, label=f"rnd:{seed}")
    bundle = functionals(f, mu)
    assert abs(mu.mean(f.values) - 1.0) < 1e-10
    assert bundle.variance >= 0.0
    assert bundle.entropy >= -1e-12
    assert bundle.dirichlet >= 0.0
    assert bundle.fisher >= 0.0


def test_grid_measure_arrays_read_only(ou):
    assert isinstance(ou, GridMeasure)
    with pytest.raises(ValueError):
        ou.weights[0] = 0.5


def test_squared_distance_to_base(ou):
    d2 = ou.squared_distance_to_base()
    assert d2[ou.base_index] == 0.0
    assert d2[-1] == pytest.approx(64.0)


def test_degenerate_grid_rejected():
    with pytest.raises((InvalidMeasureError, DegenerateInputError)):
        build_grid_measure(lambda x: 0.5 * x * x, (-8.0, 8.0), 1)
