"""Kernel profiles, stored moments, and weight evaluation."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from krc.kernels import (
    BOXCAR,
    EPANECHNIKOV,
    GAUSSIAN,
    WEIGHT_FLOOR,
    Kernel,
    kernel_by_name,
    weight,
)

ALL_KERNELS = [GAUSSIAN, EPANECHNIKOV, BOXCAR]


def test_gaussian_peak_value():
    # 1 / sqrt(2 pi)
    assert GAUSSIAN.evaluate(0.0) == pytest.approx(0.3989422804014327, abs=1e-16)


def test_epanechnikov_peak_and_support():
    assert EPANECHNIKOV.evaluate(0.0) == 0.75
    assert EPANECHNIKOV.evaluate(1.0) == 0.0
    assert EPANECHNIKOV.evaluate(-1.0) == 0.0
    assert EPANECHNIKOV.evaluate(1.0 + 1e-9) == 0.0
    assert EPANECHNIKOV.evaluate(0.999999) > 0.0


def test_boxcar_height_and_support():
    assert BOXCAR.evaluate(0.0) == 0.5
    assert BOXCAR.evaluate(0.999999) == 0.5
    assert BOXCAR.evaluate(-1.0) == 0.5
    assert BOXCAR.evaluate(1.0000001) == 0.0


@pytest.mark.parametrize("kernel", ALL_KERNELS, ids=lambda k: k.family)
def test_profiles_are_symmetric_densities(kernel):
    us = np.linspace(-3.0, 3.0, 121)
    vals = kernel.evaluate(us)
    flipped = kernel.evaluate(-us)
    assert np.array_equal(vals, flipped)
    assert np.all(vals >= 0.0)
    total, _ = quad(kernel.evaluate, -np.inf, np.inf)
    assert total == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("kernel", ALL_KERNELS, ids=lambda k: k.family)
def test_stored_moments_match_quadrature(kernel):
    m2, _ = quad(lambda u: u * u * kernel.evaluate(u), -np.inf, np.inf)
    sq, _ = quad(lambda u: kernel.evaluate(u) ** 2, -np.inf, np.inf)
    assert kernel.second_moment == pytest.approx(m2, abs=1e-10)
    assert kernel.squared_integral == pytest.approx(sq, abs=1e-10)


def test_gaussian_squared_integral_closed_form():
    # int phi(u)^2 du = 1 / (2 sqrt(pi))
    assert GAUSSIAN.squared_integral == pytest.approx(
        1.0 / (2.0 * math.sqrt(math.pi)), abs=1e-16
    )


def test_weight_is_scaled_kernel():
    # weight carries no 1/h factor; the estimator only ever uses ratios
    got = GAUSSIAN.weight(0.5, 0.5, 0.2)
    assert got == pytest.approx(0.3989422804014327, abs=1e-16)
    got = GAUSSIAN.weight(0.5, 0.3, 0.2)
    assert got == pytest.approx(GAUSSIAN.evaluate(1.0), abs=1e-16)


def test_weight_vectorized_matches_scalar():
    times = np.array([0.1, 0.4, 0.9])
    vec = EPANECHNIKOV.weight(0.5, times, 0.3)
    scal = [EPANECHNIKOV.weight(0.5, float(tk), 0.3) for tk in times]
    assert np.allclose(vec, scal, atol=0)
    assert isinstance(EPANECHNIKOV.weight(0.5, 0.4, 0.3), float)


def test_far_tail_clamps_to_exact_zero():
    # exp(-0.5 * 60^2) underflows past 1e-300 and must come back as 0.0
    assert GAUSSIAN.evaluate(60.0) == 0.0
    near = GAUSSIAN.evaluate(37.0)
    assert near == 0.0 or near >= WEIGHT_FLOOR


def test_bad_bandwidth_rejected():
    with pytest.raises(ValueError):
        GAUSSIAN.weight(0.5, 0.4, 0.0)
    with pytest.raises(ValueError):
        GAUSSIAN.weight(0.5, 0.4, -1.0)


def test_kernel_by_name_roundtrip():
    for k in ALL_KERNELS:
        assert kernel_by_name(k.family) is k
    assert kernel_by_name("GAUSSIAN") is GAUSSIAN
    with pytest.raises(ValueError):
        kernel_by_name("triangular")


def test_module_level_weight_alias():
    assert weight(BOXCAR, 0.5, 0.4, 0.2) == BOXCAR.weight(0.5, 0.4, 0.2)


def test_kernel_is_frozen():
    with pytest.raises(Exception):
        GAUSSIAN.family = "other"


def test_custom_kernel_instance():
    k = Kernel("boxcar", 1.0 / 3.0, 0.5)
    assert k.evaluate(0.2) == 0.5
