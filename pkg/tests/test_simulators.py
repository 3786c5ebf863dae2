"""Tests for the benchmark simulators."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import kstest

from core.errors import InputError
from core.simulators import (SimulatorModel, SimulatorSpec, gaussian_shift_ratio, rasterize_edge, simulate_at,
                             simulate_edges, simulate_gaussian_shift, simulate_joint, simulate_klein,
                             simulate_spiral, truncated_normal)


def test_noiseless_spiral_at_pi():
    samples = simulate_spiral(math.pi, 3, seed=0, noise_sd=0.0)
    assert_allclose(samples.points, [[-math.pi, 0.0]] * 3, atol=1e-12)


def test_noiseless_spiral_near_origin():
    assert_allclose(simulate_spiral(1e-9, 1, noise_sd=0.0).points, [[0.0, 0.0]], atol=1e-8)


def test_spiral_monte_carlo_mean():
    samples = simulate_spiral(5.0, 100_000, seed=1)
    assert_allclose(samples.points.mean(axis=0), [5 * math.cos(5), 5 * math.sin(5)], atol=0.02)


def test_spiral_parameter_range():
    with pytest.raises(InputError):
        simulate_spiral(15.0, 10)


def test_noiseless_klein_quarter_turn():
    point = simulate_klein(math.pi / 2, math.pi / 2, 1, noise_sd=0.0).points[0]
    assert_allclose(point, [0.0, 2.0, math.sqrt(2), math.sqrt(2)], atol=1e-12)


def test_noiseless_klein_annihilating_angle():
    point = simulate_klein(1.0, math.pi, 1, noise_sd=0.0).points[0]
    assert_allclose(point, 0.0, atol=1e-12)


def test_klein_monte_carlo_mean():
    samples = simulate_klein(1.0, 2.0, 100_000, seed=2)
    exact = simulate_klein(1.0, 2.0, 1, noise_sd=0.0).points[0]
    assert_allclose(samples.points.mean(axis=0), exact, atol=0.02)


def test_edge_through_centre_splits_image():
    image = simulate_edges(0.0, 0.0, 1, angle_sd=0.0, shift_sd=0.0).points[0].reshape(20, 20)
    assert image.sum() == 200
    assert np.all(image[:, :10] == 1)
    assert np.all(image[:, 10:] == 0)


def test_opposite_edge_angles_are_complementary():
    left = rasterize_edge(0.0, 0.0)
    right = rasterize_edge(math.pi, 0.0)
    assert_allclose(left + right, 1.0)


def test_edge_images_are_binary():
    samples = simulate_edges(1.0, 2.0, 50, seed=3)
    assert samples.points.shape == (50, 400)
    assert set(np.unique(samples.points)) <= {0.0, 1.0}


def test_edge_displacement_range():
    with pytest.raises(InputError):
        simulate_edges(0.0, 6.0, 1)


def test_truncated_normal_respects_bounds(rng):
    draws = truncated_normal(rng, 0.0, 2.0, -1.0, 0.5, 5000)
    assert draws.min() >= -1.0 and draws.max() <= 0.5


def test_truncated_normal_wide_bounds_recover_location(rng):
    draws = truncated_normal(rng, 3.0, 1.0, -100.0, 100.0, 20_000)
    assert draws.mean() == pytest.approx(3.0, abs=0.05)


def test_gaussian_shift_standard_normal():
    samples = simulate_gaussian_shift(0.0, 10_000, seed=4)
    assert abs(samples.points.mean()) < 0.04


def test_gaussian_shift_ratio_formula():
    x = np.array([-1.0, 0.0, 2.0])
    assert_allclose(gaussian_shift_ratio(x, 0.5), np.exp(x / 2 - 1 / 8))


def test_gaussian_shift_is_deterministic():
    first = simulate_gaussian_shift(0.5, 100, d=3, seed=9)
    second = simulate_gaussian_shift(0.5, 100, d=3, seed=9)
    assert np.array_equal(first.points, second.points)


def test_joint_needs_positive_size():
    with pytest.raises(InputError):
        simulate_joint(SimulatorSpec(SimulatorModel.SPIRAL), 0)


def test_joint_parameters_are_uniform():
    spec = SimulatorSpec(SimulatorModel.KLEIN_BOTTLE)
    samples = simulate_joint(spec, 10_000, seed=5)
    for column, (low, high) in zip(samples.thetas.T, spec.param_box):
        assert kstest((column - low) / (high - low), 'uniform').statistic < 0.05


def test_degenerate_box_reproduces_single_parameter_simulator():
    spec = SimulatorSpec('spiral', param_box=((7.0, 7.0),))
    joint = simulate_joint(spec, 20, seed=6)
    assert np.array_equal(joint.points, simulate_spiral(7.0, 20, seed=6).points)
    assert_allclose(joint.thetas, 7.0)


def test_simulate_at_labels_rows():
    spec = SimulatorSpec('edges')
    samples = simulate_at(spec, [1.0, -2.0], 4, seed=1)
    assert samples.points.shape == (4, 400)
    assert_allclose(samples.thetas, [[1.0, -2.0]] * 4)
    with pytest.raises(InputError):
        simulate_at(spec, [1.0], 4, seed=1)


def test_spec_validation():
    with pytest.raises(InputError):
        SimulatorSpec('spiral', param_box=((0.0, 1.0), (0.0, 1.0)))
    with pytest.raises(InputError):
        SimulatorSpec('spiral', param_box=((2.0, 1.0),))
    with pytest.raises(InputError):
        SimulatorSpec('klein_bottle', noise={'sd': 0.0})


def test_all_models_finite_and_deterministic():
    for model in SimulatorModel:
        spec = SimulatorSpec(model)
        first, second = simulate_joint(spec, 30, seed=8), simulate_joint(spec, 30, seed=8)
        assert np.all(np.isfinite(first.points))
        assert np.array_equal(first.points, second.points)
        assert np.array_equal(first.thetas, second.thetas)
