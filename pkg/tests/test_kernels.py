"""Tests for kernels, sample containers and the bandwidth grid."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.errors import InputError
from core.kernels import (KernelFamily, KernelSpec, SampleSet, Standardizer, as_point, bandwidth_grid,
                          eval_kernel, gram_matrix, kernel_block)


def test_kernel_at_coincident_points_is_one():
    assert eval_kernel(KernelSpec(0.7), [1.0, -2.0], [1.0, -2.0]) == 1.0


def test_kernel_unit_distance():
    """|z - y| = 1 with eps = 1 gives exp(-1/4)."""
    assert eval_kernel(KernelSpec(1.0), [0.0], [1.0]) == pytest.approx(math.exp(-0.25), abs=1e-15)


def test_kernel_far_points_underflow_to_zero():
    assert eval_kernel(KernelSpec(0.5), [0.0, 0.0], [1e3, 0.0]) == 0.0


def test_kernel_rejects_dimension_mismatch():
    with pytest.raises(InputError):
        eval_kernel(KernelSpec(1.0), [0.0, 1.0], [0.0])


@pytest.mark.parametrize('eps', [0.0, -1.0, float('nan'), float('inf')])
def test_kernel_spec_rejects_bad_bandwidth(eps):
    with pytest.raises(InputError):
        KernelSpec(eps)


def test_kernel_spec_dict_round_trip():
    spec = KernelSpec(0.25)
    assert KernelSpec.from_dict(spec.to_dict()) == spec
    assert spec.family is KernelFamily.GAUSSIAN


def test_gram_matrix_properties(small_sample):
    gram = gram_matrix(KernelSpec(0.8), small_sample)
    assert gram.shape == (40, 40)
    assert_allclose(gram, gram.T, atol=0)
    assert_allclose(np.diag(gram), 1.0)
    assert np.all(np.linalg.eigvalsh(gram) >= -1e-10)


def test_gram_matrix_three_points():
    gram = gram_matrix(KernelSpec(1.0), SampleSet(np.array([[0.0], [1.0], [2.0]])))
    expected = np.array([[1.0, math.exp(-0.25), math.exp(-1.0)],
                         [math.exp(-0.25), 1.0, math.exp(-0.25)],
                         [math.exp(-1.0), math.exp(-0.25), 1.0]])
    assert_allclose(gram, expected, rtol=1e-12)


def test_gram_matrix_single_point():
    assert_allclose(gram_matrix(KernelSpec(1.0), [[3.0, 4.0]]), [[1.0]])


def test_gram_matrix_matches_kernel_loop(small_sample):
    spec = KernelSpec(0.3)
    gram = gram_matrix(spec, small_sample)
    points = small_sample.points
    for i in (0, 7, 39):
        for j in (0, 11, 39):
            assert gram[i, j] == pytest.approx(eval_kernel(spec, points[i], points[j]), abs=1e-14)


def test_kernel_block_matches_gram(small_sample):
    spec = KernelSpec(1.3)
    assert_allclose(kernel_block(spec, small_sample, small_sample), gram_matrix(spec, small_sample), atol=1e-14)


def test_sample_set_validation():
    with pytest.raises(InputError):
        SampleSet(np.array([[1.0, np.nan]]))
    with pytest.raises(InputError):
        SampleSet(np.zeros((0, 2)))
    with pytest.raises(InputError):
        SampleSet(np.zeros((3, 1)), thetas=np.zeros((2, 1)))


def test_sample_set_column_vector_and_labels():
    samples = SampleSet(np.arange(4.0), thetas=np.ones(4))
    assert (samples.n, samples.d, samples.p) == (4, 1, 1)
    assert samples.theta_samples().d == 1
    assert not samples.without_thetas().has_thetas
    with pytest.raises(InputError):
        samples.without_thetas().theta_samples()


def test_as_point_checks_dimension():
    assert_allclose(as_point([1, 2]), [1.0, 2.0])
    with pytest.raises(InputError):
        as_point([1.0, 2.0], d=3)


def test_bandwidth_grid_is_sorted_and_positive(rng):
    grid = bandwidth_grid(rng.normal(size=(300, 2)), seed=3)
    assert grid.size == 5
    assert np.all(grid > 0)
    assert np.all(np.diff(grid) > 0)


def test_bandwidth_grid_median_is_quarter_median_sq_distance():
    points = np.array([[0.0], [1.0], [3.0]])
    # squared distances 1, 4, 9
    grid = bandwidth_grid(points, quantiles=(0.5,))
    assert_allclose(grid, [1.0])


def test_bandwidth_grid_subsample_is_seeded(rng):
    points = rng.normal(size=(1500, 1))
    assert_allclose(bandwidth_grid(points, seed=4), bandwidth_grid(points, seed=4))


def test_bandwidth_grid_rejects_coincident_points():
    with pytest.raises(InputError):
        bandwidth_grid(np.ones((10, 2)))


def test_standardizer_uses_training_statistics(rng):
    train = SampleSet(rng.normal(loc=3.0, scale=2.0, size=(500, 2)))
    scaler = Standardizer.fit(train)
    scaled = scaler.transform(train).points
    assert_allclose(scaled.mean(axis=0), 0.0, atol=1e-12)
    assert_allclose(scaled.std(axis=0), 1.0, atol=1e-12)
    restored = Standardizer.from_dict(scaler.to_dict())
    assert_allclose(restored.transform_points(train.points), scaled)


def test_standardizer_constant_column_keeps_unit_scale():
    scaler = Standardizer.fit(np.column_stack([np.ones(5), np.arange(5.0)]))
    assert scaler.scale[0] == 1.0
