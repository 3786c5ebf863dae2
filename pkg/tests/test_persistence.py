"""Tests for saving and loading fitted models."""

import json
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.errors import CorruptModelFileError, ModelFileError, ModelVersionError
from core.kernels import KernelSpec, Standardizer
from core.likelihood import LikelihoodModel, fit_likelihood
from core.persistence import HEADER_KEY, load_model, model_provenance, read_model_file, save_model
from core.ratio import RatioModel, fit_ratio_coeffs
from core.simulators import SimulatorSpec, simulate_joint
from core.spectral_basis import fit_basis


@pytest.fixture
def ratio_model(gaussian_pair):
    samples_F, samples_G = gaussian_pair
    basis = fit_basis(samples_G.subset(np.arange(150)), KernelSpec(0.4), J_max=10)
    model = RatioModel(basis, fit_ratio_coeffs(basis, samples_F.subset(np.arange(150))), J_selected=7)
    return replace(model, standardizer=Standardizer.fit(samples_G))


@pytest.fixture
def likelihood_model():
    spec = SimulatorSpec('klein_bottle')
    joint = simulate_joint(spec, 200, seed=1)
    samples_G = simulate_joint(spec, 200, seed=2).without_thetas()
    model = fit_likelihood(joint, samples_G, KernelSpec(1.0), KernelSpec(0.8), I_max=6, J_max=9)
    return replace(model, I_selected=4, J_selected=5, clip_negative=False)


def test_ratio_model_round_trip(tmp_path, ratio_model, rng):
    path = save_model(tmp_path / 'ratio.npz', ratio_model, {'seed': 3})
    loaded = load_model(path, expected_kind='ratio')
    assert isinstance(loaded, RatioModel)
    assert np.array_equal(loaded.coeffs, ratio_model.coeffs)
    assert loaded.J_selected == 7
    assert loaded.basis.kernel == ratio_model.basis.kernel
    points = rng.normal(size=(100, 1))
    assert_allclose(loaded.predict(points), ratio_model.predict(points), rtol=1e-12, atol=1e-12)


def test_likelihood_model_round_trip(tmp_path, likelihood_model, rng):
    path = save_model(tmp_path / 'likelihood.npz', likelihood_model)
    loaded = load_model(path, expected_kind='likelihood')
    assert isinstance(loaded, LikelihoodModel)
    assert (loaded.I_selected, loaded.J_selected, loaded.clip_negative) == (4, 5, False)
    assert np.array_equal(loaded.coeffs, likelihood_model.coeffs)
    xs = rng.normal(size=(100, 4))
    thetas = rng.uniform(0, 2 * np.pi, size=(100, 2))
    assert_allclose(loaded.predict_pairs(xs, thetas), likelihood_model.predict_pairs(xs, thetas),
                    rtol=1e-12, atol=1e-12)


def test_parameter_box_round_trip(tmp_path, likelihood_model):
    assert load_model(save_model(tmp_path / 'plain.npz', likelihood_model)).param_box is None
    boxed = replace(likelihood_model, param_box=SimulatorSpec('klein_bottle').param_box)
    loaded = load_model(save_model(tmp_path / 'boxed.npz', boxed), expected_kind='likelihood')
    assert loaded.param_box == boxed.param_box
    header, _ = read_model_file(tmp_path / 'boxed.npz')
    assert header['param_box'] == [[0.0, 2 * np.pi], [0.0, 2 * np.pi]]


def test_provenance_is_stored(tmp_path, ratio_model):
    path = save_model(tmp_path / 'ratio.npz', ratio_model, {'seed': 3, 'eps_grid': [0.1, 0.2]})
    assert model_provenance(path) == {'seed': 3, 'eps_grid': [0.1, 0.2]}
    header, _ = read_model_file(path)
    assert header['kind'] == 'ratio'
    assert header['format_version'] == '1.0'


def test_kind_mismatch(tmp_path, ratio_model):
    path = save_model(tmp_path / 'ratio.npz', ratio_model)
    with pytest.raises(ModelFileError):
        load_model(path, expected_kind='likelihood')


def test_missing_file(tmp_path):
    with pytest.raises(ModelFileError):
        load_model(tmp_path / 'absent.npz')


def test_truncated_file_is_corrupt(tmp_path, ratio_model):
    path = save_model(tmp_path / 'ratio.npz', ratio_model)
    data = path.read_bytes()
    path.write_bytes(data[:len(data) // 2])
    with pytest.raises(CorruptModelFileError):
        load_model(path)


def test_garbage_file_is_corrupt(tmp_path):
    path = tmp_path / 'junk.npz'
    path.write_bytes(b'not a model file')
    with pytest.raises(CorruptModelFileError):
        load_model(path)


def _rewrite_version(path, version):
    header, arrays = read_model_file(path)
    header['format_version'] = version
    with open(path, 'wb') as handle:
        np.savez_compressed(handle, **{HEADER_KEY: np.array(json.dumps(header))}, **arrays)


def test_newer_major_version_is_refused(tmp_path, ratio_model):
    path = save_model(tmp_path / 'ratio.npz', ratio_model)
    _rewrite_version(path, '2.0')
    with pytest.raises(ModelVersionError):
        load_model(path)


def test_newer_minor_version_still_loads(tmp_path, ratio_model):
    path = save_model(tmp_path / 'ratio.npz', ratio_model)
    _rewrite_version(path, '1.3')
    assert load_model(path).J_selected == ratio_model.J_selected
