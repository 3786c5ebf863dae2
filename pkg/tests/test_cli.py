"""End-to-end tests for the command-line entry point."""

import json

import numpy as np
import pandas as pd
import pytest

from core.errors import EXIT_DATA, EXIT_OK, EXIT_USAGE
from core.simulators import SimulatorSpec, simulate_at, simulate_gaussian_shift
from spectral_main import main, parse_box
from utils.csv_io import write_samples


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({
        'ratio': {'j_max': 10},
        'likelihood': {'i_max': 5, 'j_max': 10, 'b_permutations': 3, 'grid_points_per_dim': 20},
        'simulator': {'n': 400, 'n_test': 200},
        'study': {'train_size': 300, 'n_test_thetas': 4},
        'logging': {'to_file': False},
    }))
    return str(path)


def run(*argv, out_dir, config=None):
    args = list(argv) + ['--out-dir', str(out_dir), '--quiet']
    if config:
        args += ['--config', config]
    return main(args)


def test_generate_spiral_columns(tmp_path, small_config):
    output = tmp_path / 'spiral.csv'
    assert run('generate', '--model', 'spiral', '--n', '10', '--output', str(output),
               out_dir=tmp_path, config=small_config) == EXIT_OK
    frame = pd.read_csv(output)
    assert list(frame.columns) == ['theta_0', 'x_0', 'x_1']
    assert len(frame) == 10


def test_generate_is_reproducible(tmp_path, small_config):
    first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
    for path in (first, second):
        run('generate', '--model', 'klein_bottle', '--n', '25', '--seed', '4', '--output', str(path),
            out_dir=tmp_path, config=small_config)
    assert first.read_bytes() == second.read_bytes()


def test_generate_edges_width(tmp_path, small_config):
    run('generate', '--model', 'edges', '--n', '3', out_dir=tmp_path, config=small_config)
    frame = pd.read_csv(tmp_path / 'edges_samples.csv')
    assert frame.shape == (3, 402)


def test_generate_at_fixed_parameter(tmp_path, small_config):
    run('generate', '--model', 'spiral', '--n', '5', '--theta', '4.5', out_dir=tmp_path, config=small_config)
    frame = pd.read_csv(tmp_path / 'spiral_samples.csv')
    assert np.all(frame['theta_0'] == 4.5)


def test_fit_ratio_on_simulated_data(tmp_path, small_config):
    assert run('fit-ratio', out_dir=tmp_path, config=small_config) == EXIT_OK
    for name in ('ratio_model.npz', 'loss_report.csv', 'test_loss.csv', 'provenance.json', 'run_config.json'):
        assert (tmp_path / name).exists()
    assert pd.read_csv(tmp_path / 'test_loss.csv')['test_loss'].iloc[0] < 0
    report = pd.read_csv(tmp_path / 'loss_report.csv')
    assert list(report.columns) == ['eps', 'J', 'loss']
    assert report['eps'].nunique() == 5


def test_fit_ratio_singleton_grid_from_csv(tmp_path, small_config):
    f_path, g_path = tmp_path / 'f.csv', tmp_path / 'g.csv'
    write_samples(f_path, simulate_gaussian_shift(0.5, 200, seed=1))
    write_samples(g_path, simulate_gaussian_shift(0.0, 200, seed=2))
    code = run('fit-ratio', '--f-data', str(f_path), '--g-data', str(g_path), '--eps-grid', '0.5',
               '--j-max', '1', out_dir=tmp_path, config=small_config)
    assert code == EXIT_OK
    assert len(pd.read_csv(tmp_path / 'loss_report.csv')) == 1


def test_fit_ratio_malformed_csv(tmp_path, small_config, capsys):
    f_path, g_path = tmp_path / 'f.csv', tmp_path / 'g.csv'
    f_path.write_text('x_0\n0.1\nabc\n0.3\n')
    write_samples(g_path, simulate_gaussian_shift(0.0, 20, seed=2))
    code = run('fit-ratio', '--f-data', str(f_path), '--g-data', str(g_path), out_dir=tmp_path,
               config=small_config)
    assert code == EXIT_DATA
    err = capsys.readouterr().err
    assert 'row 3' in err and "'x_0'" in err


def test_fit_ratio_needs_both_files(tmp_path, small_config):
    f_path = tmp_path / 'f.csv'
    write_samples(f_path, simulate_gaussian_shift(0.5, 20, seed=1))
    assert run('fit-ratio', '--f-data', str(f_path), out_dir=tmp_path, config=small_config) == EXIT_USAGE


def test_fit_likelihood_needs_theta_columns(tmp_path, small_config):
    joint_path, g_path = tmp_path / 'joint.csv', tmp_path / 'g.csv'
    write_samples(joint_path, simulate_gaussian_shift(0.0, 50, seed=1))
    write_samples(g_path, simulate_gaussian_shift(0.0, 50, seed=2))
    code = run('fit-likelihood', '--joint-data', str(joint_path), '--g-data', str(g_path),
               out_dir=tmp_path, config=small_config)
    assert code == EXIT_DATA


def test_bad_splits_are_a_usage_error(tmp_path, small_config):
    assert run('fit-ratio', '--splits', '0.5,0.5', out_dir=tmp_path, config=small_config) == EXIT_USAGE


def test_missing_config_file(tmp_path):
    assert run('generate', '--model', 'spiral', '--n', '3', out_dir=tmp_path,
               config=str(tmp_path / 'absent.json')) == EXIT_USAGE


def test_likelihood_then_posterior(tmp_path, small_config):
    assert run('fit-likelihood', '--model', 'gaussian_shift', '--eps-grid', '0.3', '--theta-eps-grid', '0.3',
               out_dir=tmp_path, config=small_config) == EXIT_OK
    summary = pd.read_csv(tmp_path / 'test_loss.csv')
    assert list(summary.columns) == ['eps_x', 'eps_theta', 'I', 'J', 'validation_loss', 'test_loss',
                                     'avg_likelihood']

    observations = tmp_path / 'obs.csv'
    write_samples(observations, simulate_at(SimulatorSpec('gaussian_shift'), [0.5], 5, seed=9))
    post_dir = tmp_path / 'posterior'
    code = run('posterior', '--model-file', str(tmp_path / 'likelihood_model.npz'),
               '--observations', str(observations), '--box=-2:2', '--grid-points', '40',
               out_dir=post_dir, config=small_config)
    assert code == EXIT_OK
    posterior = pd.read_csv(post_dir / 'posterior.csv')
    assert list(posterior.columns) == ['theta_0', 'density']
    assert len(posterior) == 40
    assert posterior['density'].sum() * 0.1 == pytest.approx(1.0, rel=1e-9)


def test_posterior_without_observations(tmp_path, small_config):
    assert run('fit-likelihood', '--model', 'gaussian_shift', '--eps-grid', '0.3', '--theta-eps-grid', '0.3',
               out_dir=tmp_path, config=small_config) == EXIT_OK
    empty = tmp_path / 'empty.csv'
    empty.write_text('x_0\n')
    code = run('posterior', '--model-file', str(tmp_path / 'likelihood_model.npz'), '--observations', str(empty),
               out_dir=tmp_path, config=small_config)
    assert code == EXIT_DATA


def test_study_rejects_unknown_benchmark(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(['study', '--benchmark', 'nope', '--out-dir', str(tmp_path)])
    assert excinfo.value.code == 2


def test_ratio_study_writes_summary(tmp_path, small_config):
    code = run('study', '--benchmark', 'ratio_gaussian', '--sizes', '100,200', '--seeds', '2',
               '--eps-grid', '0.3', '--j-max', '5', out_dir=tmp_path, config=small_config)
    assert code == EXIT_OK
    summary = pd.read_csv(tmp_path / 'summary.csv')
    assert summary['size'].tolist() == [100, 200]
    assert (tmp_path / 'study.csv').exists()


def test_parse_box():
    assert parse_box('0:15') == [[0.0, 15.0]]
    assert parse_box('0:6.28,1:2') == [[0.0, 6.28], [1.0, 2.0]]


@pytest.mark.parametrize('with_config', [True, False])
def test_unwritable_out_dir_is_a_usage_error(tmp_path, small_config, with_config, capsys):
    blocker = tmp_path / 'not_a_dir'
    blocker.write_text('')
    code = run('generate', '--model', 'spiral', '--n', '3', out_dir=blocker / 'sub',
               config=small_config if with_config else None)
    assert code == EXIT_USAGE
    assert 'error:' in capsys.readouterr().err


def test_clean_logs_keeps_fresh_logs(tmp_path):
    assert run('generate', '--model', 'spiral', '--n', '3', '--clean-logs', out_dir=tmp_path) == EXIT_OK
    assert (tmp_path / 'logs' / 'spectral.log').exists()


@pytest.mark.slow
def test_fit_likelihood_on_klein_bottle(tmp_path):
    assert run('fit-likelihood', '--model', 'klein_bottle', out_dir=tmp_path) == EXIT_OK
    summary = pd.read_csv(tmp_path / 'test_loss.csv')
    assert summary['test_loss'].iloc[0] < 0
    assert summary['avg_likelihood'].iloc[0] > 1.0


@pytest.mark.slow
def test_spiral_posterior_concentrates_near_truth(tmp_path):
    assert run('fit-likelihood', '--model', 'spiral', out_dir=tmp_path) == EXIT_OK
    observations = tmp_path / 'obs.csv'
    assert run('generate', '--model', 'spiral', '--theta', '7', '--n', '25', '--seed', '5',
               '--output', str(observations), out_dir=tmp_path) == EXIT_OK

    post_dir = tmp_path / 'posterior'
    assert run('posterior', '--model-file', str(tmp_path / 'likelihood_model.npz'),
               '--observations', str(observations), out_dir=post_dir) == EXIT_OK
    posterior = pd.read_csv(post_dir / 'posterior.csv')
    thetas = posterior['theta_0'].to_numpy()
    # default grid is the simulator's prior box [0, 15]
    cell = 15.0 / len(thetas)
    assert thetas[0] == pytest.approx(cell / 2)
    assert thetas[-1] == pytest.approx(15.0 - cell / 2)
    density = posterior['density'].to_numpy()
    assert density.sum() * cell == pytest.approx(1.0, abs=1e-9)
    assert np.sum(thetas * density) * cell == pytest.approx(7.0, abs=1.0)
