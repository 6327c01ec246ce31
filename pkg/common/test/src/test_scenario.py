#!/usr/bin/env python3

import os
import time
import textwrap

import numpy as np
import pytest

from ltv_observer.cli import main, EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_RESIDUALS
from ltv_observer.config import load_config, builtin_scenario, apply_overrides
from ltv_observer.ident import theta_reconstruct
from ltv_observer.export import PLOT_FILES
from ltv_observer.ltv_observer import run_scenario, LtvObserverWrapper


def _scalar_scenario(a=-1.0, m=None, horizon=1.0, dt=0.01):
    """first order plant without unknown parameters, only the observer plugin does work"""
    m = a if m is None else m
    return textwrap.dedent(f"""
        system:
            n: 1
            A0: [[{a}]]
            B: [0]
            C: [1]
            x0: [1]
        input: '0'
        gains:
            G: [0]
            N: [0]
            L: [1]
            M: [[{m}]]
        simulation:
            dt: {dt}
            horizon: {horizon}
        output:
            plots: False
        """)


@pytest.fixture(scope='module')
def example_run(tmp_path_factory):
    out = tmp_path_factory.mktemp('example')
    cfg = apply_overrides(load_config(builtin_scenario('example')), out=str(out))
    start = time.perf_counter()
    report, artifacts = run_scenario(cfg)
    artifacts['elapsed'] = time.perf_counter() - start
    return cfg, report, artifacts


def _window(traj, start, end):
    t = traj['t']
    return (t >= start - 1e-9) & (t <= end + 1e-9)


@pytest.mark.slow
def test_example_state_error_converges(example_run):
    _, _, artifacts = example_run
    traj = artifacts['trajectory']
    norm = traj['xerr_norm']
    assert norm[_window(traj, 20.0, 20.0)][0] <= 0.01 * norm[0]
    assert norm[_window(traj, 40.0, 60.0)].max() < 1e-2
    np.testing.assert_allclose(traj['xhat1'], traj['z1'] + traj['y'], atol=1e-12)


@pytest.mark.slow
def test_example_frequency(example_run):
    cfg, _, artifacts = example_run
    traj = artifacts['trajectory']
    t1 = cfg.estimator['T1']
    tail = _window(traj, 0.75 * t1, t1)
    assert np.abs(traj['omega_hat1'][tail] - 3.0).max() < 0.05
    k_hat = traj['k_hat1'][_window(traj, t1, t1)][0]
    assert -9.3 <= k_hat <= -8.7


@pytest.mark.slow
def test_example_amplitudes(example_run):
    cfg, report, artifacts = example_run
    traj = artifacts['trajectory']
    t1, horizon = cfg.estimator['T1'], cfg.horizon
    tail = _window(traj, t1 + 0.75 * (horizon - t1), horizon)
    assert np.abs(traj['l1_hat1'][tail] - 3.0).max() < 0.05
    assert np.abs(traj['l2_hat1'][tail] - 0.5).max() < 0.05
    assert not report.row(1).delta_min < 0.0


@pytest.mark.slow
def test_example_theta_reconstruction(example_run):
    _, report, artifacts = example_run
    traj = artifacts['trajectory']
    tail = _window(traj, 48.0, 60.0)
    error = traj['theta_true1'][tail] - traj['theta_hat1'][tail]
    assert np.sqrt(np.mean(error ** 2)) < 0.15
    # the report is computed from the csv file, not from memory
    assert report.row(1).theta_rms == pytest.approx(np.sqrt(np.mean(error ** 2)), rel=1e-3, abs=1e-6)


@pytest.mark.slow
def test_example_run_time(example_run):
    # full 60 s horizon at dt = 1e-3, csv, report and plots included
    cfg, _, artifacts = example_run
    assert (cfg.horizon, cfg.dt) == (60.0, 0.001)
    assert artifacts['elapsed'] < 10.0


@pytest.mark.slow
def test_example_artifacts(example_run):
    _, report, artifacts = example_run
    assert os.path.isfile(artifacts['csv'])
    assert [os.path.basename(p) for p in artifacts['plots']] == list(PLOT_FILES)
    with open(artifacts['report']) as f:
        assert f.read() == report.text()
    assert report.conditions.max_residual < 1e-12


@pytest.mark.slow
def test_synthetic_third_order(synthetic_cfg, tmp_path):
    report, artifacts = run_scenario(apply_overrides(synthetic_cfg, out=str(tmp_path)))
    traj = artifacts['trajectory']
    t1 = synthetic_cfg.estimator['T1']
    assert abs(traj['omega_hat2'][_window(traj, t1, t1)][0] - 2.0) < 0.05
    np.testing.assert_allclose([traj['l1_hat2'][-1], traj['l2_hat2'][-1]], [1.0, -0.5], atol=0.1)
    assert report.conditions.max_residual < 1e-12


@pytest.mark.slow
def test_reproduction_is_deterministic(tmp_path):
    for name in ('a', 'b'):
        assert main(['reproduce-paper', '--out', str(tmp_path / name)]) == EXIT_OK
    for name in ('trajectory.csv', 'report.txt') + PLOT_FILES:
        with open(tmp_path / 'a' / name, 'rb') as fa, open(tmp_path / 'b' / name, 'rb') as fb:
            assert fa.read() == fb.read(), name


def test_zero_horizon_has_no_data(example_cfg, tmp_path):
    report, artifacts = run_scenario(apply_overrides(example_cfg, horizon=0.0, out=str(tmp_path)))
    assert report.no_data
    assert report.lines()[-1] == 'no data'
    assert 'plots' not in artifacts
    with open(artifacts['report']) as f:
        assert f.read().endswith('no data\n')


def test_plugins_run_in_dependency_order(example_cfg):
    sim = LtvObserverWrapper(apply_overrides(example_cfg, horizon=0.1))
    assert [type(p).__name__ for p in sim.plugins] == ['StateObserver', 'FrequencyIdentifier',
                                                       'AmplitudeIdentifier']


def test_short_cascade_run(example_cfg):
    cfg = apply_overrides(example_cfg, horizon=1.0, mode='cascade')
    report, artifacts = run_scenario(cfg, write=False)
    traj = artifacts['trajectory']
    assert report.samples == len(traj) == 1001
    for name in ('xhat1', 'h1', 'k_hat1', 'omega_hat1', 'l1_hat1', 'theta_hat1', 'delta1'):
        assert name in traj
        assert np.all(np.isfinite(traj[name]))
    # nothing adapts during the warmup
    np.testing.assert_array_equal(traj['k_hat1'], 0.0)


def test_theta_hat_follows_published_estimates(example_cfg):
    # a second of adaptation after the warmup
    cfg = apply_overrides(example_cfg, horizon=example_cfg.estimator['warmup'] + 1.0, mode='cascade')
    traj = run_scenario(cfg, write=False)[1]['trajectory']
    l_hat = np.column_stack([traj['l1_hat1'], traj['l2_hat1']])
    assert np.abs(l_hat[-1]).max() > 0.0
    expected = theta_reconstruct(traj['omega_hat1'], l_hat, traj['t']).theta_hat
    np.testing.assert_allclose(traj['theta_hat1'], expected, rtol=1e-12, atol=1e-12)


def test_noise_is_reproducible(example_cfg):
    cfg = apply_overrides(example_cfg, horizon=0.2, noise=0.01)
    first = run_scenario(cfg, write=False)[1]['trajectory']
    second = run_scenario(cfg, write=False)[1]['trajectory']
    np.testing.assert_array_equal(first['y'], second['y'])
    assert np.abs(first['y'] - first['x1'] - first['x2']).max() <= 0.01


def _write(folder, name, text):
    path = os.path.join(str(folder), name)
    with open(path, 'w') as f:
        f.write(text)
    return path


def test_cli_verify(tmp_path):
    assert main(['verify', builtin_scenario('example')]) == EXIT_OK
    bad = _write(tmp_path, 'bad.yaml', _scalar_scenario(a=-1.0, m=-2.0))
    assert main(['verify', bad]) == EXIT_RESIDUALS


def test_cli_config_errors(tmp_path):
    assert main(['run', str(tmp_path / 'missing.yaml')]) == EXIT_CONFIG
    broken = _write(tmp_path, 'broken.yaml', 'system: [1, 2\n')
    assert main(['run', broken]) == EXIT_CONFIG
    assert main(['run', builtin_scenario('example'), '--dt', '-1']) == EXIT_CONFIG


def test_cli_non_finite_entry_is_a_config_error(tmp_path):
    path = _write(tmp_path, 'singular.yaml', _scalar_scenario(a='1/0'))
    assert main(['run', path, '--out', str(tmp_path / 'out')]) == EXIT_CONFIG
    assert main(['verify', path]) == EXIT_CONFIG


def test_cli_divergence(tmp_path):
    path = _write(tmp_path, 'unstable.yaml', _scalar_scenario(a=1000.0, horizon=10.0, dt=0.1))
    assert main(['run', path, '--out', str(tmp_path / 'out')]) == EXIT_DIVERGENCE


def test_cli_run(tmp_path, capsys):
    path = _write(tmp_path, 'stable.yaml', _scalar_scenario())
    assert main(['run', path, '--out', str(tmp_path / 'out')]) == EXIT_OK
    assert 'samples: 101' in capsys.readouterr().out
    assert os.path.isfile(tmp_path / 'out' / 'trajectory.csv')


def test_cli_batch(tmp_path):
    folder = tmp_path / 'scenarios'
    folder.mkdir()
    _write(folder, 'one.yaml', _scalar_scenario(a=-1.0))
    _write(folder, 'two.yaml', _scalar_scenario(a=-2.0))
    out = tmp_path / 'out'
    assert main(['batch', str(folder), '--out', str(out)]) == EXIT_OK
    for name in ('one', 'two'):
        assert os.path.isfile(out / name / 'trajectory.csv')
    _write(folder, 'three.yaml', _scalar_scenario(a=1000.0, horizon=10.0, dt=0.1))
    assert main(['batch', str(folder), '--out', str(out)]) == EXIT_DIVERGENCE


def test_cli_batch_without_scenarios(tmp_path):
    assert main(['batch', str(tmp_path)]) == EXIT_CONFIG
