#!/usr/bin/env python3

import pytest

from ltv_observer.config import (parse_config, dump_config, load_config, apply_overrides, get_param,
                                 build_system, builtin_scenario, DEFAULT_PLUGINS)
from ltv_observer.exceptions import ConfigError

MINIMAL = """
system:
    n: 2
    A0: [[0, 1], [-1, 0]]
    B: [0, 1]
    C: [1, 0]
    x0: [1, 0]
input: 'sin(t)'
gains:
    G: [0, 0]
    N: [0, 1]
    L: [1, 1]
    M: [[0, 1], [-1, 0]]
"""


def _errors(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.errors


def test_builtin_example_scenario(example_cfg):
    assert example_cfg.name == 'example'
    assert example_cfg.n == 2
    assert example_cfg.D == {1: {'column': 1, 'omega': 3.0, 'l': [3.0, 0.5]}}
    assert example_cfg.input == '-1'
    assert example_cfg.B == [['-1'], ['4']]
    assert get_param(example_cfg.params(), 'estimator/gamma1') == 2000.0
    assert get_param(example_cfg.params(), 'estimator/eps_div') == 1e-6
    assert example_cfg.plugins == DEFAULT_PLUGINS


def test_builtin_synthetic_scenario(synthetic_cfg):
    system = build_system(synthetic_cfg)
    assert system.n == 3
    assert system.D.active_rows() == [2]
    assert system.D.target(2) == 1


def test_minimal_scenario_gets_defaults():
    cfg = parse_config(MINIMAL, name='minimal')
    assert cfg.name == 'minimal'
    assert cfg.D == {}
    assert cfg.z0 is None
    assert cfg.dt == 0.001
    assert cfg.horizon == 60.0
    assert cfg.mode == 'replay'
    assert cfg.output['decimate'] == 1
    assert cfg.plugins == DEFAULT_PLUGINS


def test_empty_file_lists_every_missing_field():
    errors = _errors('')
    for path in ('system.n', 'system.A0', 'system.B', 'system.C', 'system.x0', 'input',
                 'gains.G', 'gains.N', 'gains.L', 'gains.M'):
        assert f'{path}: missing required field' in errors


def test_wrong_shape_names_field():
    errors = _errors(MINIMAL.replace('M: [[0, 1], [-1, 0]]', 'M: [[0], [1]]'))
    assert errors == ['gains.M: expected 2x2, got 2x1']


def test_every_problem_is_reported():
    text = MINIMAL.replace('C: [1, 0]', 'C: [1, 0, 0]') + """
simulation:
    dt: -0.1
    mode: fast
estimator:
    gamma1: 0
    kappa: 3
"""
    errors = _errors(text)
    assert 'system.C: expected 2x1, got 3x1' in errors
    assert 'simulation.dt: must be positive, got -0.1' in errors
    assert any(e.startswith('simulation.mode: expected one of replay, cascade') for e in errors)
    assert 'estimator.gamma1: must be positive, got 0.0' in errors
    assert 'estimator.kappa: unknown parameter' in errors


def test_yaml_syntax_error_has_line():
    errors = _errors('system:\n    n: 2\n    A0: [[0, 1]\n')
    assert len(errors) == 1
    assert errors[0].startswith('line ')


def test_expression_error_names_entry():
    errors = _errors(MINIMAL.replace("'sin(t)'", "'exp(t)'"))
    assert len(errors) == 1
    assert errors[0].startswith('input: ')
    assert 'exp' in errors[0]


def test_d_right_of_diagonal():
    text = MINIMAL.replace('    x0: [1, 0]', '    x0: [1, 0]\n    D:\n        1: {column: 2, omega: 1.0, l: [1, 0]}')
    assert _errors(text) == ['system.D.1.column: column 2 is right of the diagonal']


def test_d_needs_positive_frequency():
    text = MINIMAL.replace('    x0: [1, 0]', '    x0: [1, 0]\n    D:\n        2: {column: 1, omega: 0, l: [1, 0]}')
    assert _errors(text) == ['system.D.2.omega: must be positive, got 0.0']


@pytest.mark.parametrize('name', ['example', 'synthetic_n3'])
def test_dump_round_trip(name):
    cfg = load_config(builtin_scenario(name))
    assert parse_config(dump_config(cfg), name='other') == cfg


def test_get_param():
    params = {'a': {'b': {'c': 3}}}
    assert get_param(params, 'a/b/c') == 3
    assert get_param(params, '/a/b/c') == 3
    assert get_param(params, 'a/x', 'default') == 'default'
    assert get_param(params, 'a/b/c/d', None) is None


def test_overrides_win(example_cfg):
    cfg = apply_overrides(example_cfg, dt=0.01, horizon=5.0, out='elsewhere', decimate=10, mode='cascade')
    assert (cfg.dt, cfg.horizon, cfg.mode) == (0.01, 5.0, 'cascade')
    assert cfg.output['dir'] == 'elsewhere'
    assert cfg.output['decimate'] == 10
    # the loaded scenario is left untouched
    assert example_cfg.dt == 0.001
    assert apply_overrides(example_cfg) == example_cfg


def test_bad_overrides(example_cfg):
    with pytest.raises(ConfigError) as info:
        apply_overrides(example_cfg, dt=0.0, mode='fast')
    assert len(info.value.errors) == 2


def test_unknown_builtin():
    with pytest.raises(ConfigError):
        builtin_scenario('missing')


def test_plots_flag_must_be_boolean():
    text = MINIMAL + "output:\n    plots: 'False'\n"
    assert _errors(text) == ["output.plots: expected true or false, got 'False'"]
    assert parse_config(MINIMAL + 'output:\n    plots: false\n').output['plots'] is False


def test_unknown_keys_in_every_section():
    text = MINIMAL + """
simulation:
    horizn: 5.0
output:
    plot: false
verify:
    tol: 1.0e-8
"""
    assert _errors(text) == ['simulation.horizn: unknown parameter', 'output.plot: unknown parameter',
                             'verify.tol: unknown parameter']
