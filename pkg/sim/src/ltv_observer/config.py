#!/usr/bin/env python3

"""
Scenario files (yaml) and parameter lookup

A scenario holds the plant, the observer gains, the input, the clock, the estimator gains,
the output options and the plugins to load. parse_config reports every problem it finds,
each one prefixed with its field path (system.A0, gains.M, ...) or its yaml line.
"""

import os
import sys
import logging
from dataclasses import dataclass, field, replace

import yaml

from ltv_observer.exceptions import ConfigError, LtvObserverError
from ltv_observer.model import TimeMatrix, DStructure, ThetaGenerator, LtvSystem, entry_text
from ltv_observer.observer import ObserverGains

log = logging.getLogger(__name__)

DEFAULT_PLUGINS = {'ltv_observer.plugins.state_observer': 'StateObserver',
                   'ltv_observer.plugins.frequency_identifier': 'FrequencyIdentifier',
                   'ltv_observer.plugins.amplitude_identifier': 'AmplitudeIdentifier'}

DEFAULT_SIMULATION = {'dt': 0.001, 'horizon': 60.0, 'noise': 0.0, 'seed': 0, 'mode': 'replay'}

DEFAULT_ESTIMATOR = {'lambda': 10.0,     # omega regression filters (p+lambda)^3
                     'lambda1': 10.0,    # amplitude regression q, phi
                     'lambda2': 1.0,     # regressor extension (mixing) filters
                     'lambda_i': 10.0,   # swapping regression of rows with s(i) < i
                     'gamma1': 50.0,
                     'gamma2': 10.0,
                     'gamma_i': 50.0,
                     'eps_div': 1.0e-6,
                     'T1': 40.0,         # end of the omega stage
                     'warmup': 0.0,      # adaptation frozen before this time
                     'delta_min': 1.0e-9}

DEFAULT_OUTPUT = {'dir': 'results', 'decimate': 1, 'plots': True}

DEFAULT_VERIFY = {'t_final': 10.0, 'step': 0.01, 'tolerance': 1.0e-10, 'stability_horizon': 10.0}

MODES = ('replay', 'cascade')


@dataclass
class ScenarioConfig:
    n: int
    A0: list
    B: list
    C: list
    x0: list
    input: str
    G: list
    N: list
    L: list
    M: list
    # row -> {'column': s, 'omega': w, 'l': [l1, l2]}
    D: dict = field(default_factory=dict)
    z0: list = None
    name: str = 'scenario'
    simulation: dict = field(default_factory=lambda: dict(DEFAULT_SIMULATION))
    estimator: dict = field(default_factory=lambda: dict(DEFAULT_ESTIMATOR))
    output: dict = field(default_factory=lambda: dict(DEFAULT_OUTPUT))
    verify: dict = field(default_factory=lambda: dict(DEFAULT_VERIFY))
    plugins: dict = field(default_factory=lambda: dict(DEFAULT_PLUGINS))

    @property
    def dt(self):
        return self.simulation['dt']

    @property
    def horizon(self):
        return self.simulation['horizon']

    @property
    def mode(self):
        return self.simulation['mode']

    def params(self):
        """nested dictionary view used by get_param"""
        return {'simulation': self.simulation, 'estimator': self.estimator,
                'output': self.output, 'verify': self.verify}


def get_param(params, path, default=None):
    """slash separated lookup, e.g. get_param(params, 'estimator/gamma1', 50.0)"""
    node = params
    for key in path.strip('/').split('/'):
        if not isinstance(node, dict) or key not in node:
            return default
        node = node[key]
    return node


class _Collector:
    """accumulates problems instead of stopping at the first one"""
    def __init__(self):
        self.errors = []

    def add(self, path, message):
        self.errors.append(f'{path}: {message}')


def _shape_text(rows, cols):
    return f'{rows}x{cols}'


def _matrix(raw, path, rows, cols, out):
    """list of lists (or a flat list for a single column / row) of expression texts"""
    if raw is None:
        out.add(path, 'missing required field')
        return None
    if not isinstance(raw, list):
        raw = [[raw]]
    elif raw and not any(isinstance(r, list) for r in raw):
        raw = [[v] for v in raw] if cols == 1 else [raw]
    if not all(isinstance(r, list) for r in raw):
        out.add(path, 'mixed rows and scalars')
        return None
    got = (len(raw), len(raw[0]) if raw else 0)
    if any(len(r) != got[1] for r in raw):
        out.add(path, 'rows of different length')
        return None
    if rows is not None and got != (rows, cols):
        out.add(path, f'expected {_shape_text(rows, cols)}, got {_shape_text(*got)}')
        return None
    try:
        text = [[entry_text(v) for v in r] for r in raw]
        TimeMatrix(text, name=path)
    except LtvObserverError as e:
        out.add(path, str(e))
        return None
    return text


def _vector(raw, path, size, out):
    """n-vector of plain numbers"""
    if raw is None:
        out.add(path, 'missing required field')
        return None
    if isinstance(raw, list) and raw and all(isinstance(r, list) for r in raw):
        if all(len(r) == 1 for r in raw):
            raw = [r[0] for r in raw]
        elif len(raw) == 1:
            raw = raw[0]
    if not isinstance(raw, list):
        raw = [raw]
    try:
        values = [float(v) for v in raw]
    except (TypeError, ValueError):
        out.add(path, 'expected numbers')
        return None
    if size is not None and len(values) != size:
        out.add(path, f'expected {size}x1, got {len(values)}x1')
        return None
    return values


def _number(raw, path, out, positive=False, nonnegative=False, integer=False):
    try:
        if isinstance(raw, bool):
            raise ValueError
        value = int(raw) if integer else float(raw)
        if integer and float(raw) != value:
            raise ValueError
    except (TypeError, ValueError):
        out.add(path, f'expected a number, got {raw!r}')
        return None
    if positive and not value > 0:
        out.add(path, f'must be positive, got {value!r}')
        return None
    if nonnegative and not value >= 0:
        out.add(path, f'must not be negative, got {value!r}')
        return None
    return value


def _section(doc, key, out):
    value = doc.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        out.add(key, 'expected a mapping')
        return {}
    return value


def _reject_unknown(section, defaults, key, out):
    for name in sorted(set(section) - set(defaults)):
        out.add(f'{key}.{name}', 'unknown parameter')


def _unknowns(raw, n, out):
    """system.D: {row: {column, omega, l}}"""
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        out.add('system.D', 'expected a mapping row -> {column, omega, l}')
        return {}
    D = {}
    for key, entry in raw.items():
        path = f'system.D.{key}'
        row = _number(key, path, out, positive=True, integer=True)
        if row is None:
            continue
        if n is not None and row > n:
            out.add(path, f'row {row} outside 1..{n}')
            continue
        if not isinstance(entry, dict):
            out.add(path, 'expected {column, omega, l}')
            continue
        column = _number(entry.get('column'), f'{path}.column', out, positive=True, integer=True)
        if column is not None and column > row:
            out.add(f'{path}.column', f'column {column} is right of the diagonal')
            column = None
        omega = _number(entry.get('omega'), f'{path}.omega', out, positive=True)
        l = _vector(entry.get('l'), f'{path}.l', 2, out)
        if None not in (column, omega, l):
            D[row] = {'column': column, 'omega': omega, 'l': l}
    return dict(sorted(D.items()))


def _yaml_error(e):
    mark = getattr(e, 'problem_mark', None)
    problem = getattr(e, 'problem', None) or str(e)
    if mark is not None:
        return f'line {mark.line + 1}: {problem}'
    return f'line ?: {problem}'


def parse_config(text, name=None):
    """
    text of a scenario file -> ScenarioConfig
    raises ConfigError listing every problem
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError([_yaml_error(e)])
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(['line 1: a scenario must be a mapping of sections'])
    out = _Collector()
    system = _section(doc, 'system', out)
    gains = _section(doc, 'gains', out)
    if system.get('n') is None:
        out.add('system.n', 'missing required field')
        n = None
    else:
        n = _number(system['n'], 'system.n', out, positive=True, integer=True)
    cfg = dict(n=n)
    cfg['A0'] = _matrix(system.get('A0'), 'system.A0', n, n, out)
    cfg['B'] = _matrix(system.get('B'), 'system.B', n, 1, out)
    raw_c = system.get('C')
    if isinstance(raw_c, list) and raw_c and all(isinstance(r, list) for r in raw_c) and len(raw_c) == 1:
        raw_c = raw_c[0]
    cfg['C'] = _vector(raw_c, 'system.C', n, out)
    cfg['x0'] = _vector(system.get('x0'), 'system.x0', n, out)
    cfg['D'] = _unknowns(system.get('D'), n, out)
    raw_u = doc.get('input')
    if raw_u is None:
        out.add('input', 'missing required field')
        cfg['input'] = None
    else:
        u = _matrix(raw_u, 'input', 1, 1, out)
        cfg['input'] = u[0][0] if u else None
    for key in ('G', 'N', 'L'):
        cfg[key] = _vector(gains.get(key), f'gains.{key}', n, out)
    cfg['M'] = _matrix(gains.get('M'), 'gains.M', n, n, out)
    cfg['z0'] = _vector(gains.get('z0'), 'gains.z0', n, out) if gains.get('z0') is not None else None

    simulation = dict(DEFAULT_SIMULATION)
    simulation.update(_section(doc, 'simulation', out))
    simulation['dt'] = _number(simulation['dt'], 'simulation.dt', out, positive=True)
    simulation['horizon'] = _number(simulation['horizon'], 'simulation.horizon', out, nonnegative=True)
    simulation['noise'] = _number(simulation['noise'], 'simulation.noise', out, nonnegative=True)
    simulation['seed'] = _number(simulation['seed'], 'simulation.seed', out, integer=True)
    if simulation['mode'] not in MODES:
        out.add('simulation.mode', f'expected one of {", ".join(MODES)}, got {simulation["mode"]!r}')
    _reject_unknown(simulation, DEFAULT_SIMULATION, 'simulation', out)

    estimator = dict(DEFAULT_ESTIMATOR)
    estimator.update(_section(doc, 'estimator', out))
    for key in DEFAULT_ESTIMATOR:
        nonnegative = key in ('warmup', 'delta_min')
        estimator[key] = _number(estimator[key], f'estimator.{key}', out,
                                 positive=not nonnegative, nonnegative=nonnegative)
    _reject_unknown(estimator, DEFAULT_ESTIMATOR, 'estimator', out)

    output = dict(DEFAULT_OUTPUT)
    output.update(_section(doc, 'output', out))
    output['dir'] = str(output['dir'])
    output['decimate'] = _number(output['decimate'], 'output.decimate', out, positive=True, integer=True)
    if not isinstance(output['plots'], bool):
        out.add('output.plots', f'expected true or false, got {output["plots"]!r}')
    _reject_unknown(output, DEFAULT_OUTPUT, 'output', out)

    verify = dict(DEFAULT_VERIFY)
    verify.update(_section(doc, 'verify', out))
    for key in DEFAULT_VERIFY:
        verify[key] = _number(verify[key], f'verify.{key}', out, positive=True)
    _reject_unknown(verify, DEFAULT_VERIFY, 'verify', out)

    plugins = doc.get('plugins', DEFAULT_PLUGINS)
    if not isinstance(plugins, dict) or not all(isinstance(v, str) for v in plugins.values()):
        out.add('plugins', 'expected a mapping module -> class name')
        plugins = {}

    if out.errors:
        raise ConfigError(out.errors)
    return ScenarioConfig(name=str(doc.get('name', name or 'scenario')), simulation=simulation,
                          estimator=estimator, output=output, verify=verify, plugins=dict(plugins), **cfg)


def load_config(path):
    """read and parse a scenario file, the scenario name defaults to the file stem"""
    with open(path, 'r') as f:
        text = f.read()
    log.info('loading scenario: %s', path)
    return parse_config(text, name=os.path.splitext(os.path.basename(path))[0])


def dump_config(cfg):
    """scenario -> yaml text, parse_config(dump_config(cfg)) == cfg"""
    doc = {'name': cfg.name,
           'system': {'n': cfg.n, 'A0': [list(r) for r in cfg.A0], 'B': [list(r) for r in cfg.B],
                      'C': list(cfg.C), 'x0': list(cfg.x0),
                      'D': {row: {'column': e['column'], 'omega': e['omega'], 'l': list(e['l'])}
                            for row, e in cfg.D.items()}},
           'input': cfg.input,
           'gains': {'G': list(cfg.G), 'N': list(cfg.N), 'L': list(cfg.L), 'M': [list(r) for r in cfg.M]},
           'simulation': dict(cfg.simulation),
           'estimator': dict(cfg.estimator),
           'output': dict(cfg.output),
           'verify': dict(cfg.verify),
           'plugins': dict(cfg.plugins)}
    if cfg.z0 is not None:
        doc['gains']['z0'] = list(cfg.z0)
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def apply_overrides(cfg, dt=None, horizon=None, out=None, decimate=None, mode=None, noise=None):
    """command line flags win over the scenario file"""
    simulation, output = dict(cfg.simulation), dict(cfg.output)
    problems = []
    if dt is not None:
        if not dt > 0:
            problems.append(f'--dt: must be positive, got {dt!r}')
        simulation['dt'] = float(dt)
    if horizon is not None:
        if not horizon >= 0:
            problems.append(f'--horizon: must not be negative, got {horizon!r}')
        simulation['horizon'] = float(horizon)
    if noise is not None:
        if not noise >= 0:
            problems.append(f'--noise: must not be negative, got {noise!r}')
        simulation['noise'] = float(noise)
    if mode is not None:
        if mode not in MODES:
            problems.append(f'--mode: expected one of {", ".join(MODES)}, got {mode!r}')
        simulation['mode'] = mode
    if out is not None:
        output['dir'] = str(out)
    if decimate is not None:
        if not decimate >= 1:
            problems.append(f'--decimate: must be a positive integer, got {decimate!r}')
        output['decimate'] = int(decimate)
    if problems:
        raise ConfigError(problems)
    return replace(cfg, simulation=simulation, output=output)


def build_system(cfg):
    """LtvSystem with the ground truth generators of the scenario"""
    targets = tuple(cfg.D[row]['column'] if row in cfg.D else None for row in range(1, cfg.n + 1))
    theta = {row: ThetaGenerator(e['omega'], tuple(e['l'])) for row, e in cfg.D.items()}
    return LtvSystem(A0=TimeMatrix(cfg.A0, name='A0'), B=TimeMatrix(cfg.B, name='B'), C=cfg.C,
                     D=DStructure(cfg.n, targets), theta=theta)


def build_gains(cfg):
    return ObserverGains(G=cfg.G, N=cfg.N, L=cfg.L, M=TimeMatrix(cfg.M, name='M'), C=cfg.C)


def config_dirs():
    """source tree config folder first, then the installed data folder"""
    here = os.path.dirname(os.path.abspath(__file__))
    return [os.path.normpath(os.path.join(here, '..', '..', 'config')),
            os.path.join(sys.prefix, 'share', 'ltv_observer', 'config')]


def builtin_scenario(name):
    """path of a scenario shipped with the package, e.g. builtin_scenario('example')"""
    for folder in config_dirs():
        path = os.path.join(folder, f'{name}_scenario.yaml')
        if os.path.isfile(path):
            return path
    raise ConfigError([f'{name}: built-in scenario not found in {", ".join(config_dirs())}'])
