#!/usr/bin/env python3

"""
Plant definition: x' = (A0(t) + D(theta(t))) x + B(t) u, y = C x

Known matrices are given as expressions in t (TimeMatrix), the unknown part D has at most
one nonzero entry per row (never right of the diagonal) and every nonzero entry is a
sinusoid l1 sin(w t) + l2 cos(w t) generated in closed form for the ground truth.
"""

import re
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from ltv_observer.exceptions import (ExpressionError, EvaluationError, StructureError,
                                     DivergenceError)
from ltv_observer.integrate import time_grid, stage_times, reduce_linear_rk4, BlockCache

log = logging.getLogger(__name__)

T = sp.Symbol('t', real=True)

# names a matrix entry may use, anything else is rejected before sympy sees the text
_NAMES = {'t': T, 'sin': sp.sin, 'cos': sp.cos, 'pi': sp.pi}
_TOKEN = re.compile(r'[A-Za-z_][A-Za-z_0-9]*')
_CHARS = re.compile(r'^[0-9A-Za-z_.+\-*/() \t]*$')


def _check_node(node, text):
    if node.is_number or node == T:
        return
    if node.func in (sp.Add, sp.Mul):
        for arg in node.args:
            _check_node(arg, text)
        return
    if node.func in (sp.sin, sp.cos):
        arg = node.args[0]
        # only affine arguments a*t + b
        if not arg.is_polynomial(T) or sp.degree(arg, T) > 1:
            raise ExpressionError(f'{text!r}: argument of {node.func} must be affine in t')
        _check_node(arg, text)
        return
    if isinstance(node, sp.Pow) and node.exp.is_Integer and node.exp > 0:
        _check_node(node.base, text)
        return
    raise ExpressionError(f'{text!r}: unsupported term {node}')


def parse_expression(text):
    """parse one matrix entry, constants, t, sin, cos, +, -, * (and division by constants)"""
    text = str(text).strip()
    if not text:
        raise ExpressionError('empty expression')
    if not _CHARS.match(text) or '**' in text:
        raise ExpressionError(f'{text!r}: unsupported characters')
    for name in _TOKEN.findall(text):
        if name not in _NAMES and not re.fullmatch(r'[eE]', name):
            raise ExpressionError(f'{text!r}: unknown name {name!r}')
    try:
        expr = parse_expr(text, local_dict=dict(_NAMES), transformations=standard_transformations)
    except Exception as e:
        raise ExpressionError(f'{text!r}: {e}')
    expr = sp.sympify(expr)
    _check_node(expr, text)
    return expr


def _constant_value(expr):
    """float value of a constant entry, nan when it is not a finite real (e.g. 1/0)"""
    try:
        value = complex(expr)
    except (TypeError, ValueError):
        return float('nan')
    return value.real if value.imag == 0.0 and np.isfinite(value.real) else float('nan')


def entry_text(entry):
    if isinstance(entry, bool):
        raise ExpressionError(f'{entry!r}: not an expression')
    if isinstance(entry, (int, float, np.integer, np.floating)):
        return repr(float(entry)) if isinstance(entry, (float, np.floating)) else str(int(entry))
    return str(entry).strip()


class TimeMatrix:
    """matrix valued function of time, each entry is an expression in t"""
    def __init__(self, entries, name='matrix'):
        rows = [list(row) for row in entries]
        if not rows or not rows[0] or any(len(row) != len(rows[0]) for row in rows):
            raise StructureError(f'{name}: entries must form a non empty rectangular grid')
        self.name = name
        self.source = tuple(tuple(entry_text(e) for e in row) for row in rows)
        self.exprs = [[parse_expression(s) for s in row] for row in self.source]
        self.rows, self.cols = len(rows), len(rows[0])
        self._constant = all(e.is_number for row in self.exprs for e in row)
        if self._constant:
            self._value = np.array([[_constant_value(e) for e in row] for row in self.exprs])
        else:
            self._func = sp.lambdify(T, sp.Matrix(self.exprs), modules='numpy')
            self._entry_funcs = [[sp.lambdify(T, e, modules='numpy') for e in row] for row in self.exprs]

    @classmethod
    def from_array(cls, array, name='matrix'):
        array = np.atleast_2d(np.asarray(array, dtype=float))
        return cls([[repr(float(v)) for v in row] for row in array], name=name)

    @classmethod
    def zeros(cls, rows, cols, name='matrix'):
        return cls([['0'] * cols for _ in range(rows)], name=name)

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def is_constant(self):
        return self._constant

    def _check_finite(self, value, t):
        if not np.all(np.isfinite(value)):
            r, c = np.argwhere(~np.isfinite(value))[0]
            raise EvaluationError(self.name, int(r), int(c), t)

    def evaluate(self, t):
        """dense real matrix at time t"""
        if not np.isfinite(t):
            raise EvaluationError(self.name, 0, 0, t)
        if self._constant:
            self._check_finite(self._value, t)
            return self._value.copy()
        value = np.array(self._func(float(t)), dtype=float)
        self._check_finite(value, t)
        return value

    def sample(self, times):
        """evaluate on a whole time grid, returns an array of shape (len(times), rows, cols)"""
        times = np.asarray(times, dtype=float)
        out = np.empty((times.size, self.rows, self.cols))
        if self._constant:
            out[:] = self._value
        else:
            for r in range(self.rows):
                for c in range(self.cols):
                    out[:, r, c] = np.broadcast_to(self._entry_funcs[r][c](times), times.shape)
        if not np.all(np.isfinite(out)):
            k, r, c = np.argwhere(~np.isfinite(out))[0]
            raise EvaluationError(self.name, int(r), int(c), float(times[k]))
        return out

    def __eq__(self, other):
        return isinstance(other, TimeMatrix) and self.source == other.source

    def __repr__(self):
        return f'TimeMatrix({self.name}, {[list(row) for row in self.source]})'


def eval_time_matrix(m, t):
    """evaluate every entry of m at time t"""
    return m.evaluate(t)


@dataclass(frozen=True)
class DStructure:
    """
    position of the unknown entries of D(theta)
    targets - per row (row 1 first) either None or the 1-based column s(i) of the nonzero entry
    """
    n: int
    targets: tuple

    def violations(self):
        problems = []
        if len(self.targets) != self.n:
            problems.append(f'expected {self.n} rows, got {len(self.targets)}')
        for i, s in enumerate(self.targets, start=1):
            if s is None:
                continue
            if not isinstance(s, (int, np.integer)) or s < 1:
                problems.append(f'row {i}: column index must be a positive integer, got {s!r}')
            elif s > i:
                problems.append(f'row {i}: column {s} is right of the diagonal')
        return problems

    @property
    def is_valid(self):
        return not self.violations()

    def active_rows(self):
        """1-based rows holding an unknown parameter, in increasing order"""
        return [i for i, s in enumerate(self.targets, start=1) if s is not None]

    def target(self, row):
        return self.targets[row - 1]

    def unit(self, row):
        """D with theta_row = 1 and every other parameter 0"""
        d = np.zeros((self.n, self.n))
        d[row - 1, self.target(row) - 1] = 1.0
        return d

    def assemble(self, thetas):
        """D(theta) from a mapping row -> theta value"""
        d = np.zeros((self.n, self.n))
        for row, value in thetas.items():
            d[row - 1, self.target(row) - 1] = value
        return d


@dataclass(frozen=True)
class ThetaGenerator:
    """theta(t) = l1 sin(omega t) + l2 cos(omega t), solution of theta'' = -omega^2 theta"""
    omega: float
    l: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.omega > 0.0:
            raise ValueError(f'omega must be positive, got {self.omega!r}')
        if len(self.l) != 2:
            raise ValueError('l must hold exactly two amplitudes')

    def value(self, t):
        return self.l[0] * np.sin(self.omega * t) + self.l[1] * np.cos(self.omega * t)


def theta_value(g, t):
    """closed form value of the generated parameter"""
    return g.value(t)


@dataclass
class LtvSystem:
    """plant with known A0(t), B(t), C and the unknown sinusoidal part D(theta(t))"""
    A0: TimeMatrix
    B: TimeMatrix
    C: np.ndarray
    D: DStructure
    theta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float).reshape(-1)
        n = self.A0.rows
        if self.A0.shape != (n, n):
            raise StructureError(f'A0: expected square matrix, got {self.A0.rows}x{self.A0.cols}')
        if self.B.shape != (n, 1):
            raise StructureError(f'B: expected {n}x1, got {self.B.rows}x{self.B.cols}')
        if self.C.size != n:
            raise StructureError(f'C: expected 1x{n}, got 1x{self.C.size}')
        if self.D.n != n:
            raise StructureError(f'D: expected {n} rows, got {self.D.n}')
        if sorted(self.theta) != self.D.active_rows():
            raise StructureError(f'theta generators {sorted(self.theta)} do not match '
                                 f'the active rows of D {self.D.active_rows()}')

    @property
    def n(self):
        return self.A0.rows

    def thetas(self, t):
        return {row: g.value(t) for row, g in self.theta.items()}

    def A(self, t):
        """assembled state matrix A0(t) + D(theta(t))"""
        return self.A0.evaluate(t) + self.D.assemble(self.thetas(t))

    def sample_A(self, times):
        """A(t) on a whole time grid, shape (len(times), n, n)"""
        times = np.asarray(times, dtype=float)
        A = self.A0.sample(times)
        for row, g in self.theta.items():
            A[:, row - 1, self.D.target(row) - 1] += g.value(times)
        return A


class Trajectory:
    """named scalar series sampled at t0 + k*dt"""
    def __init__(self, dt, t0=0.0, length=0):
        self.dt = float(dt)
        self.t0 = float(t0)
        self.length = int(length)
        self.columns = OrderedDict()

    @property
    def times(self):
        return self.t0 + np.arange(self.length) * self.dt

    def add(self, name, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (self.length,):
            raise StructureError(f'column {name}: expected {self.length} samples, got {values.shape}')
        self.columns[name] = values

    def alloc(self, name):
        """zero column to be filled sample by sample"""
        if name not in self.columns:
            self.columns[name] = np.zeros(self.length)
        return self.columns[name]

    def names(self):
        return ['t'] + list(self.columns)

    def __getitem__(self, name):
        if name == 't':
            return self.times
        return self.columns[name]

    def __contains__(self, name):
        return name == 't' or name in self.columns

    def __len__(self):
        return self.length

    def to_frame(self, names=None):
        names = names or self.names()
        return pd.DataFrame(OrderedDict((name, self[name]) for name in names))


def as_sampler(u):
    """vectorized input u(times) from a callable, a number, an expression text or a 1x1 TimeMatrix"""
    if isinstance(u, TimeMatrix):
        if u.shape != (1, 1):
            raise StructureError(f'input: expected 1x1, got {u.rows}x{u.cols}')
        return lambda times: u.sample(times)[:, 0, 0]
    if callable(u):
        return lambda times: np.array([float(u(t)) for t in np.ravel(times)])
    return as_sampler(TimeMatrix([[u]], name='u'))


class PlantSimulator:
    """
    advances the plant one fixed RK4 step at a time
    the RK4 step of the linear plant is reduced to x+ = Phi x + gamma for a block of steps at
    once, the states visited by the 4 stages are kept as outputs so an observer can consume
    y at exactly the same points (see observer.ObserverStepper)
    """
    def __init__(self, system, u, x0, dt, t0=0.0, noise=0.0, seed=0, block=1024):
        self.system = system
        self.u = as_sampler(u)
        self.dt = float(dt)
        self.t0 = float(t0)
        self.k = 0
        self.x = np.asarray(x0, dtype=float).reshape(-1).copy()
        if self.x.size != system.n:
            raise StructureError(f'x0: expected {system.n} values, got {self.x.size}')
        # measurement noise, uniform in [-noise, noise], held over a step
        self.noise = float(noise)
        self.rng = np.random.default_rng(seed)
        self._noise_now = self._draw_noise()
        self._steps = BlockCache(self._reduce, block)
        self.stage_outputs = None
        self.stage_inputs = None

    @property
    def t(self):
        return self.t0 + self.k * self.dt

    def _draw_noise(self):
        if self.noise == 0.0:
            return 0.0
        return float(self.rng.uniform(-self.noise, self.noise))

    def _reduce(self, k0, count):
        times = stage_times(self.t0, self.dt, k0, count).ravel()
        n, C = self.system.n, self.system.C
        A = self.system.sample_A(times).reshape(count, 4, n, n)
        u = self.u(times).reshape(count, 4)
        w = self.system.B.sample(times)[:, :, 0].reshape(count, 4, n) * u[:, :, None]
        Phi, P, Q, R = reduce_linear_rk4(A, self.dt)
        gamma = np.einsum('kmab,kmb->ka', R, w)
        # y at the stage points, C P_j x + C q_j
        CP = np.einsum('a,kjab->kjb', C, P)
        Cq = np.einsum('a,kjmab,kmb->kj', C, Q, w)
        return Phi, gamma, CP, Cq, u

    def output(self):
        return float(self.system.C @ self.x) + self._noise_now

    def input(self):
        (_, _, _, _, u), i = self._steps(self.k)
        return float(u[i, 0])

    def step(self):
        (Phi, gamma, CP, Cq, u), i = self._steps(self.k)
        x_next = Phi[i] @ self.x + gamma[i]
        if not np.all(np.isfinite(x_next)):
            raise DivergenceError('plant state', self.t + self.dt)
        noise_next = self._draw_noise()
        # output at the 4 points the derivative was evaluated at, the last one is x + dt k3
        outputs = CP[i] @ self.x + Cq[i]
        outputs[:3] += self._noise_now
        outputs[3] += noise_next
        self.stage_outputs = outputs
        self.stage_inputs = u[i]
        self.x = x_next
        self._noise_now = noise_next
        self.k += 1


def record_plant_sample(traj, k, plant):
    """write x, y, u and the true parameters of sample k"""
    for j, xj in enumerate(plant.x, start=1):
        traj.alloc(f'x{j}')[k] = xj
    traj.alloc('y')[k] = plant.output()
    traj.alloc('u')[k] = plant.input()
    for row, g in plant.system.theta.items():
        traj.alloc(f'theta_true{row}')[k] = g.value(plant.t)


def simulate(sys, u, t_span, dt, x0, noise=0.0, seed=0):
    """fixed step RK4 trajectory of the plant, records x, y = C x, u and the true theta_i"""
    times = time_grid(t_span[0], t_span[1], dt)
    plant = PlantSimulator(sys, u, x0, dt, t0=t_span[0], noise=noise, seed=seed)
    traj = Trajectory(dt, t0=t_span[0], length=times.size)
    for k in range(times.size):
        if k > 0:
            plant.step()
        record_plant_sample(traj, k, plant)
    return traj


@dataclass
class AssumptionReport:
    """structure of D and the minimum of x_i^2 along a trajectory"""
    structure_problems: list
    min_square: dict
    first_violation: dict
    eps: float

    @property
    def structure_ok(self):
        return not self.structure_problems

    @property
    def passed(self):
        return self.structure_ok and all(t is None for t in self.first_violation.values())

    def lines(self):
        out = [f'D structure: {"ok" if self.structure_ok else "; ".join(self.structure_problems)}']
        for name, value in self.min_square.items():
            t = self.first_violation[name]
            status = 'ok' if t is None else f'violated first at t={t:.6g}'
            out.append(f'min {name}^2 = {value:.6g} (eps {self.eps:g}): {status}')
        return out


def check_assumptions(sys, traj, eps=1e-4, prefix='x'):
    """advisory check of the D structure and of x_i^2 > eps, never raises"""
    times = traj.times
    min_square, first_violation = OrderedDict(), OrderedDict()
    for j in range(1, sys.n + 1):
        name = f'{prefix}{j}'
        square = traj[name] ** 2
        min_square[name] = float(square.min()) if square.size else float('nan')
        bad = np.flatnonzero(~(square > eps))
        first_violation[name] = float(times[bad[0]]) if bad.size else None
    report = AssumptionReport(sys.D.violations(), min_square, first_violation, eps)
    if not report.passed:
        for line in report.lines():
            log.warning('assumption check: %s', line)
    return report
