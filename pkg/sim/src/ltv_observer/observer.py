#!/usr/bin/env python3

"""
Derivative free state observer for the plant of model.py

    z' = M z + M G y + N u + L y - L C xhat
    xhat = z + G y

valid when B - N - GCB = 0, D - GCD = 0, A0 - GCA0 = M and x~' = (M - LC) x~ is
exponentially stable. The gains are verified here, never synthesized.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ltv_observer.exceptions import StructureError, DivergenceError
from ltv_observer.integrate import (rk4_step, zoh_inputs, time_grid, stage_times, reduce_linear_rk4,
                                    BlockCache)
from ltv_observer.model import TimeMatrix, Trajectory, PlantSimulator, record_plant_sample

log = logging.getLogger(__name__)


@dataclass
class ObserverGains:
    """constant G, N, L (n x 1), output row C and time varying M(t), Mc(t) = M(t) - L C is derived"""
    G: np.ndarray
    N: np.ndarray
    L: np.ndarray
    M: TimeMatrix
    C: np.ndarray

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float).reshape(-1)
        self.N = np.asarray(self.N, dtype=float).reshape(-1)
        self.L = np.asarray(self.L, dtype=float).reshape(-1)
        self.C = np.asarray(self.C, dtype=float).reshape(-1)

    @property
    def n(self):
        return self.M.rows

    def check_dimensions(self, n):
        problems = []
        for name in ('G', 'N', 'L'):
            size = getattr(self, name).size
            if size != n:
                problems.append(f'{name}: expected {n}x1, got {size}x1')
        if self.M.shape != (n, n):
            problems.append(f'M: expected {n}x{n}, got {self.M.rows}x{self.M.cols}')
        if self.C.size != n:
            problems.append(f'C: expected 1x{n}, got 1x{self.C.size}')
        if problems:
            raise StructureError('; '.join(problems))

    def mc(self, t, C=None):
        C = self.C if C is None else np.asarray(C, dtype=float).reshape(-1)
        return self.M.evaluate(t) - np.outer(self.L, C)


@dataclass
class ConditionReport:
    """sup norm (max abs entry) of each condition residual over a time grid"""
    r1: float
    r2: float
    r3: float
    grid: tuple

    @property
    def max_residual(self):
        return max(self.r1, self.r2, self.r3)

    def passed(self, tol):
        return self.max_residual <= tol

    def lines(self):
        return [f'r1 |B - N - GCB|    = {self.r1:.3e}',
                f'r2 |D - GCD|        = {self.r2:.3e}',
                f'r3 |A0 - GCA0 - M|  = {self.r3:.3e}',
                f'grid t in [{self.grid[0]:g}, {self.grid[1]:g}] step {self.grid[2]:g}']


def _grid(grid):
    if isinstance(grid, tuple) and len(grid) == 3:
        return time_grid(grid[0], grid[1], grid[2]), grid
    times = np.asarray(grid, dtype=float)
    step = float(times[1] - times[0]) if times.size > 1 else 0.0
    return times, (float(times[0]), float(times[-1]), step)


def verify_conditions(sys, gains, grid):
    """
    residuals of the three algebraic conditions on every grid point
    the D condition is linear in theta so it is checked once per active row with theta_i = 1
    """
    gains.check_dimensions(sys.n)
    problems = sys.D.violations()
    if problems:
        raise StructureError('D: ' + '; '.join(problems))
    times, spec = _grid(grid)
    GC = np.outer(gains.G, sys.C)
    # (len(times), n, 1) and (len(times), n, n)
    B = sys.B.sample(times)
    A0 = sys.A0.sample(times)
    M = gains.M.sample(times)
    r1 = np.abs(B[:, :, 0] - gains.N - np.einsum('ij,kj->ki', GC, B[:, :, 0])).max(initial=0.0)
    r2 = 0.0
    for row in sys.D.active_rows():
        unit = sys.D.unit(row)
        r2 = max(r2, float(np.abs(unit - GC @ unit).max()))
    r3 = np.abs(A0 - np.einsum('ij,kjl->kil', GC, A0) - M).max(initial=0.0)
    report = ConditionReport(float(r1), float(r2), float(r3), spec)
    log.debug('condition residuals: %s', ', '.join(report.lines()))
    return report


@dataclass
class DecayReport:
    """norm samples of x~' = Mc(t) x~ and the exponential rate fitted on the tail half"""
    times: np.ndarray
    norms: np.ndarray
    rate: float
    unstable: bool

    @property
    def ratio(self):
        return float(self.norms[-1] / self.norms[0])

    @property
    def decaying(self):
        return (not self.unstable) and self.rate < 0.0 and self.ratio < 1.0


def check_error_stability(gains, C, xerr0, t_span, dt, blowup=1e12):
    """integrate the error dynamics with RK4 and fit log|x~| = a + rate t on the tail half"""
    xerr = np.asarray(xerr0, dtype=float).reshape(-1)
    gains.check_dimensions(xerr.size)
    times = time_grid(t_span[0], t_span[1], dt)
    norms = np.empty(times.size)
    norms[0] = np.linalg.norm(xerr)
    unstable = False
    fun = lambda t, x: gains.mc(t, C) @ x
    last = times.size
    for k in range(1, times.size):
        xerr = rk4_step(fun, times[k - 1], xerr, dt)
        norms[k] = np.linalg.norm(xerr)
        if not np.isfinite(norms[k]) or norms[k] > blowup * norms[0]:
            unstable = True
            last = k + 1
            break
    times, norms = times[:last], norms[:last]
    tail = slice(times.size // 2, times.size)
    logs = np.log(np.maximum(norms[tail], np.finfo(float).tiny))
    if unstable or times[tail].size < 2:
        rate = float('inf') if unstable else float('nan')
    else:
        rate = float(np.polyfit(times[tail], logs, 1)[0])
    if unstable:
        log.warning('error dynamics blow up at t=%g', times[-1])
    return DecayReport(times, norms, rate, unstable)


@dataclass(frozen=True)
class ObserverState:
    """internal z, estimate xhat = z + G y and yhat = C xhat"""
    z: np.ndarray
    xhat: np.ndarray
    yhat: float


def initial_state(gains, y0, z0=None):
    """xhat(0) = z(0) + G y(0), z(0) = 0 unless given"""
    z = np.zeros(gains.n) if z0 is None else np.asarray(z0, dtype=float).reshape(-1)
    xhat = z + gains.G * y0
    return ObserverState(z, xhat, float(gains.C @ xhat))


def observer_step(state, gains, y, u, t, dt, y_next=None):
    """
    one RK4 step of z
    y, u - scalars (held over the step) or 4-tuples with the value at each RK4 stage
    y_next - output at t + dt for xhat = z + G y, defaults to the last stage value
    """
    y_stages = tuple(y) if np.ndim(y) else zoh_inputs(float(y))
    u_stages = tuple(u) if np.ndim(u) else zoh_inputs(float(u))
    G, N, L, C = gains.G, gains.N, gains.L, gains.C

    def zdot(tk, z, inp):
        yk, uk = inp
        M = gains.M.evaluate(tk)
        xhat = z + G * yk
        return M @ xhat + N * uk + L * (yk - C @ xhat)

    z = rk4_step(zdot, t, state.z, dt, inputs=tuple(zip(y_stages, u_stages)))
    if not np.all(np.isfinite(z)):
        raise DivergenceError('observer state z', t + dt)
    xhat = z + G * (y_stages[3] if y_next is None else float(y_next))
    return ObserverState(z, xhat, float(C @ xhat))


class ObserverStepper:
    """
    observer_step on the fixed grid t0 + k dt

    z' = Mc(t) z + (Mc(t) G + L) y + N u is linear in z and in the stage values of y and u,
    so the RK4 step is reduced to matrices for a block of steps at once
    """
    def __init__(self, gains, t0, dt, block=1024):
        self.gains = gains
        self.t0 = float(t0)
        self.dt = float(dt)
        self._steps = BlockCache(self._reduce, block)

    def _reduce(self, k0, count):
        g, n = self.gains, self.gains.n
        times = stage_times(self.t0, self.dt, k0, count).ravel()
        Mc = (g.M.sample(times) - np.outer(g.L, g.C)).reshape(count, 4, n, n)
        Phi, _, _, R = reduce_linear_rk4(Mc, self.dt)
        Ry = np.einsum('kmab,kmb->kma', R, Mc @ g.G + g.L)
        Ru = R @ g.N
        return Phi, Ry, Ru

    def step(self, state, k, y, u, y_next=None):
        """
        advance from sample k to k + 1, same arguments as observer_step
        y, u - scalars (held over the step) or the 4 stage values
        """
        (Phi, Ry, Ru), i = self._steps(k)
        y_stages = np.broadcast_to(np.asarray(y, dtype=float), (4,))
        u_stages = np.broadcast_to(np.asarray(u, dtype=float), (4,))
        z = Phi[i] @ state.z + y_stages @ Ry[i] + u_stages @ Ru[i]
        if not np.all(np.isfinite(z)):
            raise DivergenceError('observer state z', self.t0 + (k + 1) * self.dt)
        xhat = z + self.gains.G * (y_stages[3] if y_next is None else float(y_next))
        return ObserverState(z, xhat, float(self.gains.C @ xhat))


def record_observer_sample(traj, k, state, x):
    """write xhat, z, x~ and |x~| of sample k"""
    xerr = x - state.xhat
    for j in range(xerr.size):
        traj.alloc(f'xhat{j + 1}')[k] = state.xhat[j]
        traj.alloc(f'z{j + 1}')[k] = state.z[j]
        traj.alloc(f'xerr{j + 1}')[k] = xerr[j]
    traj.alloc('xerr_norm')[k] = np.sqrt(xerr @ xerr)
    traj.alloc('yhat')[k] = state.yhat


def run_observer(sys, gains, u, t_span, dt, x0, z0=None, noise=0.0, seed=0):
    """
    co-simulate plant and observer on one clock
    the observer consumes the plant output at the plant's own RK4 stage points, so
    x~ follows the RK4 solution of x~' = Mc x~ up to round off
    """
    gains.check_dimensions(sys.n)
    times = time_grid(t_span[0], t_span[1], dt)
    plant = PlantSimulator(sys, u, x0, dt, t0=t_span[0], noise=noise, seed=seed)
    stepper = ObserverStepper(gains, t_span[0], dt)
    traj = Trajectory(dt, t0=t_span[0], length=times.size)
    state = initial_state(gains, plant.output(), z0)
    for k in range(times.size):
        if k > 0:
            plant.step()
            state = stepper.step(state, k - 1, plant.stage_outputs, plant.stage_inputs,
                                 y_next=plant.output())
        record_plant_sample(traj, k, plant)
        record_observer_sample(traj, k, state, plant.x)
    return traj
