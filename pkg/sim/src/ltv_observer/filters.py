#!/usr/bin/env python3

"""
Stable LTI operators in p used by the identification stage

Every operator gain * p^k / (p + lambda)^m is realized in controllable canonical form
(scipy.signal.tf2ss) and advanced by the same RK4 scheme as the plant. For a fixed dt the
RK4 step of an LTI system is linear, so it is reduced once to x+ = Ad x + B0 u + B1 u_next
(first order hold between samples, zero order hold when u_next = u).
"""

import logging

import numpy as np
import scipy.signal

from ltv_observer.exceptions import ImproperFilterError, DivergenceError, SingularityError
from ltv_observer.integrate import rk4_step, foh_inputs

log = logging.getLogger(__name__)


def lambda_polynomial(lam, m):
    """coefficients of (p + lambda)^m, highest power first"""
    return np.poly(-lam * np.ones(m))


class SisoFilter:
    """proper rational operator num(p)/den(p) with its own internal state"""
    def __init__(self, num, den, name='filter'):
        num = np.trim_zeros(np.atleast_1d(np.asarray(num, dtype=float)), 'f')
        den = np.atleast_1d(np.asarray(den, dtype=float))
        if num.size == 0:
            num = np.zeros(1)
        if num.size > den.size:
            raise ImproperFilterError(f'{name}: numerator degree {num.size - 1} exceeds '
                                      f'denominator degree {den.size - 1}')
        if den[0] == 0.0:
            raise ImproperFilterError(f'{name}: leading denominator coefficient is zero')
        num, den = num / den[0], den / den[0]
        if den.size > 1 and not np.all(np.roots(den).real < 0.0):
            raise ValueError(f'{name}: denominator is not Hurwitz')
        self.name = name
        self.num, self.den = num, den
        A, B, C, D = scipy.signal.tf2ss(num, den)
        self.A = np.atleast_2d(A)
        self.b = np.asarray(B, dtype=float).reshape(-1)
        self.c = np.asarray(C, dtype=float).reshape(-1)
        self.d = float(np.asarray(D).reshape(-1)[0]) if np.size(D) else 0.0
        self.order = den.size - 1
        self._discrete = {}
        self.reset()

    def reset(self):
        """zero state, forget the last input"""
        self.state = np.zeros(self.order)
        self.last_input = None

    @property
    def dc_gain(self):
        return float(self.num[-1] / self.den[-1]) if self.num.size else 0.0

    def _matrices(self, dt):
        """RK4 step reduced to (Ad, B0, B1) by stepping the basis vectors"""
        if dt not in self._discrete:
            f = lambda t, x, u: self.A @ x + self.b * u
            zero = np.zeros(self.order)
            Ad = np.column_stack([rk4_step(f, 0.0, e, dt, inputs=(0.0,) * 4)
                                  for e in np.eye(self.order)]) if self.order else np.zeros((0, 0))
            B0 = rk4_step(f, 0.0, zero, dt, inputs=foh_inputs(1.0, 0.0))
            B1 = rk4_step(f, 0.0, zero, dt, inputs=foh_inputs(0.0, 1.0))
            self._discrete[dt] = (Ad, B0, B1)
        return self._discrete[dt]

    def output(self, u):
        return float(self.c @ self.state) + self.d * u

    def _advance(self, u, u_next, dt):
        Ad, B0, B1 = self._matrices(dt)
        state = Ad @ self.state + B0 * u + B1 * u_next
        if not np.all(np.isfinite(state)):
            raise DivergenceError(f'{self.name} state', float('nan'))
        self.state = state

    def step(self, u, dt, u_next=None):
        """one step holding u (or ramping to u_next), returns the output at the end of the step"""
        u_next = u if u_next is None else u_next
        self._advance(u, u_next, dt)
        self.last_input = u_next
        return self.output(u_next)

    def feed(self, u, dt):
        """
        sample driven use: advance from the previous sample to this one with first order hold
        and return the output at this sample, the first sample only sets the output d*u
        """
        if self.last_input is not None:
            self._advance(self.last_input, u, dt)
        self.last_input = u
        return self.output(u)

    def filter(self, series, dt):
        """filter a whole series from zero state"""
        self.reset()
        return np.array([self.feed(float(u), dt) for u in series])


class FilterBank:
    """
    several SisoFilters fed on the same clock, advanced with one block diagonal update
    inputs[j] - position in the input vector read by filters[j]
    """
    def __init__(self, filters, inputs, dt, name='bank'):
        if len(filters) != len(inputs):
            raise ValueError(f'{name}: {len(filters)} filters but {len(inputs)} inputs')
        self.name = name
        self.filters = list(filters)
        size = sum(f.order for f in self.filters)
        width = max(inputs) + 1
        self.Ad = np.zeros((size, size))
        self.B0 = np.zeros((size, width))
        self.B1 = np.zeros((size, width))
        self.C = np.zeros((len(self.filters), size))
        self.D = np.zeros((len(self.filters), width))
        start = 0
        for j, (f, col) in enumerate(zip(self.filters, inputs)):
            Ad, B0, B1 = f._matrices(dt)
            block = slice(start, start + f.order)
            self.Ad[block, block] = Ad
            self.B0[block, col] = B0
            self.B1[block, col] = B1
            self.C[j, block] = f.c
            self.D[j, col] = f.d
            start += f.order
        self.reset()

    def reset(self):
        self.state = np.zeros(self.Ad.shape[0])
        self.last_input = None

    def feed(self, u):
        """same as SisoFilter.feed for every filter of the bank, returns the outputs in filter order"""
        u = np.asarray(u, dtype=float)
        if self.last_input is not None:
            self.state = self.Ad @ self.state + self.B0 @ self.last_input + self.B1 @ u
        self.last_input = u
        out = self.C @ self.state + self.D @ u
        if not np.all(np.isfinite(out)):
            raise DivergenceError(f'{self.name} state', float('nan'))
        return out


def make_lambda_filter(k, lam, m=3, gain=1.0):
    """gain * p^k / (p + lambda)^m"""
    if k > m:
        raise ImproperFilterError(f'p^{k}/(p+lambda)^{m} is not proper')
    if not lam > 0.0:
        raise ValueError(f'lambda must be positive, got {lam!r}')
    num = np.zeros(k + 1)
    num[0] = gain
    return SisoFilter(num, lambda_polynomial(lam, m), name=f'{gain:g}p^{k}/(p+{lam:g})^{m}')


def filter_step(f, u, dt):
    """advance f by one zero order hold step and return its output"""
    return f.step(u, dt)


class SwappingFilter:
    """
    filtered ratio lambda/(p+lambda)[x_i' / x_s] without differentiating x_i:

        (1/x_s) * lambda p/(p+lambda)[x_i] + lambda/(p+lambda)[(x_s'/x_s^2) * p/(p+lambda)[x_i]]

    x_s' must be supplied by the caller
    """
    def __init__(self, lam, eps_div=1e-6):
        self.eps_div = eps_div
        self.derivative = make_lambda_filter(1, lam, 1, gain=lam)
        self.washout = make_lambda_filter(1, lam, 1, gain=1.0)
        self.correction = make_lambda_filter(0, lam, 1, gain=lam)
        self._held = None

    def feed(self, x_i, x_s, xdot_s, dt):
        """returns the regressor at this sample, samples with |x_s| <= eps_div reuse the last valid x_s"""
        gated = abs(x_s) <= self.eps_div
        if gated:
            if self._held is None:
                x_s, xdot_s = self.eps_div, 0.0
            else:
                x_s, xdot_s = self._held
        else:
            self._held = (x_s, xdot_s)
        v = self.derivative.feed(x_i, dt)
        w = self.washout.feed(x_i, dt)
        return v / x_s + self.correction.feed(xdot_s / x_s ** 2 * w, dt), gated


def swapping_regressor(x_i, x_s, xdot_s, lam, dt, eps_div=1e-6, t0=0.0):
    """right hand side of the swapping identity for whole series"""
    x_s = np.asarray(x_s, dtype=float)
    bad = np.flatnonzero(np.abs(x_s) <= eps_div)
    if bad.size:
        raise SingularityError('x_s', t0 + bad[0] * dt)
    swap = SwappingFilter(lam, eps_div)
    return np.array([swap.feed(a, b, c, dt)[0] for a, b, c in zip(x_i, x_s, xdot_s)])
