#!/usr/bin/env python3

"""
Identification of the sinusoidal parameters theta_i(t) = l1 sin(w t) + l2 cos(w t)

Every estimator is a stepwise state machine on the shared clock: feed one sample, get the
estimate valid at that sample, the internal state is then advanced to the next sample.
The *_pipeline functions drive the same estimators over recorded series.

    row with s(i) = i    xi = ln xhat_i^2, alpha = h_i/xhat_i, theta_i = xi'/2 - alpha
    row with s(i) < i    theta_i = xhat_i'/xhat_s - h_i/xhat_s (swapping identity, no derivative of xhat_i)

both lead to Y = k Phi with k = -w^2 (gradient law), then the amplitudes come from
q = phi^T l mixed into two scalar regressions Z_j = Delta l_j.
"""

import math
import logging
from dataclasses import dataclass, field

import numpy as np

from ltv_observer.exceptions import DivergenceError
from ltv_observer.filters import make_lambda_filter, FilterBank, SwappingFilter

log = logging.getLogger(__name__)


def known_drift(system, t, xhat, u, A0=None, B=None):
    """
    h_i = sum_j A0_ij(t) xhat_j + B_i(t) u for every row
    A0, B - values at t when they were already sampled, (n, n) and (n,)
    """
    A0 = system.A0.evaluate(t) if A0 is None else A0
    B = system.B.evaluate(t)[:, 0] if B is None else B
    return A0 @ np.asarray(xhat, dtype=float) + B * u


def multiplier_derivative(system, s, h, xhat, thetas_hat):
    """xhat_s' built from the known part and the estimate of theta_s when row s is active"""
    target = system.D.target(s)
    if target is None:
        return float(h[s - 1])
    return float(h[s - 1] + thetas_hat.get(s, 0.0) * xhat[target - 1])


def _phi_fraction(g):
    """(1 - exp(-g)) / g, 1 at g = 0"""
    if isinstance(g, float):
        return -math.expm1(-g) / g if g > 1e-12 else 1.0 - 0.5 * g
    g = np.asarray(g, dtype=float)
    big = g > 1e-12
    out = np.where(big, -np.expm1(-g) / np.where(big, g, 1.0), 1.0 - 0.5 * g)
    return out if out.ndim else float(out)


def gradient_step(k, phi, y, gamma, dt):
    """
    exact solution over dt of k' = -gamma phi (phi k - y) with phi and y held,
    never overshoots the fixed point y/phi whatever gamma phi^2 dt is
    """
    g = gamma * phi * phi * dt
    return k + gamma * dt * _phi_fraction(g) * phi * (y - phi * k)


def adjugate_2x2(m):
    """adj([[a, b], [c, d]]) = [[d, -b], [-c, a]]"""
    m = np.asarray(m, dtype=float)
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]])


def drem_gradient_step(l_hat, delta, z, gamma, dt):
    """every amplitude follows its own scalar flow l_j' = -gamma Delta (Delta l_j - Z_j)"""
    return gradient_step(np.asarray(l_hat, dtype=float), delta, np.asarray(z, dtype=float), gamma, dt)


class XiTransform:
    """stepwise V = xhat^2, xi = ln V, alpha = h / xhat, gated samples hold the last valid values"""
    def __init__(self, eps_div=1e-6):
        self.eps_div = eps_div
        self._held = (np.log(eps_div), 0.0)

    def feed(self, xhat, h):
        V = xhat * xhat
        if V > self.eps_div:
            self._held = (np.log(V), h / xhat)
            return V, self._held[0], self._held[1], False
        return V, self._held[0], self._held[1], True


@dataclass
class XiSignal:
    V: np.ndarray
    xi: np.ndarray
    alpha: np.ndarray
    gated: np.ndarray


def build_xi(xhat, h, eps_div=1e-6):
    """log squared transform of a whole series"""
    transform = XiTransform(eps_div)
    rows = [transform.feed(float(a), float(b)) for a, b in zip(xhat, h)]
    V, xi, alpha, gated = (np.array(c) for c in zip(*rows)) if rows else (np.zeros(0),) * 4
    gated = gated.astype(bool)
    if gated.any():
        log.warning('%d samples gated by the log guard (eps_div=%g)', int(gated.sum()), eps_div)
    return XiSignal(V, xi, alpha, gated)


class _FrequencyEstimator:
    """k_hat of the regression Y = k Phi, omega_hat = sqrt(|k_hat|)"""
    def __init__(self, gamma, dt, k0=0.0):
        self.gamma = gamma
        self.dt = dt
        self.k = float(k0)

    @property
    def omega(self):
        return float(np.sqrt(abs(self.k)))

    def _adapt(self, Y, Phi, adapt, t):
        k = self.k
        if adapt:
            self.k = float(gradient_step(k, Phi, Y, self.gamma, self.dt))
            if not np.isfinite(self.k):
                raise DivergenceError('k_hat', t)
        return k


class OmegaEstimator(_FrequencyEstimator):
    """
    Y = 1/2 lam p^3/(p+lam)^3 [xi] - lam p^2/(p+lam)^3 [alpha]
    Phi = 1/2 lam p/(p+lam)^3 [xi] - lam/(p+lam)^3 [alpha]
    """
    def __init__(self, lam, gamma, dt, k0=0.0):
        super().__init__(gamma, dt, k0)
        # xi_y, xi_phi read xi, alpha_y, alpha_phi read alpha
        self.bank = FilterBank([make_lambda_filter(3, lam, 3, gain=0.5 * lam),
                                make_lambda_filter(1, lam, 3, gain=0.5 * lam),
                                make_lambda_filter(2, lam, 3, gain=lam),
                                make_lambda_filter(0, lam, 3, gain=lam)],
                               inputs=(0, 0, 1, 1), dt=dt, name='omega regressor')

    def regressor(self, xi, alpha):
        xi_y, xi_phi, alpha_y, alpha_phi = self.bank.feed((xi, alpha)).tolist()
        return xi_y - alpha_y, xi_phi - alpha_phi

    def update(self, xi, alpha, adapt=True, t=None):
        """returns (k_hat at this sample, Y, Phi)"""
        Y, Phi = self.regressor(xi, alpha)
        return self._adapt(Y, Phi, adapt, t), Y, Phi


class SwappingOmegaEstimator(_FrequencyEstimator):
    """
    Y = lam^2 p^2/(p+lam)^2 [S] - lam^3 p^2/(p+lam)^3 [h_i/x_s]
    Phi = lam^2/(p+lam)^2 [S] - lam^3/(p+lam)^3 [h_i/x_s]
    with S = lam/(p+lam)[x_i'/x_s] from the swapping filter
    """
    def __init__(self, lam, gamma, dt, eps_div=1e-6, k0=0.0):
        super().__init__(gamma, dt, k0)
        self.eps_div = eps_div
        self.swap = SwappingFilter(lam, eps_div)
        self.swap_y = make_lambda_filter(2, lam, 2, gain=lam ** 2)
        self.swap_phi = make_lambda_filter(0, lam, 2, gain=lam ** 2)
        self.ratio_y = make_lambda_filter(2, lam, 3, gain=lam ** 3)
        self.ratio_phi = make_lambda_filter(0, lam, 3, gain=lam ** 3)
        self._held = None

    def regressor(self, x_i, x_s, xdot_s, h_i):
        gated = abs(x_s) <= self.eps_div
        if gated:
            x_s, xdot_s = self._held if self._held else (self.eps_div, 0.0)
        else:
            self._held = (x_s, xdot_s)
        S, _ = self.swap.feed(x_i, x_s, xdot_s, self.dt)
        ratio = h_i / x_s
        Y = self.swap_y.feed(S, self.dt) - self.ratio_y.feed(ratio, self.dt)
        Phi = self.swap_phi.feed(S, self.dt) - self.ratio_phi.feed(ratio, self.dt)
        return Y, Phi, gated

    def update(self, x_i, x_s, xdot_s, h_i, adapt=True, t=None):
        """returns (k_hat at this sample, Y, Phi, gated)"""
        Y, Phi, gated = self.regressor(x_i, x_s, xdot_s, h_i)
        return self._adapt(Y, Phi, adapt and not gated, t), Y, Phi, gated


class DremEstimator:
    """
    amplitudes of theta = l^T [sin(w t), cos(w t)] for the row x_i' = h_i + theta x_s
        q = lam1 p/(p+lam1)[x_i] - lam1/(p+lam1)[h_i]
        phi = lam1/(p+lam1)[x_s sin(w t), x_s cos(w t)]
        Y = lam2/(p+lam2)[phi q], Omega = lam2/(p+lam2)[phi phi^T]
        Z = adj(Omega) Y, Delta = det(Omega)
    """
    def __init__(self, lam1, lam2, gamma, dt, omega_hat=0.0, l0=(0.0, 0.0)):
        self.gamma = gamma
        self.dt = dt
        self.omega_hat = float(omega_hat)
        self.l = np.asarray(l0, dtype=float).copy()
        # x_i, h_i and the two entries of phi
        self.extension = FilterBank([make_lambda_filter(1, lam1, 1, gain=lam1)] +
                                    [make_lambda_filter(0, lam1, 1, gain=lam1) for _ in range(3)],
                                    inputs=(0, 1, 2, 3), dt=dt, name='drem q, phi')
        # Y and Omega, Omega is symmetric so only 11, 12, 22
        self.mixing = FilterBank([make_lambda_filter(0, lam2, 1, gain=lam2) for _ in range(5)],
                                 inputs=(0, 1, 2, 3, 4), dt=dt, name='drem Y, Omega')
        self.Y = np.zeros(2)
        self.Omega = np.zeros((2, 2))
        self.Z = np.zeros(2)
        self.delta = 0.0

    def update(self, t, x_i, h_i, x_s=None, adapt=True, omega=None):
        """returns (l_hat at this sample, Delta)"""
        dt = self.dt
        w = self.omega_hat if omega is None else omega
        x_s = x_i if x_s is None else x_s
        s, c = math.sin(w * t), math.cos(w * t)
        fx, fh, p1, p2 = self.extension.feed((x_i, h_i, x_s * s, x_s * c)).tolist()
        q = fx - fh
        y1, y2, o11, o12, o22 = self.mixing.feed((p1 * q, p2 * q, p1 * p1, p1 * p2, p2 * p2)).tolist()
        self.Y = np.array([y1, y2])
        self.Omega = np.array([[o11, o12], [o12, o22]])
        self.Z = adjugate_2x2(self.Omega) @ self.Y
        self.delta = o11 * o22 - o12 * o12
        l_hat = self.l.copy()
        if adapt:
            self.l = drem_gradient_step(self.l, self.delta, self.Z, self.gamma, dt)
            if not np.all(np.isfinite(self.l)):
                raise DivergenceError('l_hat', t)
        return l_hat, self.delta


@dataclass
class OmegaTrace:
    k_hat: np.ndarray
    Y: np.ndarray
    Phi: np.ndarray
    gated: np.ndarray

    @property
    def omega_hat(self):
        return np.sqrt(np.abs(self.k_hat))

    @property
    def final_omega(self):
        return float(self.omega_hat[-1]) if self.k_hat.size else float('nan')


@dataclass
class DremTrace:
    l_hat: np.ndarray
    delta: np.ndarray
    Z: np.ndarray
    delta_min_required: float = 1e-9
    poor_excitation: bool = field(init=False)

    def __post_init__(self):
        self.poor_excitation = not (np.abs(self.delta).max(initial=0.0) > self.delta_min_required)

    @property
    def delta_min(self):
        return float(np.abs(self.delta).min()) if self.delta.size else float('nan')

    @property
    def delta_median(self):
        return float(np.median(np.abs(self.delta))) if self.delta.size else float('nan')

    def summary(self):
        out = [f'|Delta| min {self.delta_min:.6g} median {self.delta_median:.6g}']
        if self.poor_excitation:
            out.append('warning: poor excitation, Delta stays near zero')
        return out


@dataclass
class ThetaEstimate:
    omega_hat: object
    l_hat: np.ndarray
    theta_hat: np.ndarray


@dataclass
class IdentState:
    """estimates of one row at the current sample, as written to the signal bus"""
    row: int
    k_hat: float = 0.0
    l_hat: np.ndarray = field(default_factory=lambda: np.zeros(2))
    delta: float = 0.0
    theta_hat: float = 0.0

    @property
    def omega_hat(self):
        return float(np.sqrt(abs(self.k_hat)))

    def record_frequency(self, traj, k):
        traj.alloc(f'k_hat{self.row}')[k] = self.k_hat
        traj.alloc(f'omega_hat{self.row}')[k] = self.omega_hat

    def record_amplitude(self, traj, k):
        traj.alloc(f'l1_hat{self.row}')[k] = self.l_hat[0]
        traj.alloc(f'l2_hat{self.row}')[k] = self.l_hat[1]
        traj.alloc(f'theta_hat{self.row}')[k] = self.theta_hat
        traj.alloc(f'delta{self.row}')[k] = self.delta


def adapt_mask(times, window=None):
    """True where adaptation runs, window = (start, end) in seconds, None means always"""
    times = np.asarray(times, dtype=float)
    if window is None:
        return np.ones(times.size, dtype=bool)
    start, end = window
    return (times >= start - 1e-12) & (times <= end + 1e-12)


def _times(n, dt, t0):
    return t0 + np.arange(n) * dt


def omega_pipeline(xi, lam, gamma1, dt, t0=0.0, adapt_window=None, k0=0.0):
    """frequency of a row with s(i) = i from its log squared transform"""
    n = xi.xi.size
    times = _times(n, dt, t0)
    adapt = adapt_mask(times, adapt_window) & ~xi.gated
    est = OmegaEstimator(lam, gamma1, dt, k0)
    k_hat, Y, Phi = np.zeros(n), np.zeros(n), np.zeros(n)
    for j in range(n):
        k_hat[j], Y[j], Phi[j] = est.update(xi.xi[j], xi.alpha[j], adapt[j], t=times[j])
    return OmegaTrace(k_hat, Y, Phi, xi.gated.copy())


def theta_i_pipeline(xhat_i, xhat_s, xdot_s, h_i, lam, gamma, dt, eps_div=1e-6, t0=0.0,
                     adapt_window=None, k0=0.0, diagonal=False):
    """
    frequency of a row with s(i) < i, the multiplier state xhat_s must stay away from zero
    diagonal - the row multiplies its own state, route to the log squared transform instead
    """
    if diagonal:
        return omega_pipeline(build_xi(xhat_i, h_i, eps_div), lam, gamma, dt, t0, adapt_window, k0)
    n = len(xhat_i)
    times = _times(n, dt, t0)
    adapt = adapt_mask(times, adapt_window)
    est = SwappingOmegaEstimator(lam, gamma, dt, eps_div, k0)
    k_hat, Y, Phi = np.zeros(n), np.zeros(n), np.zeros(n)
    gated = np.zeros(n, dtype=bool)
    for j in range(n):
        k_hat[j], Y[j], Phi[j], gated[j] = est.update(xhat_i[j], xhat_s[j], xdot_s[j], h_i[j],
                                                       adapt[j], t=times[j])
    if gated.any():
        log.warning('%d samples gated by the division guard (eps_div=%g)', int(gated.sum()), eps_div)
    return OmegaTrace(k_hat, Y, Phi, gated)


def drem_pipeline(xhat_i, h_i, omega_hat, lam1, lam2, gamma2, dt, t0=0.0, multiplier=None,
                  adapt_window=None, l0=(0.0, 0.0), delta_min=1e-9):
    """amplitudes of a row for a frozen omega_hat, multiplier defaults to xhat_i itself"""
    n = len(xhat_i)
    times = _times(n, dt, t0)
    adapt = adapt_mask(times, adapt_window)
    multiplier = xhat_i if multiplier is None else multiplier
    est = DremEstimator(lam1, lam2, gamma2, dt, omega_hat, l0)
    l_hat, delta, Z = np.zeros((n, 2)), np.zeros(n), np.zeros((n, 2))
    for j in range(n):
        l_hat[j], delta[j] = est.update(times[j], xhat_i[j], h_i[j], multiplier[j], adapt[j])
        Z[j] = est.Z
    trace = DremTrace(l_hat, delta, Z, delta_min)
    if trace.poor_excitation:
        log.warning('poor excitation: max |Delta| below %g, amplitudes are not identifiable', delta_min)
    return trace


def theta_reconstruct(omega_hat, l_hat, times):
    """theta_hat(t) = l1 sin(w t) + l2 cos(w t), omega_hat and l_hat may be constants or series"""
    times = np.asarray(times, dtype=float)
    l_hat = np.asarray(l_hat, dtype=float)
    l1, l2 = (l_hat[0], l_hat[1]) if l_hat.ndim == 1 else (l_hat[:, 0], l_hat[:, 1])
    w = np.asarray(omega_hat, dtype=float)
    return ThetaEstimate(omega_hat, l_hat, l1 * np.sin(w * times) + l2 * np.cos(w * times))
