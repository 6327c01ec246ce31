#!/usr/bin/env python3

"""
Classical fixed step Runge-Kutta (RK4) used by the plant, the observer and the filter bank

Stage inputs are passed explicitly (one per stage) instead of being evaluated from time,
this way the observer can consume the plant output at the very same stage points and
sampled signals can be held (zero order) or interpolated (first order) between samples.
"""

import numpy as np

# nodes of the classical scheme, stages 2 and 3 share the mid point
RK4_NODES = (0.0, 0.5, 0.5, 1.0)


def zoh_inputs(u):
    """hold the input constant over the whole step"""
    return (u, u, u, u)


def foh_inputs(u, u_next):
    """linear interpolation of the input between two consecutive samples"""
    u_mid = 0.5 * (u + u_next)
    return (u, u_mid, u_mid, u_next)


def rk4_step(fun, t, x, dt, inputs=None, return_stages=False):
    """
    advance x by one step of size dt
    fun - callable fun(t, x) or fun(t, x, stage_input) when inputs is given
    inputs - sequence of 4 stage inputs (see zoh_inputs, foh_inputs)
    return_stages - if True also return the 4 points where fun was evaluated
    """
    if inputs is None:
        f = lambda k, tk, xk: fun(tk, xk)
    else:
        f = lambda k, tk, xk: fun(tk, xk, inputs[k])
    x1 = x
    k1 = f(0, t, x1)
    x2 = x + 0.5 * dt * k1
    k2 = f(1, t + 0.5 * dt, x2)
    x3 = x + 0.5 * dt * k2
    k3 = f(2, t + 0.5 * dt, x3)
    x4 = x + dt * k3
    k4 = f(3, t + dt, x4)
    x_next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if return_stages:
        return x_next, (x1, x2, x3, x4)
    return x_next


def time_grid(t0, t_final, dt):
    """timestamps t0 + k*dt (never accumulated) covering [t0, t_final]"""
    if dt <= 0.0:
        raise ValueError('dt must be positive')
    n = int(np.floor((t_final - t0) / dt + 1e-9)) + 1
    return t0 + np.arange(max(n, 0)) * dt


def stage_times(t0, dt, k0, count):
    """(count, 4) times of the RK4 stages of steps k0 .. k0 + count - 1"""
    steps = t0 + (k0 + np.arange(count)) * dt
    return steps[:, None] + dt * np.asarray(RK4_NODES)[None, :]


def reduce_linear_rk4(A, dt):
    """
    one RK4 step of x' = A(t) x + w written as matrices, for a stack of steps at once

        stage point  x_j = P_j x + sum_m Q_jm w_m
        next state   x+  = Phi x + sum_m R_m w_m

    A - stage matrices of shape (steps, 4, n, n), w_m is the input term of stage m
    returns (Phi, P, Q, R) of shapes (steps, n, n), (steps, 4, n, n), (steps, 4, 4, n, n), (steps, 4, n, n)
    """
    A = np.asarray(A, dtype=float)
    steps, n = A.shape[0], A.shape[-1]
    eye = np.broadcast_to(np.eye(n), (steps, n, n))
    P = np.empty((steps, 4, n, n))
    Q = np.zeros((steps, 4, 4, n, n))
    P[:, 0] = eye
    for j in range(1, 4):
        a = RK4_NODES[j] * dt
        P[:, j] = eye + a * A[:, j - 1] @ P[:, j - 1]
        for m in range(j):
            Q[:, j, m] = a * (A[:, j - 1] @ Q[:, j - 1, m] + (eye if m == j - 1 else 0.0))
    weights = dt * np.array([1.0, 2.0, 2.0, 1.0]) / 6.0
    Phi = eye + sum(weights[j] * A[:, j] @ P[:, j] for j in range(4))
    R = np.empty((steps, 4, n, n))
    for m in range(4):
        R[:, m] = weights[m] * eye + sum(weights[j] * A[:, j] @ Q[:, j, m] for j in range(m + 1, 4))
    return Phi, P, Q, R


class BlockCache:
    """
    per step data computed a block of steps at a time by compute(k0, count)
    only the two most recent blocks are kept, steps are expected to be visited in order
    """
    def __init__(self, compute, block=1024):
        self.compute = compute
        self.block = int(block)
        self._blocks = {}

    def __call__(self, k):
        """(data of the block holding step k, index of k inside it)"""
        b, i = divmod(int(k), self.block)
        data = self._blocks.get(b)
        if data is None:
            if len(self._blocks) > 1:
                self._blocks.pop(min(self._blocks))
            data = self._blocks[b] = self.compute(b * self.block, self.block)
        return data, i
