#!/usr/bin/env python3

"""
Identify the frequency of one unknown parameter theta_i, one instance per row of D

rows multiplying their own state use the log squared transform of xhat_i, the others
divide by the multiplier state xhat_s through the swapping filter (xhat_s' comes from the
known drift plus the estimate of theta_s produced earlier on the bus)
"""

import logging

from ltv_observer.config import get_param
from ltv_observer.ident import (XiTransform, OmegaEstimator, SwappingOmegaEstimator, IdentState,
                                multiplier_derivative)

log = logging.getLogger(__name__)


class FrequencyIdentifier:
    live = False
    per_row = True
    order = 1

    def __init__(self, sim, system, row=1, **kargs):
        self.sim = sim
        self.system = system
        self.row = row
        self.target = system.D.target(row)
        self.diagonal = self.target == row
        self.stage = f'identify row {row}'
        params = sim.params
        self.eps_div = get_param(params, 'estimator/eps_div', 1e-6)
        self.warmup = get_param(params, 'estimator/warmup', 0.0)
        self.t1 = get_param(params, 'estimator/T1', 40.0)
        if self.diagonal:
            self.xi = XiTransform(self.eps_div)
            self.estimator = OmegaEstimator(get_param(params, 'estimator/lambda', 10.0),
                                            get_param(params, 'estimator/gamma1', 50.0), sim.dt)
        else:
            self.estimator = SwappingOmegaEstimator(get_param(params, 'estimator/lambda_i', 10.0),
                                                    get_param(params, 'estimator/gamma_i', 50.0),
                                                    sim.dt, self.eps_div)
        self.state = IdentState(row)
        self.gated = 0
        log.debug('row %d: frequency identifier on column %d (%s)', row, self.target,
                  'log squared transform' if self.diagonal else 'swapping filter')

    def execute(self):
        """this function gets called from the main update loop"""
        sim, k, t = self.sim, self.sim.k, self.sim.t
        traj, i = sim.traj, self.row
        adapt = self.warmup <= t <= self.t1
        if self.diagonal:
            _, xi, alpha, gated = self.xi.feed(traj[f'xhat{i}'][k], traj[f'h{i}'][k])
            self.state.k_hat, _, _ = self.estimator.update(xi, alpha, adapt and not gated, t=t)
        else:
            s = self.target
            xhat, h = sim.bus_vector('xhat', k), sim.bus_vector('h', k)
            thetas_hat = {s: traj[f'theta_hat{s}'][k]} if f'theta_hat{s}' in traj else {}
            xdot_s = multiplier_derivative(self.system, s, h, xhat, thetas_hat)
            self.state.k_hat, _, _, gated = self.estimator.update(xhat[i - 1], xhat[s - 1], xdot_s, h[i - 1],
                                                                  adapt, t=t)
        self.gated += int(gated)
        self.state.record_frequency(traj, k)
        if k == len(traj) - 1 and self.gated:
            log.warning('row %d: %d samples gated by the division guard', self.row, self.gated)
