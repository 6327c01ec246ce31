#!/usr/bin/env python3

"""
Identify the amplitudes l of theta_i = l1 sin(w t) + l2 cos(w t) with regressor extension
and mixing, then publish theta_hat_i

replay mode: omega_hat is frozen at the end of the frequency stage (T1)
cascade mode: the newest omega_hat on the bus is used at every tick
"""

import logging

import numpy as np

from ltv_observer.config import get_param
from ltv_observer.ident import DremEstimator, IdentState, theta_reconstruct

log = logging.getLogger(__name__)


class AmplitudeIdentifier:
    live = False
    per_row = True
    order = 2

    def __init__(self, sim, system, row=1, **kargs):
        self.sim = sim
        self.system = system
        self.row = row
        self.target = system.D.target(row)
        self.stage = f'identify row {row}'
        params = sim.params
        self.warmup = get_param(params, 'estimator/warmup', 0.0)
        self.t1 = get_param(params, 'estimator/T1', 40.0)
        self.delta_min = get_param(params, 'estimator/delta_min', 1e-9)
        self.estimator = DremEstimator(get_param(params, 'estimator/lambda1', 10.0),
                                       get_param(params, 'estimator/lambda2', 1.0),
                                       get_param(params, 'estimator/gamma2', 10.0), sim.dt)
        self.state = IdentState(row)
        self.frozen_omega = None
        self.max_delta = 0.0

    def omega(self):
        sim = self.sim
        omega_hat = sim.traj[f'omega_hat{self.row}']
        if sim.mode == 'cascade':
            return omega_hat[sim.k]
        if self.frozen_omega is None:
            # last sample of the frequency stage
            k1 = min(len(omega_hat) - 1, int(np.floor((self.t1 - sim.traj.t0) / sim.dt + 1e-9)))
            self.frozen_omega = float(omega_hat[k1])
            log.info('row %d: omega_hat frozen at %.6g for the amplitude stage', self.row, self.frozen_omega)
        return self.frozen_omega

    def execute(self):
        """this function gets called from the main update loop"""
        sim, k, t = self.sim, self.sim.k, self.sim.t
        traj, i, s = sim.traj, self.row, self.target
        w = self.omega()
        l_hat, delta = self.estimator.update(t, traj[f'xhat{i}'][k], traj[f'h{i}'][k], traj[f'xhat{s}'][k],
                                             adapt=t >= self.warmup, omega=w)
        self.state.l_hat, self.state.delta = l_hat, delta
        self.state.theta_hat = float(theta_reconstruct(w, l_hat, t).theta_hat)
        self.state.record_amplitude(traj, k)
        self.max_delta = max(self.max_delta, abs(delta))
        if k == len(traj) - 1 and not self.max_delta > self.delta_min:
            log.warning('row %d: poor excitation, max |Delta| = %g', self.row, self.max_delta)
