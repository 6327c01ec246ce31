#!/usr/bin/env python3

"""
Advance the derivative free observer one step per tick and publish xhat, x~ and the
known drift h = A0 xhat + B u on the signal bus (trajectory columns xhat*, xerr*, h*)
"""

import logging

import numpy as np

from ltv_observer.integrate import BlockCache
from ltv_observer.observer import initial_state, ObserverStepper, record_observer_sample
from ltv_observer.ident import known_drift

log = logging.getLogger(__name__)


class StateObserver:
    # runs during the live pass together with the plant
    live = True
    per_row = False
    order = 0

    def __init__(self, sim, system, **kargs):
        # get the main loop (clock, plant, signal bus) and the plant definition
        self.sim = sim
        self.system = system
        self.gains = sim.gains
        self.stage = 'observe'
        self.stepper = ObserverStepper(self.gains, sim.traj.t0, sim.dt)
        # A0 and B on the sample grid, sampled a block at a time
        self.known = BlockCache(self._sample_known)
        self.state = initial_state(self.gains, sim.plant.output(), sim.cfg.z0)
        self.h_columns = [f'h{j}' for j in range(1, system.n + 1)]

    def _sample_known(self, k0, count):
        times = self.sim.traj.t0 + (k0 + np.arange(count)) * self.sim.dt
        return self.system.A0.sample(times), self.system.B.sample(times)[:, :, 0]

    def execute(self):
        """this function gets called from the main update loop"""
        sim, k = self.sim, self.sim.k
        if k > 0:
            # the plant has just moved from t - dt to t, consume its stage outputs
            self.state = self.stepper.step(self.state, k - 1, sim.plant.stage_outputs,
                                           sim.plant.stage_inputs, y_next=sim.plant.output())
        record_observer_sample(sim.traj, k, self.state, sim.plant.x)
        (A0, B), i = self.known(k)
        h = known_drift(self.system, sim.t, self.state.xhat, sim.plant.input(), A0=A0[i], B=B[i])
        for name, hj in zip(self.h_columns, h):
            sim.traj.alloc(name)[k] = hj
