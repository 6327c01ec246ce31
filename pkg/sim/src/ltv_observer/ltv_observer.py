#!/usr/bin/env python3

"""
Main loop: plant, observer and identification plugins on one clock

Every tick the plant is stepped and the plugins are executed in dependency order (observer
first, then per row of D: frequency before amplitude, rows in increasing order).
The trajectory doubles as the signal bus, plugins read and write its columns at sample k.

replay   - live pass with the plant and the observer, then every identification plugin
           replays the recorded bus on its own
cascade  - one single pass, every plugin consumes the newest estimates of the previous ones
"""

import os
import logging
import importlib

import numpy as np

from ltv_observer.config import get_param, build_system, build_gains
from ltv_observer.exceptions import LtvObserverError
from ltv_observer.integrate import time_grid
from ltv_observer.model import PlantSimulator, Trajectory, record_plant_sample, check_assumptions
from ltv_observer.observer import verify_conditions
from ltv_observer.export import export_csv, read_csv, emit_plots
from ltv_observer.report import summarize

log = logging.getLogger(__name__)


class LtvObserverWrapper:
    """simulation main loop, loads the plugins listed in the scenario"""
    def __init__(self, cfg):
        self.cfg = cfg
        self.params = cfg.params()
        # get the clock from the scenario parameters
        self.dt = get_param(self.params, 'simulation/dt', 0.001)
        horizon = get_param(self.params, 'simulation/horizon', 60.0)
        self.mode = get_param(self.params, 'simulation/mode', 'replay')
        self.system = build_system(cfg)
        self.gains = build_gains(cfg)
        # a zero horizon gives an empty trajectory
        self.times = time_grid(0.0, horizon, self.dt) if horizon > 0 else np.zeros(0)
        self.k = 0
        self.plant = PlantSimulator(self.system, cfg.input, cfg.x0, self.dt,
                                    noise=get_param(self.params, 'simulation/noise', 0.0),
                                    seed=get_param(self.params, 'simulation/seed', 0))
        self.traj = Trajectory(self.dt, t0=0.0, length=self.times.size)
        self.plugins = self.load_plugins()
        log.info('ltv observer main loop initialized (%s mode, %d samples)', self.mode, self.times.size)

    @property
    def t(self):
        return self.traj.t0 + self.k * self.dt

    def bus_vector(self, prefix, k):
        """[prefix1, ..., prefixn] at sample k"""
        return np.array([self.traj[f'{prefix}{j}'][k] for j in range(1, self.system.n + 1)])

    def load_plugins(self):
        """import plugins dynamically, per row plugins get one instance per row of D"""
        plugins = []
        dic = self.cfg.plugins
        if not dic:
            log.warning('No plugins found, forgot to set plugins in the scenario?')
        for key in dic:
            log.info('loading plugin: %s class from %s', dic[key], key)
            cls = getattr(importlib.import_module(key), dic[key])
            rows = self.system.D.active_rows() if getattr(cls, 'per_row', False) else [0]
            for row in rows:
                # create object of the imported file class
                plugins.append(cls(self, self.system, row=row, target=self.system.D.target(row) if row else None))
        # dependency order, observer first then row by row
        plugins.sort(key=lambda p: (getattr(p, 'row', 0) if getattr(p, 'per_row', False) else 0,
                                    getattr(p, 'order', 0)))
        return plugins

    def _execute(self, plugin):
        try:
            plugin.execute()
        except LtvObserverError as e:
            if e.stage is None:
                e.stage = getattr(plugin, 'stage', plugin.__class__.__name__)
            raise

    def _step_plant(self):
        try:
            self.plant.step()
        except LtvObserverError as e:
            e.stage = e.stage or 'simulate'
            raise

    def run_live(self, plugins):
        for k in range(self.times.size):
            self.k = k
            if k > 0:
                self._step_plant()
            record_plant_sample(self.traj, k, self.plant)
            for plugin in plugins:
                self._execute(plugin)

    def replay(self, plugin):
        log.debug('replaying %d samples through %s', self.times.size, getattr(plugin, 'stage', plugin))
        for k in range(self.times.size):
            self.k = k
            self._execute(plugin)

    def run(self):
        """run every stage, returns the filled trajectory"""
        if self.mode == 'cascade':
            self.run_live(self.plugins)
        else:
            self.run_live([p for p in self.plugins if getattr(p, 'live', True)])
            for plugin in self.plugins:
                if not getattr(plugin, 'live', True):
                    self.replay(plugin)
        return self.traj


def run_scenario(cfg, write=True):
    """
    verify -> simulate/observe -> identify, then csv, report and plots in output/dir
    returns (RunReport, dictionary with the trajectory and the written files)
    """
    system, gains = build_system(cfg), build_gains(cfg)
    params = cfg.params()
    grid = (0.0, get_param(params, 'verify/t_final', 10.0), get_param(params, 'verify/step', 0.01))
    try:
        conditions = verify_conditions(system, gains, grid)
    except LtvObserverError as e:
        e.stage = e.stage or 'verify'
        raise
    tolerance = get_param(params, 'verify/tolerance', 1e-10)
    if not conditions.passed(tolerance):
        log.warning('observer conditions not satisfied (max residual %.3e > %g)',
                    conditions.max_residual, tolerance)
    sim = LtvObserverWrapper(cfg)
    traj = sim.run()
    if len(traj):
        check_assumptions(system, traj)
    truth = {row: (g.omega, tuple(g.l)) for row, g in system.theta.items()}
    artifacts = {'trajectory': traj}
    rows = system.D.active_rows()
    if not write:
        frame = traj.to_frame() if len(traj) else traj.to_frame(['t'])
        return summarize(frame, truth, conditions), artifacts
    folder = get_param(params, 'output/dir', 'results')
    os.makedirs(folder, exist_ok=True)
    artifacts['csv'] = os.path.join(folder, 'trajectory.csv')
    export_csv(traj, artifacts['csv'], system.n, rows, get_param(params, 'output/decimate', 1))
    # the summary is computed from what was written
    frame = read_csv(artifacts['csv'])
    report = summarize(frame, truth, conditions)
    artifacts['report'] = os.path.join(folder, 'report.txt')
    with open(artifacts['report'], 'w') as f:
        f.write(report.text())
    if get_param(params, 'output/plots', True) and not report.no_data:
        artifacts['plots'] = emit_plots(frame, report, folder)
    log.info('scenario %s done, results in %s', cfg.name, folder)
    return report, artifacts
