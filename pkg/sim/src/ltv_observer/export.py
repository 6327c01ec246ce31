#!/usr/bin/env python3

"""
Trajectory csv files and the six result plots (svg)

Plots are drawn with the object oriented matplotlib api (no pyplot state) so scenario jobs
may run in parallel threads, and the svg writer is made reproducible (fixed hash salt,
no date) so identical runs give identical bytes.
"""

import os
import logging

import numpy as np
import pandas as pd
import matplotlib
matplotlib.use('Agg')
from matplotlib.figure import Figure

log = logging.getLogger(__name__)

matplotlib.rcParams['svg.hashsalt'] = 'ltv_observer'
matplotlib.rcParams['svg.fonttype'] = 'none'

CSV_FORMAT = '%.9g'

PLOT_FILES = ('states.svg', 'state_error.svg', 'omega_error.svg', 'amplitude_error.svg',
              'theta.svg', 'theta_error.svg')
# longer series are thinned to about this many points per line
PLOT_POINTS = 6000


def csv_columns(traj, n, rows):
    """declared column order, only the columns present in the trajectory"""
    names = ['t'] + [f'x{j}' for j in range(1, n + 1)] + [f'xhat{j}' for j in range(1, n + 1)]
    names += ['xerr_norm', 'y', 'u'] + [f'theta_true{i}' for i in rows]
    for i in rows:
        names += [f'omega_hat{i}', f'k_hat{i}', f'l1_hat{i}', f'l2_hat{i}']
    names += [f'theta_hat{i}' for i in rows] + [f'delta{i}' for i in rows]
    return [name for name in names if name in traj]


def export_csv(traj, path, n, rows, decimate=1):
    """
    one header row, 9 significant digits, every decimate-th sample starting with t0
    returns the written frame
    """
    if decimate < 1:
        raise ValueError(f'decimation factor must be a positive integer, got {decimate!r}')
    frame = traj.to_frame(csv_columns(traj, n, rows)).iloc[::int(decimate)]
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FORMAT, lineterminator='\n')
    log.info('wrote %d samples to %s', len(frame), path)
    return frame


def read_csv(path):
    return pd.read_csv(path, dtype=float)


def _rows(frame):
    return sorted(int(c[len('theta_true'):]) for c in frame.columns if c.startswith('theta_true'))


def _states(frame):
    return sorted(int(c[1:]) for c in frame.columns if c[0] == 'x' and c[1:].isdigit())


def _set_range(ax, series):
    """auto range, a constant series gets [v - 1, v + 1]"""
    values = np.concatenate([np.asarray(s, dtype=float) for s in series]) if series else np.zeros(1)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return
    lo, hi = float(values.min()), float(values.max())
    if hi - lo == 0.0:
        ax.set_ylim(lo - 1.0, hi + 1.0)


def _figure(title, ylabel):
    fig = Figure(figsize=(8, 4.5))
    ax = fig.add_subplot(1, 1, 1)
    ax.set_title(title)
    ax.set_xlabel('t [s]')
    ax.set_ylabel(ylabel)
    ax.grid(True)
    return fig, ax


def _save(fig, ax, series, path):
    _set_range(ax, series)
    ax.legend(loc='upper right')
    fig.savefig(path, format='svg', metadata={'Date': None})


def emit_plots(frame, report, folder):
    """six svg files mirroring the result figures, returns their paths"""
    os.makedirs(folder, exist_ok=True)
    frame = frame.iloc[::max(1, len(frame) // PLOT_POINTS)]
    t = frame['t'].to_numpy()
    rows, states = _rows(frame), _states(frame)
    truth = report.truth if report is not None else {}
    paths = [os.path.join(folder, name) for name in PLOT_FILES]

    fig, ax = _figure('state and estimate', 'x')
    series = []
    for j in states:
        series += [frame[f'x{j}'].to_numpy(), frame[f'xhat{j}'].to_numpy()]
        ax.plot(t, series[-2], label=f'x{j}')
        ax.plot(t, series[-1], '--', label=f'xhat{j}')
    _save(fig, ax, series, paths[0])

    fig, ax = _figure('state estimation error', '|x - xhat|')
    series = [frame['xerr_norm'].to_numpy()]
    ax.plot(t, series[0], label='|x~|')
    _save(fig, ax, series, paths[1])

    fig, ax = _figure('frequency estimation error', 'omega - omega_hat')
    series = []
    for i in rows:
        omega = truth[i][0] if i in truth else np.nan
        series.append(omega - frame[f'omega_hat{i}'].to_numpy())
        ax.plot(t, series[-1], label=f'omega~{i}')
    _save(fig, ax, series, paths[2])

    fig, ax = _figure('amplitude estimation error', 'l - l_hat')
    series = []
    for i in rows:
        l = truth[i][1] if i in truth else (np.nan, np.nan)
        for m in (1, 2):
            series.append(l[m - 1] - frame[f'l{m}_hat{i}'].to_numpy())
            ax.plot(t, series[-1], label=f'l~{m},{i}')
    _save(fig, ax, series, paths[3])

    fig, ax = _figure('time varying parameter', 'theta')
    series = []
    for i in rows:
        series += [frame[f'theta_true{i}'].to_numpy(), frame[f'theta_hat{i}'].to_numpy()]
        ax.plot(t, series[-2], label=f'theta{i}')
        ax.plot(t, series[-1], '--', label=f'theta_hat{i}')
    _save(fig, ax, series, paths[4])

    fig, ax = _figure('parameter estimation error', 'theta - theta_hat')
    series = []
    for i in rows:
        series.append(frame[f'theta_true{i}'].to_numpy() - frame[f'theta_hat{i}'].to_numpy())
        ax.plot(t, series[-1], label=f'theta~{i}')
    _save(fig, ax, series, paths[5])

    log.info('wrote %d plots to %s', len(paths), folder)
    return paths
