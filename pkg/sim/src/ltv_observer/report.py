#!/usr/bin/env python3

"""
Run summary, every number is recomputed from the exported trajectory frame
"""

from dataclasses import dataclass, field

import numpy as np

SETTLING_BAND = 0.05
TAIL_FRACTION = 0.2


@dataclass
class RowSummary:
    row: int
    omega_final: float
    omega_settling: float
    l_final: tuple
    theta_rms: float
    delta_min: float
    delta_median: float


@dataclass
class RunReport:
    samples: int
    final_xerr_norm: float = float('nan')
    rows: list = field(default_factory=list)
    # row -> (omega, (l1, l2)) ground truth, used for the errors
    truth: dict = field(default_factory=dict)
    conditions: object = None

    @property
    def no_data(self):
        return self.samples == 0

    def row(self, i):
        return next(r for r in self.rows if r.row == i)

    def lines(self):
        out = []
        if self.conditions is not None:
            out += ['observer conditions:'] + ['  ' + line for line in self.conditions.lines()]
        if self.no_data:
            return out + ['no data']
        out.append(f'samples: {self.samples}')
        out.append(f'final |x~|: {self.final_xerr_norm:.6g}')
        for r in self.rows:
            settling = 'not settled' if np.isnan(r.omega_settling) else f'{r.omega_settling:.6g} s'
            out.append(f'row {r.row}:')
            out.append(f'  omega_hat final {r.omega_final:.6g}, settling to +-{SETTLING_BAND:g}: {settling}')
            out.append(f'  l_hat final [{r.l_final[0]:.6g}, {r.l_final[1]:.6g}]')
            if r.row in self.truth:
                omega, l = self.truth[r.row]
                out.append(f'  truth omega {omega:g}, l [{l[0]:g}, {l[1]:g}]')
            out.append(f'  theta~ rms over the last {TAIL_FRACTION:.0%}: {r.theta_rms:.6g}')
            out.append(f'  |Delta| min {r.delta_min:.6g} median {r.delta_median:.6g}')
        return out

    def text(self):
        return '\n'.join(self.lines()) + '\n'


def settling_time(t, values, target, band=SETTLING_BAND):
    """first time after which |values - target| stays within band, nan if never"""
    outside = np.flatnonzero(~(np.abs(values - target) <= band))
    if outside.size == 0:
        return float(t[0]) if t.size else float('nan')
    if outside[-1] == t.size - 1:
        return float('nan')
    return float(t[outside[-1] + 1])


def tail_rms(t, error, fraction=TAIL_FRACTION):
    if t.size == 0:
        return float('nan')
    start = t[-1] - fraction * (t[-1] - t[0])
    tail = error[t >= start - 1e-12]
    return float(np.sqrt(np.mean(tail ** 2)))


def summarize(frame, truth=None, conditions=None):
    """RunReport of a trajectory frame (as exported to csv)"""
    truth = dict(truth or {})
    report = RunReport(samples=len(frame), truth=truth, conditions=conditions)
    if report.no_data:
        return report
    t = frame['t'].to_numpy()
    report.final_xerr_norm = float(frame['xerr_norm'].iloc[-1])
    rows = sorted(int(c[len('omega_hat'):]) for c in frame.columns if c.startswith('omega_hat'))
    for i in rows:
        omega_hat = frame[f'omega_hat{i}'].to_numpy()
        target = truth[i][0] if i in truth else omega_hat[-1]
        theta_err = frame[f'theta_true{i}'].to_numpy() - frame[f'theta_hat{i}'].to_numpy() \
            if f'theta_hat{i}' in frame else np.full(t.size, np.nan)
        delta = np.abs(frame[f'delta{i}'].to_numpy()) if f'delta{i}' in frame else np.full(t.size, np.nan)
        l_final = tuple(float(frame[f'l{m}_hat{i}'].iloc[-1]) if f'l{m}_hat{i}' in frame else float('nan')
                        for m in (1, 2))
        report.rows.append(RowSummary(row=i, omega_final=float(omega_hat[-1]),
                                      omega_settling=settling_time(t, omega_hat, target),
                                      l_final=l_final, theta_rms=tail_rms(t, theta_err),
                                      delta_min=float(np.min(delta)), delta_median=float(np.median(delta))))
    return report
