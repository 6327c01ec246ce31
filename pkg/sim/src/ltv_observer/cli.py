#!/usr/bin/env python3

"""
Command line front end

    ltv-observer verify <scenario>           observer conditions and error decay only
    ltv-observer run <scenario>              full pipeline, csv + report + plots
    ltv-observer reproduce-paper [--out DIR] built-in numerical example
    ltv-observer batch <dir>                 every *.yaml of dir in parallel

exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 observer condition residuals above the tolerance (verify)
"""

import os
import sys
import glob
import logging
import argparse

import numpy as np

from ltv_observer.config import load_config, apply_overrides, build_system, build_gains, get_param, \
    builtin_scenario
from ltv_observer.exceptions import (LtvObserverError, ConfigError, StructureError, ExpressionError, EvaluationError,
                                     ImproperFilterError)
from ltv_observer.function_exec_manager import FuncExecManager
from ltv_observer.ltv_observer import run_scenario
from ltv_observer.observer import verify_conditions, check_error_stability

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_RESIDUALS = 4


def exit_code(error):
    """map a package error to the process exit code"""
    if isinstance(error, (ConfigError, StructureError, ExpressionError, EvaluationError,
                          ImproperFilterError, OSError)):
        return EXIT_CONFIG
    return EXIT_DIVERGENCE


def _load(args):
    cfg = load_config(args.scenario) if args.scenario else load_config(builtin_scenario('example'))
    return apply_overrides(cfg, dt=args.dt, horizon=args.horizon, out=args.out, decimate=args.decimate,
                           mode=args.mode, noise=args.noise)


def verify(cfg):
    system, gains = build_system(cfg), build_gains(cfg)
    params = cfg.params()
    grid = (0.0, get_param(params, 'verify/t_final', 10.0), get_param(params, 'verify/step', 0.01))
    report = verify_conditions(system, gains, grid)
    for line in report.lines():
        print(line)
    decay = check_error_stability(gains, system.C, np.ones(system.n),
                                  (0.0, get_param(params, 'verify/stability_horizon', 10.0)), cfg.dt)
    print(f'error dynamics x~\' = Mc(t) x~: fitted rate {decay.rate:.6g} 1/s, '
          f'|x~(T)|/|x~(0)| = {decay.ratio:.3e} ({"decaying" if decay.decaying else "NOT decaying"})')
    tolerance = get_param(params, 'verify/tolerance', 1e-10)
    if not report.passed(tolerance):
        log.error('condition residual %.3e above tolerance %g', report.max_residual, tolerance)
        return EXIT_RESIDUALS
    return EXIT_OK


def run(cfg):
    report, _ = run_scenario(cfg)
    sys.stdout.write(report.text())
    return EXIT_OK


class ScenarioJob:
    """one scenario file of a batch, written to its own output folder"""
    def __init__(self, path, out_root, overrides):
        self.path = path
        self.name = os.path.splitext(os.path.basename(path))[0]
        self.out_root = out_root
        self.overrides = overrides
        self.report = None

    def execute(self):
        cfg = apply_overrides(load_config(self.path), out=os.path.join(self.out_root, self.name),
                              **self.overrides)
        self.report, _ = run_scenario(cfg)


def batch(args):
    paths = sorted(glob.glob(os.path.join(args.folder, '*.yaml')))
    if not paths:
        log.error('no scenario files (*.yaml) in %s', args.folder)
        return EXIT_CONFIG
    overrides = dict(dt=args.dt, horizon=args.horizon, decimate=args.decimate, mode=args.mode, noise=args.noise)
    jobs = [ScenarioJob(path, args.out or 'results', overrides) for path in paths]
    manager = FuncExecManager(jobs, log_info=log.info, log_warn=log.warning, log_debug=log.debug)
    on_time, late, failed = manager.start_parallel_execution(deadline=args.deadline)
    log.info('batch finished: %d on time, %d late, %d failed', len(on_time), len(late), len(failed))
    for job, error in failed:
        log.error('%s: %s', job.name, error)
    return max((exit_code(error) for _, error in failed), default=EXIT_OK)


def _add_overrides(parser):
    parser.add_argument('--dt', type=float, help='integration step in s')
    parser.add_argument('--horizon', type=float, help='simulated time in s')
    parser.add_argument('--out', help='output folder')
    parser.add_argument('--decimate', type=int, help='write every n-th sample to the csv file')
    parser.add_argument('--mode', choices=('replay', 'cascade'), help='identification staging')
    parser.add_argument('--noise', type=float, help='amplitude of the uniform output noise')


def build_parser():
    parser = argparse.ArgumentParser(prog='ltv-observer',
                                     description='adaptive observer and parameter identification for '
                                                 'LTV systems with unknown sinusoidal parameters')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    sub = parser.add_subparsers(dest='command', required=True)
    p = sub.add_parser('verify', help='check the observer conditions of a scenario')
    p.add_argument('scenario')
    _add_overrides(p)
    p = sub.add_parser('run', help='simulate, observe and identify')
    p.add_argument('scenario')
    _add_overrides(p)
    p = sub.add_parser('reproduce-paper', help='run the built-in numerical example')
    p.set_defaults(scenario=None)
    _add_overrides(p)
    p = sub.add_parser('batch', help='run every scenario file of a folder in parallel')
    p.add_argument('folder')
    p.add_argument('--deadline', type=float, default=600.0, help='wall clock deadline in s')
    _add_overrides(p)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='[%(levelname)s] %(name)s: %(message)s')
    try:
        if args.command == 'batch':
            return batch(args)
        cfg = _load(args)
        if args.command == 'verify':
            return verify(cfg)
        return run(cfg)
    except ConfigError as e:
        for message in e.errors:
            log.error('%s', message)
        return EXIT_CONFIG
    except (LtvObserverError, OSError) as e:
        log.error('%s', e)
        return exit_code(e)


if __name__ == '__main__':
    sys.exit(main())
