#!/usr/bin/env python3

"""
Shared fixtures: the built-in scenarios and small synthetic plants
"""

import os
import sys

import numpy as np
import pytest

# run the tests from a source checkout without installing the package
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..', '..', 'sim', 'src')))

from ltv_observer.config import load_config, builtin_scenario, build_system, build_gains
from ltv_observer.model import TimeMatrix, DStructure, LtvSystem, ThetaGenerator
from ltv_observer.observer import ObserverGains


@pytest.fixture
def example_cfg():
    return load_config(builtin_scenario('example'))


@pytest.fixture
def synthetic_cfg():
    return load_config(builtin_scenario('synthetic_n3'))


@pytest.fixture
def example_system(example_cfg):
    return build_system(example_cfg)


@pytest.fixture
def example_gains(example_cfg):
    return build_gains(example_cfg)


def scalar_system(a, b=0.0):
    """x' = a x + b u, y = x, no unknown parameter"""
    return LtvSystem(A0=TimeMatrix([[a]], name='A0'), B=TimeMatrix([[b]], name='B'), C=[1.0],
                     D=DStructure(1, (None,)))


def constant_gains(G, N, L, M, C):
    return ObserverGains(G=G, N=N, L=L, M=TimeMatrix.from_array(M, name='M'), C=C)


def sinusoid_signals(l=(3.0, 0.5), omega=3.0, horizon=30.0, dt=1e-3):
    """
    exact signals of a row x' = h + theta x with theta = l1 sin wt + l2 cos wt,
    x = 3 + sin t is chosen freely and h follows from it
    """
    t = np.arange(0, horizon + dt / 2, dt)
    theta = ThetaGenerator(omega, tuple(l)).value(t)
    x = 3.0 + np.sin(t)
    h = np.cos(t) - theta * x
    return dict(t=t, dt=dt, x=x, h=h, theta=theta)


@pytest.fixture
def sinusoid_row():
    return sinusoid_signals()
