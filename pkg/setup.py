#!/usr/bin/env python3

from setuptools import setup

# for your packages to be recognized by python
setup(
 name='ltv_observer',
 version='0.1.0',
 description='adaptive state observer and sinusoidal parameter identification for LTV systems',
 packages=['ltv_observer', 'ltv_observer.plugins'],
 package_dir={'ltv_observer': 'sim/src/ltv_observer'},
 data_files=[('share/ltv_observer/config', ['sim/config/example_scenario.yaml',
                                            'sim/config/synthetic_n3_scenario.yaml'])],
 python_requires='>=3.8',
 install_requires=['numpy', 'scipy', 'sympy', 'pandas>=1.5', 'matplotlib', 'PyYAML'],
 extras_require={'test': ['pytest']},
 entry_points={'console_scripts': ['ltv-observer = ltv_observer.cli:main']},
)
