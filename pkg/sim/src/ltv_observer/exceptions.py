#!/usr/bin/env python3

"""
Exceptions raised by the ltv_observer package

Every error derives from LtvObserverError so the command line front end can map
them to exit codes without knowing every stage.
"""


class LtvObserverError(Exception):
    """base class for all package errors, stage is set by the main loop (e.g. "observe")"""
    stage = None

    def __str__(self):
        message = super().__str__()
        return f'[{self.stage}] {message}' if self.stage else message


class ConfigError(LtvObserverError):
    """scenario file problems, carries every message found (not only the first one)"""
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__('\n'.join(self.errors))


class ExpressionError(LtvObserverError):
    """matrix entry text outside of the supported grammar"""


class EvaluationError(LtvObserverError):
    """a matrix entry evaluated to a non finite value"""
    def __init__(self, name, row, col, t):
        self.name, self.row, self.col, self.t = name, row, col, t
        super().__init__(f'{name}[{row + 1},{col + 1}] is not finite at t={t!r}')


class StructureError(LtvObserverError):
    """dimension or structure mismatch between plant, gains and signals"""


class DivergenceError(LtvObserverError):
    """integrated state became non finite, t is the first bad timestamp"""
    def __init__(self, what, t):
        self.what, self.t = what, t
        super().__init__(f'{what} diverged at t={t!r}')


class ImproperFilterError(LtvObserverError):
    """numerator degree exceeds denominator degree"""


class SingularityError(LtvObserverError):
    """division guard violated"""
    def __init__(self, what, t):
        self.what, self.t = what, t
        super().__init__(f'{what} too close to zero at t={t!r}')
