"""Exception hierarchy.

Everything raised on purpose by the package derives from :class:`HDGMMError`.
Input problems subclass :class:`InputError` (a ``ValueError``); failures of
the numerical pipeline subclass :class:`NumericalError`. The command line
maps the two families to exit codes 2 and 3.
"""


class HDGMMError(Exception):
    pass


class InputError(HDGMMError, ValueError):
    pass


class NumericalError(HDGMMError, ArithmeticError):
    pass


class EmptyInput(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class InvalidSpec(InputError):
    pass


class TooFewPeriods(InputError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class DegenerateWeight(NumericalError):
    pass


class DegenerateInstrumentVariance(DegenerateWeight):
    pass


class MaxIterationsExceeded(NumericalError):
    pass


class Infeasible(NumericalError):
    pass


class Unbounded(NumericalError):
    pass


class CycleDetected(NumericalError):
    pass


class NonPositiveVariance(NumericalError):
    pass
