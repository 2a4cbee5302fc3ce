"""Exception hierarchy.

Each exception carries the CLI exit code it maps to, so the command-line
driver never needs its own lookup table.
"""


class BHDimerError(Exception):
    exit_code = 1


class ParameterError(BHDimerError, ValueError):
    exit_code = 2


class ZeroTunneling(ParameterError):
    pass


class NonAttractive(ParameterError):
    pass


class LengthMismatch(ParameterError):
    pass


class IndexOutOfRange(ParameterError, IndexError):
    pass


class InvalidIndex(ParameterError):
    pass


class DegenerateDenominator(ParameterError, ZeroDivisionError):
    pass


class ZeroRoot(ParameterError, ZeroDivisionError):
    pass


class NonRealEnergy(BHDimerError):
    exit_code = 3


class ConvergenceFailure(BHDimerError, ArithmeticError):
    exit_code = 3


class NoConvergence(ConvergenceFailure):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class StructureViolation(ConvergenceFailure):
    pass


class NumericalOverflow(BHDimerError, OverflowError):
    exit_code = 3


class ZeroNorm(BHDimerError, ZeroDivisionError):
    exit_code = 3


class GuardError(BHDimerError):
    exit_code = 4


class RegimeBoundary(GuardError):
    pass


class RegimeViolation(GuardError):
    pass


class SizeGuard(GuardError):
    pass


class InsufficientData(ParameterError):
    pass
