"""
Exception hierarchy shared by the lab modules and mapped to CLI exit codes
"""


class LabError(Exception):
    """Base class for every failure the lab reports"""

    exit_code = 1


class ConfigError(LabError, ValueError):
    """Invalid or inconsistent configuration"""

    exit_code = 2


class AssumptionError(LabError):
    """A model assumption (gap, smoothness, flat start, reservoir decay) does not hold"""

    exit_code = 3

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class NumericalError(LabError):
    """A numerical routine could not meet its accuracy contract"""

    exit_code = 4


class TransportError(NumericalError):
    """Kato transport drifted beyond the unitarity or intertwining tolerance"""


class QuadratureError(NumericalError):
    """Quadrature failed to converge or to resolve oscillations"""


class NodeBudgetError(NumericalError):
    """Requested quadrature exceeds the configured node budget"""


class NormDriftError(NumericalError):
    """Oracle state norm drifted beyond tolerance"""


class LeakageError(NumericalError):
    """Oracle population at the Fock cutoff exceeds tolerance"""

    def __init__(self, message: str, leakage: float):
        super().__init__(message)
        self.leakage = leakage
