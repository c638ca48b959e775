"""
Exception hierarchy shared by the fronthaul services.
"""


class SeqFrontError(Exception):
    pass


class ConfigurationError(SeqFrontError, ValueError):
    """Invalid experiment parameters or plan."""


class NumericError(SeqFrontError, ArithmeticError):
    """Non-PSD input, non-Hermitian state or a failed bracketing step."""


class ContractViolation(SeqFrontError, ValueError):
    """Array shapes that do not fit together."""


class ResultsError(SeqFrontError, OSError):
    pass
