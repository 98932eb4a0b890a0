"""
Exception hierarchy for kerncollab
"""


class KernCollabError(Exception):
    """Base class for every error raised by kerncollab"""


class ConfigError(KernCollabError, ValueError):
    """Invalid experiment configuration or config file"""


class DimensionError(KernCollabError, ValueError):
    """Points of different dimension were combined"""


class NumericalError(KernCollabError, ArithmeticError):
    """Factorization failed or a variance came out genuinely negative"""


class ScheduleError(KernCollabError, ValueError):
    """Schedule is not monotone, or rounds/phases were consumed out of order"""


class ProtocolError(KernCollabError, RuntimeError):
    """Communication protocol violated (duplicate sender, missing peer, ...)"""
