"""Exception hierarchy for jmdsim."""


class JmdError(Exception):
    """Base class for all jmdsim errors."""


class DimensionError(JmdError, ValueError):
    pass


class SingularMatrixError(JmdError, ArithmeticError):
    pass


class ConfigError(JmdError, ValueError):
    pass


class PlacementError(JmdError, RuntimeError):
    """Angular placement with the required separation could not be found."""


class ScalingError(JmdError, ArithmeticError):
    pass


class ProtocolError(JmdError, ValueError):
    """A detector was asked to run on a frame layout it cannot use."""


class SweepError(JmdError, RuntimeError):
    pass
