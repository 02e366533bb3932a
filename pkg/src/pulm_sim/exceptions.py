"""Exception types raised by the simulator."""


class PulmSimError(Exception):
    """Base class for all simulator errors."""


class CertificationError(PulmSimError):
    """No B-step window of the observed sequence is entrywise positive."""


class NotPrimitiveError(PulmSimError):
    """Power iteration did not converge within its budget."""


class ProtocolViolation(PulmSimError):
    """A node mixed a value it never received."""


class UndefinedMetric(PulmSimError):
    """Metric denominator vanished (input already consensual)."""


class CalibrationError(PulmSimError):
    """Distribution-matrix error did not decay over a calibration window."""


class ConfigError(PulmSimError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
