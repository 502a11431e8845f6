"""Exception hierarchy shared by every kamforge module."""


class KamError(Exception):
    """Base class for all kamforge failures."""


class DimensionMismatch(KamError, ValueError):
    pass


class CompositionOverflow(KamError):
    """Angle composition discarded more than the allowed tail."""


class ZeroMode(KamError, ValueError):
    pass


class Resonant(KamError):
    """A frequency vector is resonant within the scanned cutoff."""

    def __init__(self, message, nu=None):
        super().__init__(message)
        self.nu = nu


class ResonantMode(Resonant):
    pass


class ShiftConditionFailed(KamError):
    pass


class ShiftDiverged(KamError):
    pass


class InversionDiverged(KamError):
    pass


class InjectivityFailed(KamError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DomainCollapsed(KamError):
    pass


class NotApplicable(KamError):
    """The initial gates reject the Hamiltonian; ``condition`` names the first failing check."""

    def __init__(self, message, condition=None, certificate=None):
        super().__init__(message)
        self.condition = condition
        self.certificate = certificate


class NotEnoughData(KamError, ValueError):
    pass


class IntegrationFailed(KamError):
    pass


class OracleDiverged(KamError):
    pass


class ConfigError(KamError, ValueError):
    def __init__(self, message, field=None, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.field = field
        self.line = line
