class CrystalError(Exception):
    """Base class for every error raised by the certificate machinery."""

    exit_code = 2


class SequenceValidationError(CrystalError, ValueError):
    pass


class AdmissibilityError(SequenceValidationError):
    """
    An exponent sequence violates one of the admissibility inequalities.
    `index` is the j (or r) at which the inequality fails.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DomainError(CrystalError, ValueError):
    pass


class CapacityError(CrystalError):
    pass


class EnumerationLimitError(CrystalError):
    pass


class EngineDisagreementError(CrystalError):
    # Engine disagreement or a failed internal invariant: never recoverable.
    exit_code = 3


class MissingCertificateError(CrystalError):
    pass


class InsufficientRowsError(CrystalError, ValueError):
    pass


class ConfigError(CrystalError):
    def __init__(self, message, flag=None):
        super().__init__(message)
        self.flag = flag


class ExportError(CrystalError, OSError):
    pass
