"""Exception types shared across the toolkit."""


class FingerSafeError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(FingerSafeError):
    """A parameter value is outside its documented domain."""


class ContractError(FingerSafeError):
    """A caller violated a documented precondition."""


class ShapeError(ContractError):
    """Operands have incompatible shapes."""


class SegmentationFailure(FingerSafeError):
    """No usable fingertip region was found in a photo."""


class AttackDiagnosticError(FingerSafeError):
    """The protection loop hit a non-finite loss; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
