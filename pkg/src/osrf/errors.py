"""Exception hierarchy shared by every stage of the pipeline."""


class OsrfError(Exception):
    """Base class for all package errors."""


class InvalidSpec(OsrfError, ValueError):
    pass


class AliasingRisk(OsrfError, ValueError):
    pass


class InvalidProfile(OsrfError, ValueError):
    pass


class OffsetOutOfRange(OsrfError, ValueError):
    pass


class ZeroPowerSignal(OsrfError, ValueError):
    pass


class SignalTooShort(OsrfError, ValueError):
    pass


class LengthMismatch(OsrfError, ValueError):
    pass


class ShapeMismatch(OsrfError, ValueError):
    pass


class InvalidLabel(OsrfError, ValueError):
    pass


class EmptyDataset(OsrfError, ValueError):
    pass


class LabelOutOfRange(OsrfError, ValueError):
    pass


class NonFiniteError(OsrfError, FloatingPointError):
    """NaN or Inf showed up in weights, activations or the loss."""


class VersionMismatch(OsrfError):
    pass


class ChecksumMismatch(OsrfError):
    pass


class InvalidManifest(OsrfError, ValueError):
    pass


class EmptyActivations(OsrfError, ValueError):
    pass


class EmptySet(OsrfError, ValueError):
    pass


class EmptyTable(OsrfError, ValueError):
    pass


class InfeasibleConstraint(OsrfError, ValueError):
    pass


class InvalidConfig(OsrfError, ValueError):
    """A configuration value failed validation before any work started."""


class IoError(OsrfError, OSError):
    """A dataset, model or report file could not be read or written."""


class InvariantViolation(OsrfError, AssertionError):
    """An exact pipeline invariant (e.g. sweep monotonicity) failed at run time."""
