"""Exception types shared across the simulator."""


class NotPSD(ValueError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class SingularSystem(ValueError):
    """A linear system is numerically singular and no ridge was requested."""


class DimensionMismatch(ValueError):
    """Matrix operands are not conformable."""


class ShapeMismatch(ValueError):
    """A tensor does not have the shape a layer or pipeline stage expects."""


class MissingRecord(RuntimeError):
    """backward() was called without the activation record from forward()."""


class DegenerateInput(ValueError):
    """Input is numerically degenerate (e.g. zero power before normalization)."""


class Diverged(RuntimeError):
    """Training loss became non-finite."""


class AllTargetsFailed(RuntimeError):
    """No candidate target class could be flipped within the search radius."""


class NoProgress(UserWarning):
    """An attack run produced no successful decision flip (reported, not fatal)."""


class MissingCheckpoint(FileNotFoundError):
    """A run needs trained weights but no checkpoint exists at the given path."""


class ConfigInvalid(ValueError):
    """A config file field is present but invalid; carries the field path."""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")
