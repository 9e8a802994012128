"""Exception hierarchy shared across the toolkit."""


class ScdError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ScdError):
    """Input violates a documented invariant."""


class RttmParseError(ScdError):
    """Malformed RTTM input; carries the offending line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ShapeError(ScdError):
    """Operands have incompatible shapes; names both."""


class FileFormatError(ScdError):
    """Binary feature/checkpoint file is malformed."""


class ConfigError(ScdError):
    """Run configuration is invalid (unknown key, bad value)."""


class TrainingDivergedError(ScdError):
    """Loss became non-finite; carries epoch and step."""

    def __init__(self, epoch: int, step: int):
        super().__init__(f"non-finite loss at epoch {epoch}, step {step}")
        self.epoch = epoch
        self.step = step
