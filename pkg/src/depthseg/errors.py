"""Exception types shared across the package."""


class DepthSegError(Exception):
    """Base class for all package errors."""


class ConfigError(DepthSegError):
    """Invalid configuration. Carries the full list of violated fields."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ContractViolation(DepthSegError):
    """An operation was called with arguments breaking its preconditions."""


class MalformedRleError(DepthSegError):
    """Run-length payload whose runs do not describe an H*W mask."""


class DetectorFileError(DepthSegError):
    """Unreadable or inconsistent detector-box file."""

    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class CheckpointVersionError(DepthSegError):
    """Checkpoint produced by an incompatible format version."""

    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(f"checkpoint version {found!r}, expected {expected!r}")


class TrainingDiverged(DepthSegError):
    """Total loss became non-finite during training."""
