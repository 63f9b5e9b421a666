"""Exception families and their process exit codes."""


class TexcalError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(TexcalError):
    """Invalid or unreadable experiment configuration."""

    exit_code = 2


class ArtifactError(TexcalError):
    """Missing, malformed or unwritable artifact file."""

    exit_code = 3


class NumericError(TexcalError):
    """Non-finite values, divergence or a failed fit."""

    exit_code = 4


class InvalidInputError(NumericError, ValueError):
    """Input violates a mathematical precondition (shape, range, normalization)."""


class MissingArtifactError(ArtifactError):
    """A prerequisite artifact is absent; names the command that produces it."""

    def __init__(self, path, command: str):
        self.path = path
        self.command = command
        super().__init__(f"{path} not found - run `texcal {command}` first")


class StageError(TexcalError):
    """A pipeline stage failed; carries the stage name and the cause's exit code."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"stage '{stage}' failed: {cause}")
