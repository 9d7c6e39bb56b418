"""Exception hierarchy shared across the package."""


class PetrecError(Exception):
    """Base class for all petrec errors."""


class InvalidSpecError(PetrecError):
    """A phantom or network configuration violates its invariants."""


class ConfigError(PetrecError):
    """A run configuration is malformed; message carries the JSON path."""


class VolumeParseError(PetrecError):
    """A .pvol file is malformed; message names the offending field."""

    def __init__(self, field: str, detail: str):
        self.field = field
        super().__init__(f"invalid .pvol field '{field}': {detail}")


class ShapeError(PetrecError):
    """Array arguments have inconsistent shapes."""


class DatasetError(PetrecError):
    """A dataset directory is missing required volumes."""


class PrerequisiteError(PetrecError):
    """A pipeline stage was invoked before its inputs exist."""
