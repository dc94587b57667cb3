"""Exception types raised across the package."""


class BodyflowError(Exception):
    """Base class for all package errors."""


class SchemaError(BodyflowError):
    """A structured input document (keypoints, manifest, config) is invalid."""


class FlowFormatError(BodyflowError):
    """A flow file does not conform to the Middlebury .flo layout."""


class ConfigError(BodyflowError):
    """Inconsistent generator / training configuration."""


class NumericError(BodyflowError):
    """A non-finite value appeared in a numeric computation."""


class CheckpointError(BodyflowError):
    """Base class for checkpoint container problems."""


class IncompatibleCheckpointError(CheckpointError):
    """Container format version is not supported by this code."""


class CorruptCheckpointError(CheckpointError):
    """Container payload is truncated or fails its checksum."""
