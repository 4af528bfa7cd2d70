"""Exception types shared across the toolkit."""


class DroneprintError(Exception):
    """Base class for all toolkit errors."""


class MalformedRecordingError(DroneprintError):
    """File cannot be a valid interleaved fp32 IQ recording."""


class MetadataError(DroneprintError):
    """Base class for sidecar metadata problems."""


class MetadataParseError(MetadataError):
    """Sidecar XML is not well-formed."""


class MetadataSchemaError(MetadataError):
    """Sidecar XML is well-formed but violates the documented schema."""


class InvalidSampleError(DroneprintError):
    """Input contains NaN or Inf samples where finite values are required."""


class InsufficientDataError(DroneprintError):
    """Not enough samples, segments, or events for the requested operation."""


class InsufficientNoiseError(DroneprintError):
    """No noise-only region is available for noise power estimation."""


class CannotRaiseSnrError(DroneprintError):
    """Requested SNR target lies above the measured SNR.

    Additive noise can only lower the SNR of a recording.
    """


class AnomalousFingerprintError(DroneprintError):
    """Fingerprint parameters violate a physical invariant (e.g. hop
    duration exceeding the duty-cycle interval)."""
