"""Exception taxonomy shared across the package."""


class LorasoundError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(LorasoundError, ValueError):
    """Tensor operands do not conform (rank, dims, or divisibility)."""


class DecodeError(LorasoundError, ValueError):
    """A serialized artifact (weight file, frame payload) is malformed."""


class MissingWeightError(LorasoundError, KeyError):
    """A forward pass referenced a weight name absent from the store."""


class AudioFormatError(LorasoundError, ValueError):
    """Input bytes are not mono 16-bit PCM WAV."""


class MaskValidationError(LorasoundError, ValueError):
    """A spectral attention mask is not k contiguous ones of length p."""


class FramingError(LorasoundError, ValueError):
    """Wire frame has bad magic/version/length or is truncated."""


class IntegrityError(LorasoundError, ValueError):
    """Wire frame failed its CRC check."""


class StateMachineError(LorasoundError, ValueError):
    """Illegal event for the current power-cycle phase."""


class InfeasiblePayloadError(LorasoundError, ValueError):
    """Payload exceeds the maximum frame size for the spreading factor."""


class BudgetError(LorasoundError, ValueError):
    """Not even local bypass fits the per-cycle energy budget."""


class TraceError(LorasoundError, ValueError):
    """Channel trace CSV is malformed or violates its invariants."""


class ConfigError(LorasoundError, ValueError):
    """Scenario configuration is inconsistent or incomplete."""


class DownlinkLost(LorasoundError):
    """No valid downlink arrived within the receive window."""
