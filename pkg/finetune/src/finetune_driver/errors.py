"""Exception taxonomy for the fine-tuning driver."""


class FinetuneError(Exception):
    """Base class for all driver errors."""


class MissingMarkers(FinetuneError):
    """A training record lacks the [INST] ... [/INST] marker pair."""


class TokenizerSlotUnavailable(FinetuneError):
    """The tokenizer has no token in the configured padding slot."""


class ModelLoadError(FinetuneError):
    """Base model or adapter could not be loaded."""


class OutOfMemory(FinetuneError):
    """Training ran out of memory; message carries remediation hints."""


class PortInUse(FinetuneError):
    """The requested serving port is already bound."""
