class AdapterError(Exception):
    """Base class for adapter failures."""


class ManifestError(AdapterError):
    """Manifest file is malformed or violates its invariants."""


class ModelLoadError(AdapterError):
    """The requested scoring model could not be obtained."""


class AudioDecodeError(AdapterError):
    """One audio file could not be decoded; scoring skips the file."""
