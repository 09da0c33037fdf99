"""Exception types shared across the toolkit."""


class PerEvalError(Exception):
    """Base class for all toolkit errors."""


# --- inventory / posteriorgram files ---

class DuplicateSymbol(PerEvalError):
    pass


class MissingBlank(PerEvalError):
    pass


class FormatError(PerEvalError):
    """Bad magic bytes, version, or truncated payload in a PGRM file."""


class NotNormalized(PerEvalError):
    """A posteriorgram row does not sum to one in probability domain."""


# --- CTC loss / decoding ---

class InvalidLabel(PerEvalError):
    pass


class InfeasibleTarget(PerEvalError):
    """Target cannot be emitted in the available number of frames."""


class OracleTooLarge(PerEvalError):
    """Exhaustive enumeration guard tripped."""


class InvalidWidth(PerEvalError):
    pass


# --- metrics ---

class EmptyReference(PerEvalError):
    pass


class EmptyCorpus(PerEvalError):
    pass


# --- SNR ---

class TooShort(PerEvalError):
    pass


class SilentSignal(PerEvalError):
    pass


# --- manifests / corpus ---

class ManifestError(PerEvalError):
    pass


class UnknownSymbol(ManifestError):
    pass


class BadTask(ManifestError):
    pass


class DuplicateId(ManifestError):
    pass


class MissingSnr(PerEvalError):
    pass


# --- training ---

class NoCheckpoints(PerEvalError):
    pass


class DivergenceDetected(PerEvalError):
    pass
