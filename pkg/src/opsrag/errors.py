"""Exception hierarchy shared across the package."""


class OpsRagError(Exception):
    """Base class for all package errors."""


# --- corpus ingest ---------------------------------------------------------


class MalformedMarkup(OpsRagError):
    """Source markup cannot be parsed (bad table row, heading level > 6)."""


class EmptyDocument(OpsRagError):
    """Document has no chunkable content."""


# --- distillation / backends ----------------------------------------------


class BackendUnavailable(OpsRagError):
    """Generation backend could not be reached or returned a transport error."""


class FormatError(OpsRagError):
    """Generated text does not follow the expected QA wire format."""


class ExhaustedEscalation(OpsRagError):
    """Both the standard and the escalation tier returned unparseable output."""


class CassetteMiss(OpsRagError):
    """Replay cassette has no recording for the request."""


# --- encoder / training -----------------------------------------------------


class EmptyInput(OpsRagError):
    """Text is empty after normalization; nothing to encode."""


class DegenerateBatch(OpsRagError):
    """Single-pair batch without negatives; the contrastive loss is identically 0."""


class NonFiniteLoss(OpsRagError):
    """Training produced a NaN/Inf loss; aborted with diagnostics."""


# --- vector index -----------------------------------------------------------


class DimensionMismatch(OpsRagError):
    """Vector dimension does not match the index dimension."""


class ZeroVector(OpsRagError):
    """A vector with (near-)zero norm cannot be normalized for cosine search."""


class DuplicateId(OpsRagError):
    """Insert would collide with an id already present in the index."""


class CorruptFile(OpsRagError):
    """Persisted artifact failed its checksum or structural validation."""


# --- runtime / service ------------------------------------------------------


class TemplateMissing(OpsRagError):
    """No instruction template registered for the requested task."""


class EmptyIndex(OpsRagError):
    """Retrieval was requested against an index with no entries."""


class PositiveLogProb(OpsRagError):
    """A log-probability input was > 0."""


class MissingArtifacts(OpsRagError):
    """Service startup requires model/index files that do not exist."""


# --- evaluation --------------------------------------------------------------


class EmptyEvalSet(OpsRagError):
    """Evaluation was requested over zero questions."""


class JudgeUnparseable(OpsRagError):
    """Judge response had no valid rating/verdict after the retry budget."""


# --- cli ----------------------------------------------------------------------


class ConfigError(OpsRagError):
    """Pipeline configuration is missing, unreadable, or invalid."""


class StageFailure(OpsRagError):
    """A pipeline stage failed; carries the underlying module error verbatim."""
