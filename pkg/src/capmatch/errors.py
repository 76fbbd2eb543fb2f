"""Exception types raised across the package.

Every error the library raises deliberately derives from CapmatchError so
callers (and the CLI) can distinguish usage/runtime failures from bugs.
"""


class CapmatchError(Exception):
    """Base class for all errors raised by this package."""


# vector math

class ZeroVectorError(CapmatchError):
    """Vector norm below the representable threshold (1e-12)."""


class NonFiniteError(CapmatchError):
    """Vector contains NaN or Inf entries."""


class DimMismatchError(CapmatchError):
    """Operands have different embedding dimensions."""


# dataset ingest

class DatasetNotFoundError(CapmatchError):
    """Dataset root directory does not exist."""


class EmptyDatasetError(CapmatchError):
    """Directory scan produced zero image records."""


class MalformedLayoutError(CapmatchError):
    """Files found at the wrong depth of the domain/category tree."""


class EmptyResultError(CapmatchError):
    """A category filter removed every category."""


class ParseError(CapmatchError):
    """A manifest or captions file failed to parse; message carries location."""


# providers

class EmptyTokenError(CapmatchError):
    """Token vector requested for an empty token."""


class NoTokensError(CapmatchError):
    """Tokenization produced no usable tokens."""


class UnsupportedBinaryError(CapmatchError):
    """Reference provider was handed a non-UTF-8 (binary) file."""


class TransportError(CapmatchError):
    """Network failure talking to the inference service, after retries."""


class ServiceError(CapmatchError):
    """Inference service replied with a non-2xx status."""

    def __init__(self, status_code: int, message: str):
        super().__init__(f"service returned {status_code}: {message}")
        self.status_code = status_code


class CountMismatchError(CapmatchError):
    """Service returned a different number of results than requested."""


class EmptyCaptionError(CapmatchError):
    """Captioner produced an empty caption."""


# index store

class DuplicateIdError(CapmatchError):
    """Two entries share an id."""


class EmptyIndexError(CapmatchError):
    """An index cannot be built from zero entries."""


class BadMagicError(CapmatchError):
    """Index file does not start with the expected magic bytes."""


class VersionUnsupportedError(CapmatchError):
    """Index file version is not supported by this reader."""


class TruncatedError(CapmatchError):
    """Index file ends before the declared payload is complete."""


class ChecksumMismatchError(CapmatchError):
    """Index file checksum does not match its contents."""


# retrieval pipeline

class AllFailedError(CapmatchError):
    """Every item in a database pass failed."""


class PartialFailureError(CapmatchError):
    """Some items in a database pass failed; carries the survivors."""

    def __init__(self, failed_ids: list[str], records: list):
        super().__init__(f"{len(failed_ids)} item(s) failed: {failed_ids}")
        self.failed_ids = failed_ids
        self.records = records


class MissingCategoryError(CapmatchError):
    """Oracle captions requested for unlabeled images."""

    def __init__(self, ids: list[str]):
        super().__init__(f"unlabeled image(s): {ids}")
        self.ids = ids


# evaluation

class UnknownIdError(CapmatchError):
    """An id does not resolve within the manifest."""


class UnlabeledError(CapmatchError):
    """Relevance asked about an image without a category."""


class NoRelevantError(CapmatchError):
    """A query has zero relevant targets."""


class NoQueriesError(CapmatchError):
    """A domain pair has no query images."""


class NoTargetsError(CapmatchError):
    """A domain pair has no target images."""


class MissingLabelError(CapmatchError):
    """Embedding export is missing a label for an id."""
