"""Exception hierarchy for the pipeline.

Every module raises subclasses of :class:`EsgClarityError`; the CLI maps
them to nonzero exit codes with a machine-readable error line.
"""


class EsgClarityError(Exception):
    """Base class for all pipeline errors."""


# corpus ingestion
class UnreadableFile(EsgClarityError):
    pass


class EmptyExtraction(EsgClarityError):
    """No text recoverable from a document (scanned/image-only PDF)."""


class NoSectionFound(EsgClarityError):
    pass


# relevance
class EmptyCorpus(EsgClarityError):
    pass


class SingleClassTrainingSet(EsgClarityError):
    pass


# clarity training
class SingleClassSet(EsgClarityError):
    pass


class MissingClass(EsgClarityError):
    pass


class NonFiniteLoss(EsgClarityError):
    pass


# annotation loop
class NTooLarge(EsgClarityError):
    pass


class UntrainedModel(EsgClarityError):
    pass


class UnknownSentence(EsgClarityError):
    pass


class DuplicateAnnotation(EsgClarityError):
    pass


class InsufficientOverlap(EsgClarityError):
    pass


class LabelTooSmall(EsgClarityError):
    pass


class NoUnresolvedSentences(EsgClarityError):
    pass


# zero-shot client
class ClientMisconfigured(EsgClarityError):
    pass


class TranscriptMissingEntry(EsgClarityError):
    pass


# reporting
class EmptyEvaluation(EsgClarityError):
    pass


# service / cli
class ConfigInvalid(EsgClarityError):
    pass


class InputMissing(EsgClarityError):
    pass


class Busy(EsgClarityError):
    """A background job is already running."""
