"""Typed errors shared across the pipeline."""


class P2mError(Exception):
    """Base class for all pipeline errors."""


class EmptyPrompt(P2mError):
    pass


class MalformedDemonstration(P2mError):
    pass


class DuplicateCardId(P2mError):
    pass


class UnknownCard(P2mError):
    pass


class MissingColumn(P2mError):
    pass


class BothSourcesEmpty(P2mError):
    pass


class ExhaustedTranscript(P2mError):
    pass


class LengthMismatch(P2mError):
    pass


class DegenerateRanking(P2mError):
    pass


class TrainerCrashed(P2mError):
    pass


class ArtifactProbeFailed(P2mError):
    pass


class ArtifactUnavailable(P2mError):
    pass


class InvalidTransition(P2mError):
    pass


class WorkspaceUnwritable(P2mError):
    pass


class EmbedderFailure(P2mError):
    pass
