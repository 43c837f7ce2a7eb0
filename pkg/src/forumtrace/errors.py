"""Exception hierarchy shared by all forumtrace components."""

from __future__ import annotations


class ForumTraceError(Exception):
    """Base class for every domain error raised by this package."""


# --- use-model validation ---------------------------------------------------

class UseModelError(ForumTraceError):
    """A use model violates one of its structural invariants."""


class UndeclaredActivityError(UseModelError):
    """A rule or initial entry references an activity that is not declared."""


class EmptyObservablesError(UseModelError):
    """An activity declares no observable objects."""


class AmbiguousRuleError(UseModelError):
    """Two transition rules share the same (activity, object, kind) trigger."""


class NoInitialActivityError(UseModelError):
    """The model declares no activity enterable at session start."""


class UseModelDocumentError(UseModelError):
    """A use-model document could not be parsed into a model."""


# --- event and trace structuring --------------------------------------------

class InvalidEventError(ForumTraceError):
    """A raw event violates a field invariant (bad kind, ratio, timestamp...)."""


class StructuringError(ForumTraceError):
    """An event stream could not be folded into a trace."""


class EmptyStreamError(StructuringError):
    """The event stream contains no events."""


class NoInitialMatchError(StructuringError):
    """No event in the stream can open a first state."""


class PathOutOfBoundsError(ForumTraceError):
    """An annotation path points outside the trace sequence."""


class TraceInvariantError(ForumTraceError):
    """A trace violates alternation, linkage, or ordering invariants."""


# --- clock sync and batching ------------------------------------------------

class SkewTooLargeError(ForumTraceError):
    """A client batch reports a clock offset beyond the accepted maximum."""


# --- repository ---------------------------------------------------------------

class RepositoryError(ForumTraceError):
    """Base class for persistent store failures."""


class DuplicateTraceIdError(RepositoryError):
    """A trace with this id is already stored."""


class DuplicateEventError(RepositoryError):
    """An event with this id is already stored under a different delivery."""


class InvalidWindowError(ForumTraceError):
    """A time window has from_ms > to_ms."""


class DocumentParseError(RepositoryError):
    """An export document is malformed and cannot be imported."""


class UnsupportedFormatError(RepositoryError):
    """The requested format cannot be used for this operation."""


class ActivityInUseError(RepositoryError):
    """The activity is referenced by stored traces or rules and cannot go."""


class UnauthorizedError(ForumTraceError):
    """The caller's role does not permit this operation."""


# --- analysis -----------------------------------------------------------------

class WrongActivityError(ForumTraceError):
    """A reading operation was applied to a state of the wrong activity."""


class ReadingOutsideWindowError(ForumTraceError):
    """A reading record falls outside the requested timeline window."""


class NonPositiveScaleError(ForumTraceError):
    """A timeline scale factor must be strictly positive."""


# --- ingest service -----------------------------------------------------------

class UnknownSessionError(ForumTraceError):
    """No events are recorded for the requested session."""


class StructuringFailedError(ForumTraceError):
    """Finalization failed because the session's events cannot be structured."""


# --- scenario simulation --------------------------------------------------------

class InvalidSpecError(ForumTraceError):
    """A scenario spec is internally inconsistent or does not fit its window."""


class ScenarioFileError(ForumTraceError):
    """A scenario event file is malformed."""


class TargetUnreachableError(ForumTraceError):
    """The replay target rejected the connection."""
