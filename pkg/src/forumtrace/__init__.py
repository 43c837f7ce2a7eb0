"""Forum activity tracing: collection, structuring, storage, analytics."""

from .analysis import (
    Completeness,
    ParticipationSummary,
    ReadingRecord,
    Sphere,
    SphereTimeline,
    Window,
    build_sphere_timeline,
    classify_reading,
    detect_lurkers,
    extract_readings,
    participation_summary,
    reading_duration,
)
from .config import ServiceConfig, load_config
from .exporters import ExportFormat
from .model import (
    ActivityType,
    Annotation,
    EventKind,
    EventSource,
    InteractionObject,
    ObjectClass,
    ObservableObject,
    Quarantined,
    RawEvent,
    Side,
    State,
    Trace,
    Transition,
    TransitionRule,
    UseModel,
    ValidatedUseModel,
    default_forum_use_model,
    load_use_model,
    use_model_to_doc,
    validate_trace,
    validate_use_model,
)
from .repository import (
    Principal,
    QueryFilter,
    Role,
    StoredTrace,
    TraceRepository,
)
from .service import Ack, AckStatus, TracingService
from .simulate import ScenarioKind, ScenarioSpec, generate, parse_scenario, replay
from .structuring import (
    Classification,
    ClassificationKind,
    StructuredTrace,
    annotate,
    classify_event,
    structure_trace,
)
from .sync import ClientBatch, Registration, adjust_clock, merge_streams, register_batch

__version__ = "0.1.0"
