"""Spare-parts forecasting engine.

Propagates uncertain failure rates through a part and assembly tree as
three-element range sets, enumerates random/wearout mode scenarios with
collapse and pruning, optimizes sparing level and stocking, and escalates
unresolvable uncertainty to a human operator.
"""

from .config import DEFAULT_CONFIG, EngineConfig, load_config
from .errors import SparecastError
from .parts import Document, PartTree, load_document, load_tree, serialize_document
from .pipeline import PipelineResult, run_pipeline
from .rates import (
    FailureMode,
    ModeType,
    RangeEstimate,
    Severity,
    combine_mixed,
    combine_random,
    combine_wearout,
    scale,
)
from .revision import Edit, Hotspot, Session, SessionStore, session_diff
from .scenarios import (
    ScenarioDistribution,
    ScenarioEntry,
    ScenarioSummary,
    enumerate_scenarios,
    exceedance,
    recollapse,
    summarize,
)

__all__ = [
    "DEFAULT_CONFIG",
    "Document",
    "Edit",
    "EngineConfig",
    "FailureMode",
    "Hotspot",
    "ModeType",
    "PartTree",
    "PipelineResult",
    "RangeEstimate",
    "ScenarioDistribution",
    "ScenarioEntry",
    "ScenarioSummary",
    "Session",
    "SessionStore",
    "Severity",
    "SparecastError",
    "combine_mixed",
    "combine_random",
    "combine_wearout",
    "enumerate_scenarios",
    "exceedance",
    "load_config",
    "load_document",
    "load_tree",
    "recollapse",
    "run_pipeline",
    "scale",
    "serialize_document",
    "session_diff",
    "summarize",
]

__version__ = "0.1.0"
