"""readgaze: gaze-stream analytics for reading behavior.

Projects raw screen-space gaze onto page coordinates, detects fixations
and saccades, computes reading metrics, classifies reading-behavior
archetypes with from-scratch models, and serves an annotation API.
"""

from __future__ import annotations

from .core import (
    BehaviorLabel,
    DocumentLayout,
    Fixation,
    GazeSample,
    PagePoint,
    PageRect,
    Saccade,
    SaccadeClass,
    Segment,
    ValidationReport,
    validate_session,
)

__version__ = "1.0.0"

__all__ = [
    "BehaviorLabel",
    "DocumentLayout",
    "Fixation",
    "GazeSample",
    "PagePoint",
    "PageRect",
    "Saccade",
    "SaccadeClass",
    "Segment",
    "ValidationReport",
    "validate_session",
    "__version__",
]
