"""Source-to-sink taint tracking, sanitizer checks and framework rules."""

from .taint.engine import (  # noqa: F401
    CONSTANT, SOURCE_TAINTED, UNKNOWN, SourceLeaf, TaintAnalyzer, analyze_flows, backtrack_argument,
    find_sinks, is_sanitized, propagate_taint,
)
from .taint.triggers import default_trigger_words  # noqa: F401

__all__ = [
    "CONSTANT", "SOURCE_TAINTED", "UNKNOWN", "SourceLeaf", "TaintAnalyzer", "analyze_flows",
    "backtrack_argument", "find_sinks", "is_sanitized", "propagate_taint", "default_trigger_words",
]
