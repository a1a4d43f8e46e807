from .emit import call_path_text, emit, emit_json, emit_text, parse_json
from .model import FALSE_ALARM, TRUE_ALARM, UNEVALUATED, Finding, ScanReport, dedup, finding_id

__all__ = [
    "call_path_text", "emit", "emit_json", "emit_text", "parse_json", "FALSE_ALARM", "TRUE_ALARM",
    "UNEVALUATED", "Finding", "ScanReport", "dedup", "finding_id",
]
