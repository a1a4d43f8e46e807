from .builder import LoweringError, build_cfgs
from .dispatch import DispatchEntry, attach_dispatched, extract_dispatch_entries, is_controller_path
from .dot import to_dot
from .functions import FunctionDict, build_function_dictionary
from .inline import DEFAULT_MAX_INLINE_DEPTH, expand, inline_call, ret_name, shadow_name
from .nodes import (
    ASSIGNMENT, CALLSITE, CONDITION, ENTRY, EXIT, STATEMENT, CallInfo, Cfg, CfgNode, ExprInfo,
)

__all__ = [
    "LoweringError", "build_cfgs", "DispatchEntry", "attach_dispatched", "extract_dispatch_entries",
    "is_controller_path", "to_dot", "FunctionDict", "build_function_dictionary",
    "DEFAULT_MAX_INLINE_DEPTH", "expand", "inline_call", "ret_name", "shadow_name",
    "ASSIGNMENT", "CALLSITE", "CONDITION", "ENTRY", "EXIT", "STATEMENT",
    "CallInfo", "Cfg", "CfgNode", "ExprInfo",
]
