"""LuCI-specific filtering of flows by web reachability of their source."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..cfg.dispatch import is_controller_path
from ..cfg.functions import FunctionDict
from ..cfg.nodes import Cfg
from .engine import TaintFlow

HTTP_FAMILY = "luci.http."

KEEP_HTTP_SOURCE = "http-source"
KEEP_DISPATCHED = "dispatched-parameter"
KEEP_CONTROLLER = "controller-external"
DROP_CONSTANT = "constant-arguments"
DROP_UNREACHABLE = "not-web-reachable"
KEEP_REASONS = (KEEP_HTTP_SOURCE, KEEP_DISPATCHED, KEEP_CONTROLLER)


@dataclass
class CallSiteIndex:
    """Actual arguments at every internal (source-level) call of each function."""

    sites: dict = field(default_factory=dict)  # callee name -> list of actual-argument lists

    def add(self, callee: str, actuals: list) -> None:
        self.sites.setdefault(callee, []).append(actuals)

    def constant_everywhere(self, callee: str, position: int) -> bool:
        """True when the function has call sites and all pass a constant at ``position``."""
        calls = self.sites.get(callee)
        if not calls:
            return False
        for actuals in calls:
            if position < len(actuals) and not actuals[position].is_constant():
                return False
        return True


def build_call_site_index(cfgs: list[Cfg], fdict: FunctionDict) -> CallSiteIndex:
    index = CallSiteIndex()
    for cfg in cfgs:
        for node in cfg.nodes:
            for call in node.iter_calls():
                if call.ref or call.name is None:
                    continue
                callee = fdict.resolve(call.candidates)
                if callee is not None:
                    index.add(callee.name, call.actuals())
    return index


def _is_public_function(cfg: Cfg) -> bool:
    return not cfg.is_chunk and not cfg.is_local and not cfg.name.startswith("<anon:")


def apply_framework_rules(flow: TaintFlow, root: Cfg, call_sites: CallSiteIndex) -> tuple[bool, str]:
    """Decide whether a flow's source can stem from an HTTP request.

    Kept when the source is a ``luci.http.*`` interface, a parameter of a
    dispatcher-registered function, or an external source (trigger word, or
    parameter of a public function) inside a controller file. Otherwise the
    flow is dropped, as ``constant-arguments`` when every internal call site
    passes a constant for the tainted parameter, else ``not-web-reachable``.
    """
    src = flow.source
    if src.kind == "call" and src.name.startswith(HTTP_FAMILY):
        return True, KEEP_HTTP_SOURCE
    if src.kind == "param" and root.web_reachable:
        return True, KEEP_DISPATCHED
    if src.kind == "param":
        position = root.params.index(src.name) if src.name in root.params else -1
        if position >= 0 and call_sites.constant_everywhere(root.name, position):
            return False, DROP_CONSTANT
    if is_controller_path(root.source_path):
        if src.kind == "call" or _is_public_function(root):
            return True, KEEP_CONTROLLER
    return False, DROP_UNREACHABLE
