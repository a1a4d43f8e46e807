"""The configurable source / sink / sanitizer vocabulary."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..cfg.nodes import CallInfo

VULN_TYPES = ("CI", "RCE", "PAT", "SQLI")


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = ""
        if path:
            where = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class Sink:
    name: str  # qualified name, or "*:method" for any method call of that name
    args: tuple  # 1-based tainted argument positions (receiver excluded)
    type: str

    @property
    def is_method_pattern(self) -> bool:
        return self.name.startswith("*:")


@dataclass
class TriggerWords:
    sources: tuple = ()
    sinks: tuple = ()
    sanitizers: tuple = ()
    _sink_by_name: dict = field(default_factory=dict, repr=False, compare=False)
    _sink_by_method: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.validate()
        self._sink_by_name = {s.name: s for s in self.sinks if not s.is_method_pattern}
        self._sink_by_method = {s.name[2:]: s for s in self.sinks if s.is_method_pattern}
        self.source_set = frozenset(self.sources)
        self.sanitizer_set = frozenset(self.sanitizers)

    def validate(self, text: str = "", path: Optional[str] = None) -> None:
        names = {}
        for kind, items in (("source", self.sources), ("sink", [s.name for s in self.sinks]),
                            ("sanitizer", self.sanitizers)):
            for name in items:
                if not isinstance(name, str) or not name:
                    raise ConfigError(f"{kind} names must be nonempty strings", path=path)
                if name in names and names[name] != kind:
                    raise ConfigError(
                        f"{name!r} is listed as both {names[name]} and {kind}",
                        line=_line_of(text, name), path=path,
                    )
                names[name] = kind
        for s in self.sinks:
            if s.type not in VULN_TYPES:
                raise ConfigError(f"sink {s.name!r}: type must be one of {', '.join(VULN_TYPES)}",
                                  line=_line_of(text, s.name), path=path)
            if not s.args or not all(isinstance(a, int) and a >= 1 for a in s.args):
                raise ConfigError(f"sink {s.name!r}: args must be a nonempty list of positions >= 1",
                                  line=_line_of(text, s.name), path=path)

    def match_sink(self, call: CallInfo) -> Optional[Sink]:
        if call.ref:
            return None
        if call.name is not None:
            s = self._sink_by_name.get(call.name)
            if s is not None:
                return s
        if call.method is not None:
            return self._sink_by_method.get(call.method)
        return None

    def is_source(self, call: CallInfo) -> bool:
        return call.name is not None and call.name in self.source_set

    def classify(self, sink_name: str) -> str:
        for s in self.sinks:
            if s.name == sink_name:
                return s.type
        raise KeyError(sink_name)

    def to_dict(self) -> dict:
        return {
            "sources": list(self.sources),
            "sinks": [{"name": s.name, "args": list(s.args), "type": s.type} for s in self.sinks],
            "sanitizers": list(self.sanitizers),
        }


DEFAULT_SOURCES = ("luci.http.formvalue", "os.getenv")
DEFAULT_SINKS = (
    Sink("os.execute", (1,), "CI"),
    Sink("io.popen", (1,), "CI"),
    Sink("luci.sys.call", (1,), "CI"),
    Sink("os.remove", (1,), "PAT"),
)
DEFAULT_SANITIZERS = ("luci.util.shellquote",)


def default_trigger_words() -> TriggerWords:
    return TriggerWords(DEFAULT_SOURCES, DEFAULT_SINKS, DEFAULT_SANITIZERS)


def _line_of(text: str, name: str) -> Optional[int]:
    if not text:
        return None
    m = re.search(re.escape(json.dumps(name)), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _parse_sink(item, text, path) -> Sink:
    if not isinstance(item, dict) or "name" not in item:
        raise ConfigError("sink entries must be objects with name, args and type", path=path)
    args = item.get("args", [1])
    if isinstance(args, int):
        args = [args]
    return Sink(str(item["name"]), tuple(args), str(item.get("type", "")))


def merge_trigger_words(base: TriggerWords, data: dict, text: str = "", path: Optional[str] = None) -> TriggerWords:
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", line=1, path=path)
    unknown = set(data) - {"sources", "sinks", "sanitizers", "description"}
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}", path=path)
    sources = list(base.sources)
    for s in data.get("sources", []):
        if s not in sources:
            sources.append(s)
    sinks = {s.name: s for s in base.sinks}
    for item in data.get("sinks", []):
        sink = _parse_sink(item, text, path)
        sinks[sink.name] = sink
    sanitizers = list(base.sanitizers)
    for s in data.get("sanitizers", []):
        if s not in sanitizers:
            sanitizers.append(s)
    tw = TriggerWords.__new__(TriggerWords)
    tw.sources, tw.sinks, tw.sanitizers = tuple(sources), tuple(sinks.values()), tuple(sanitizers)
    tw.validate(text, path)
    tw.__post_init__()
    return tw


def load_trigger_words(path=None, base: Optional[TriggerWords] = None) -> TriggerWords:
    """Built-in defaults, extended by the JSON file at ``path`` when given."""
    base = base or default_trigger_words()
    if path is None:
        return base
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read trigger-words file: {e.strerror}", path=str(path)) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(e.msg, line=e.lineno, path=str(path)) from e
    return merge_trigger_words(base, data, text, str(path))
