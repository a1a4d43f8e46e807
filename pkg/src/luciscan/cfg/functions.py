"""The function dictionary used to resolve callees during inlining."""

from __future__ import annotations

from typing import Iterable, Iterator, Optional

from .nodes import Cfg


class FunctionDict:
    """Map from qualified function name to the Cfg that defines it.

    With ``approximate=True`` (the default) the dictionary is keyed by name
    alone and a later definition replaces an earlier one, so each lookup is
    a single hash probe. With ``approximate=False`` every definition instance
    is retained under its ``(name, file, line)`` key; resolving a name then
    has to examine every key and pick the last instance in processing order,
    which yields the same callee at a higher time and memory cost.
    """

    def __init__(self, approximate: bool = True):
        self.approximate = approximate
        self._by_name: dict[str, Cfg] = {}
        self._instances: dict[tuple, Cfg] = {}

    def add(self, cfg: Cfg) -> None:
        if cfg.is_chunk:
            return
        if self.approximate:
            self._by_name.pop(cfg.name, None)  # keep insertion order = last definition
            self._by_name[cfg.name] = cfg
        else:
            line = cfg.span.start_line if cfg.span is not None else 0
            key = (cfg.name, cfg.source_path, line)
            self._instances.pop(key, None)
            self._instances[key] = cfg

    def get(self, name: str) -> Optional[Cfg]:
        if self.approximate:
            return self._by_name.get(name)
        found = None
        for (key_name, _, _), cfg in self._instances.items():
            if key_name == name:
                found = cfg
        return found

    def resolve(self, candidates: Iterable[str]) -> Optional[Cfg]:
        for name in candidates:
            cfg = self.get(name)
            if cfg is not None:
                return cfg
        return None

    def __contains__(self, name: str) -> bool:
        return self.get(name) is not None

    def __getitem__(self, name: str) -> Cfg:
        cfg = self.get(name)
        if cfg is None:
            raise KeyError(name)
        return cfg

    def keys(self) -> list[str]:
        if self.approximate:
            return list(self._by_name)
        seen = {}
        for (name, _, _) in self._instances:
            seen.pop(name, None)
            seen[name] = None
        return list(seen)

    def __iter__(self) -> Iterator[str]:
        return iter(self.keys())

    def __len__(self) -> int:
        return len(self._by_name) if self.approximate else len(self.keys())

    @property
    def instance_count(self) -> int:
        return len(self._by_name) if self.approximate else len(self._instances)


def build_function_dictionary(cfgs: Iterable[Cfg], approximate: bool = True) -> FunctionDict:
    """Register every non-chunk Cfg in processing order (last definition wins)."""
    fd = FunctionDict(approximate)
    for cfg in cfgs:
        fd.add(cfg)
    return fd
