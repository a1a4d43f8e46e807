from __future__ import annotations

import fnmatch
import logging
import os
from pathlib import Path

log = logging.getLogger(__name__)

LUCI_SUBTREE = "usr/lib/lua/luci"
DEFAULT_PATTERNS = ("**/*.lua",)


class RootNotFound(FileNotFoundError):
    pass


def _matches(rel: str, pattern: str) -> bool:
    if fnmatch.fnmatchcase(rel, pattern):
        return True
    # "**/" also matches zero directories
    if pattern.startswith("**/") and fnmatch.fnmatchcase(rel, pattern[3:]):
        return True
    return False


def collect_files(
    root,
    patterns=DEFAULT_PATTERNS,
    exclude=(),
    luci_only: bool = False,
    warnings: list | None = None,
) -> list[str]:
    """Return root-relative POSIX paths of matching files, sorted.

    Unreadable directories and files are reported through ``warnings``
    (as ``(path, message)`` tuples) and skipped.
    """
    root = Path(root)
    if not root.is_dir():
        raise RootNotFound(f"scan root not found: {root}")
    base = root
    if luci_only and (root / LUCI_SUBTREE).is_dir():
        base = root / LUCI_SUBTREE

    def onerror(err: OSError) -> None:
        rel = os.path.relpath(err.filename, root) if err.filename else str(err)
        if warnings is not None:
            warnings.append((Path(rel).as_posix(), f"PermissionDenied: {err.strerror}"))
        log.warning("cannot read %s: %s", rel, err.strerror)

    found = []
    for dirpath, dirnames, filenames in os.walk(base, onerror=onerror):
        dirnames.sort()
        for fname in filenames:
            full = Path(dirpath) / fname
            rel = full.relative_to(root).as_posix()
            if not any(_matches(rel, p) for p in patterns):
                continue
            if any(_matches(rel, p) for p in exclude):
                continue
            if not os.access(full, os.R_OK):
                if warnings is not None:
                    warnings.append((rel, "PermissionDenied: file is not readable"))
                continue
            found.append(rel)
    return sorted(found)
