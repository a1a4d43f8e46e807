from .ast import Chunk, Node, Span
from .files import RootNotFound, collect_files
from .lexer import LuaSyntaxError, tokenize
from .parser import parse_chunk
from .prescan import DEFAULT_FIXUPS, Fixup, SourceFile, load_fixup_table, prescan_file, prescan_source, undo_fixups

__all__ = [
    "Chunk", "Node", "Span", "RootNotFound", "collect_files", "LuaSyntaxError", "tokenize",
    "parse_chunk", "DEFAULT_FIXUPS", "Fixup", "SourceFile", "load_fixup_table", "prescan_file",
    "prescan_source", "undo_fixups",
]
