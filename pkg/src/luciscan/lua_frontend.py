"""Lua source frontend: file discovery, escape prescan, lexer and parser."""

from .frontend import *  # noqa: F401,F403
from .frontend import __all__  # noqa: F401
