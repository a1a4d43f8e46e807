"""Control-flow graph construction, dispatch attachment and callee inlining."""

from .cfg import *  # noqa: F401,F403
from .cfg import __all__  # noqa: F401
