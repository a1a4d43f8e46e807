"""Static taint analysis for Lua/LuCI firmware trees."""

__version__ = "0.1.0"
