"""Field-sensitive reaching-definitions analysis."""

from .dataflow import ConstraintTable, IterationBudgetExceeded, analyze, dump_reaching, join, reaching_in, transfer

__all__ = ["ConstraintTable", "IterationBudgetExceeded", "analyze", "dump_reaching", "join", "reaching_in", "transfer"]
