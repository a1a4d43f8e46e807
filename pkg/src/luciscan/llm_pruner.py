"""Optional false-positive pruning by LLM majority vote."""

from .llm import (  # noqa: F401
    ContextTooLarge, LlmClient, PruneRequest, ServiceUnavailable, VoteTally, build_prompt, parse_verdict,
    prune, prune_findings, tally,
)

__all__ = [
    "ContextTooLarge", "LlmClient", "PruneRequest", "ServiceUnavailable", "VoteTally", "build_prompt",
    "parse_verdict", "prune", "prune_findings", "tally",
]
