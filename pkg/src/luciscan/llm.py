"""Optional alarm pruning by repeated votes of a chat-completion model.

Each unique prompt is sent ``votes`` times to an OpenAI-compatible
``/chat/completions`` endpoint at temperature 0. Verdict tokens are counted;
ties resolve to TRUE_ALARM so a possible bug is never silently dropped.
Findings labeled FALSE_ALARM are moved to the report's ``pruned`` section.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

from .report.model import FALSE_ALARM, TRUE_ALARM, UNEVALUATED

log = logging.getLogger(__name__)

UNPARSEABLE = "UNPARSEABLE"
INSTRUCTION = "Answer exactly TRUE_ALARM or FALSE_ALARM, then justify."
PREAMBLE = (
    "You are a security auditor reviewing an alarm raised by a static taint analyzer "
    "for Lua code from an embedded-device web interface (OpenWrt LuCI). Decide whether "
    "attacker-controlled data really reaches the dangerous call without adequate "
    "validation or sanitization."
)
TYPE_NAMES = {"CI": "command injection", "RCE": "remote code execution",
              "PAT": "path traversal", "SQLI": "SQL injection"}
_VERDICT = re.compile(r"(TRUE_ALARM|FALSE_ALARM)", re.IGNORECASE)


class ServiceUnavailable(RuntimeError):
    pass


class ContextTooLarge(ValueError):
    pass


def parse_verdict(text: str) -> str:
    """TRUE_ALARM / FALSE_ALARM from the first verdict token; both present -> UNPARSEABLE."""
    found = {m.group(1).upper() for m in _VERDICT.finditer(text or "")}
    if len(found) != 1:
        return UNPARSEABLE
    return found.pop()


@dataclass
class PruneRequest:
    finding_id: str
    prompt_text: str
    model: str
    temperature: float = 0.0
    truncated: bool = False


@dataclass
class VoteTally:
    votes: list = field(default_factory=list)
    label: str = UNEVALUATED
    confidence: float = 0.0

    def counts(self) -> dict:
        return {k: self.votes.count(k) for k in (TRUE_ALARM, FALSE_ALARM, UNPARSEABLE)}


def tally(votes: list, failed: bool = False) -> VoteTally:
    """Majority label; ties go to TRUE_ALARM; no usable votes (or an outage) -> UNEVALUATED."""
    t = votes.count(TRUE_ALARM)
    f = votes.count(FALSE_ALARM)
    if failed or t + f == 0:
        return VoteTally(list(votes), UNEVALUATED, 0.0)
    label = TRUE_ALARM if t >= f else FALSE_ALARM
    return VoteTally(list(votes), label, round(max(t, f) / len(votes), 6))


# -- prompt construction -----------------------------------------------------------

def _fence(name: str, code: str) -> str:
    return f"Function `{name}`:\n```lua\n{code.rstrip()}\n```"


def build_prompt(finding, functions: list, model: str = "gpt-4", context_limit: int = 24000) -> PruneRequest:
    """Deterministic prompt for one finding.

    ``functions`` is the ordered list of ``(name, source)`` for every function
    on the flow, source function first and sink function last. When the
    prompt exceeds ``context_limit`` characters, middle functions are replaced
    by a placeholder until it fits; the endpoints are always kept whole.
    """
    chain_lines = [f"  {i}. {c['function']}: {c['excerpt']}" for i, c in enumerate(finding.chain, 1)]
    vt = TYPE_NAMES.get(finding.type, finding.type)
    head = [
        PREAMBLE,
        "",
        f"Suspected vulnerability: {vt} ({finding.type}).",
        f"Sink: `{finding.sink['name']}` (argument {finding.sink['arg']}) in function `{finding.function}`.",
        f"Source: `{finding.source['name']}` ({finding.source['kind']}).",
        "Source-to-sink chain:",
        *chain_lines,
        "",
        "Code of the functions on the chain:",
        "",
    ]
    tail = ["", INSTRUCTION]

    def render(bodies: list) -> str:
        return "\n".join(head + ["\n\n".join(bodies)] + tail)

    bodies = [_fence(n, code) for n, code in functions]
    text = render(bodies)
    truncated = False
    if len(text) > context_limit and len(bodies) > 2:
        middle = list(range(1, len(bodies) - 1))
        # drop from the centre outwards so functions near the endpoints survive longest
        middle.sort(key=lambda i: abs(i - (len(bodies) - 1) / 2))
        for i in middle:
            bodies[i] = f"Function `{functions[i][0]}`: (omitted to fit the context limit)"
            truncated = True
            text = render(bodies)
            if len(text) <= context_limit:
                break
    return PruneRequest(finding.id, text, model, 0.0, truncated)


def function_sources(finding, texts: dict, spans: dict) -> list:
    """``(name, code)`` for the functions on a finding's flow, source first, sink last."""
    order: list = []
    for c in finding.chain[:-1]:
        key = (c["function"], c["file"])
        if key not in order:
            order.append(key)
    for c in finding.call_path:
        key = (c["function"], c["file"])
        if key not in order:
            order.append(key)
    sink_key = (finding.function, finding.file)
    if sink_key in order:
        order.remove(sink_key)
    order.append(sink_key)
    out = []
    for name, path in order:
        text = texts.get(path)
        if text is None:
            continue
        lines = text.splitlines()
        start, end = spans.get((name, path), (1, len(lines)))
        out.append((name, "\n".join(lines[start - 1:end])))
    return out


# -- transport --------------------------------------------------------------------

class LlmClient:
    """Minimal OpenAI-compatible chat-completions client (stdlib HTTP)."""

    def __init__(self, endpoint: str, model: str, api_key: Optional[str] = None, timeout: float = 60.0,
                 attempts: int = 3, backoff: float = 0.5, backoff_cap: float = 4.0,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self.backoff_cap = backoff_cap
        self.sleep = sleep
        self.lock = threading.Lock()
        self.requests = 0
        self.prompt_tokens = 0
        self.completion_tokens = 0

    @classmethod
    def from_options(cls, options) -> "LlmClient":
        return cls(options.endpoint, options.model, os.environ.get(options.api_key_env),
                   timeout=options.timeout)

    def _post(self, prompt: str) -> dict:
        body = json.dumps({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        }).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))

    def complete(self, prompt: str) -> str:
        last: Optional[Exception] = None
        for attempt in range(self.attempts):
            with self.lock:
                self.requests += 1
            try:
                data = self._post(prompt)
                text = data["choices"][0]["message"]["content"]
                usage = data.get("usage") or {}
                with self.lock:
                    self.prompt_tokens += int(usage.get("prompt_tokens", len(prompt) // 4))
                    self.completion_tokens += int(usage.get("completion_tokens", len(text) // 4))
                return text
            except (urllib.error.URLError, OSError, ValueError, KeyError, IndexError, TypeError) as e:
                last = e
                if attempt + 1 < self.attempts:
                    self.sleep(min(self.backoff_cap, self.backoff * (2 ** attempt)))
        raise ServiceUnavailable(f"LLM endpoint failed after {self.attempts} attempts: {last}")


# -- pruning ---------------------------------------------------------------------

def vote(client, prompt: str, votes: int) -> VoteTally:
    results, failed = [], False
    for _ in range(votes):
        try:
            results.append(parse_verdict(client.complete(prompt)))
        except ServiceUnavailable as e:
            log.warning("%s", e)
            results.append(UNPARSEABLE)
            failed = True
    return tally(results, failed)


def prune(findings: list, client, prompts: dict, votes: int = 5, max_in_flight: int = 4):
    """Label findings by majority vote; identical prompts are queried once.

    ``prompts`` maps finding id -> PruneRequest. Returns ``(kept, pruned,
    tallies)`` where ``tallies`` maps prompt text -> VoteTally.
    """
    unique = []
    for f in findings:
        p = prompts[f.id].prompt_text
        if p not in unique:
            unique.append(p)
    with ThreadPoolExecutor(max(1, max_in_flight)) as pool:
        results = list(pool.map(lambda p: vote(client, p, votes), unique))
    tallies = dict(zip(unique, results))
    kept, pruned = [], []
    for f in findings:
        t = tallies[prompts[f.id].prompt_text]
        f.llm_label = t.label
        f.llm_votes = t.counts()
        f.llm_confidence = t.confidence
        (pruned if t.label == FALSE_ALARM else kept).append(f)
    return kept, pruned, tallies


def _function_spans(roots: list) -> dict:
    from .pipeline import _display_name
    spans = {}
    for cfg in roots:
        if cfg.span is not None:
            name = _display_name(cfg.name, cfg.source_path)
            spans[(name, cfg.source_path)] = (cfg.span.start_line, cfg.span.end_line)
    return spans


def prune_findings(findings: list, texts: dict, roots: list, options, client=None):
    """Pipeline entry point: build prompts, vote, and split findings."""
    client = client or LlmClient.from_options(options)
    spans = _function_spans(roots)
    prompts = {}
    for f in findings:
        prompts[f.id] = build_prompt(f, function_sources(f, texts, spans), options.model,
                                     options.context_limit)
    kept, pruned, tallies = prune(findings, client, prompts, options.votes, options.max_in_flight)
    stats = {
        "unique_prompts": len(tallies),
        "requests": getattr(client, "requests", 0),
        "prompt_tokens": getattr(client, "prompt_tokens", 0),
        "completion_tokens": getattr(client, "completion_tokens", 0),
        "truncated_prompts": sum(1 for p in prompts.values() if p.truncated),
        "unevaluated": sum(1 for f in kept if f.llm_label == UNEVALUATED),
    }
    return kept, pruned, stats
