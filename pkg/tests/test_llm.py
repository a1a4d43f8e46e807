"""LLM pruning mechanics against a local mock chat-completions server (no network, no key)."""

from __future__ import annotations

import itertools
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from luciscan.llm import (
    INSTRUCTION, UNPARSEABLE, LlmClient, PruneRequest, ServiceUnavailable, _function_spans, build_prompt,
    function_sources, parse_verdict, prune, tally,
)
from luciscan.pipeline import LlmOptions, ScanConfig, scan
from luciscan.report.model import FALSE_ALARM, TRUE_ALARM, UNEVALUATED

from conftest import scan_tree, stage_reference
from test_report import make_finding


class MockService:
    """Chat-completions endpoint whose answers come from ``responder(prompt) -> (status, text)``."""

    def __init__(self, responder):
        self.responder = responder
        self.requests: list = []
        self.lock = threading.Lock()
        service = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                with service.lock:
                    service.requests.append({"body": body, "auth": self.headers.get("Authorization")})
                    status, text = service.responder(body["messages"][0]["content"])
                payload = json.dumps({"choices": [{"message": {"role": "assistant", "content": text}}],
                                      "usage": {"prompt_tokens": 100, "completion_tokens": 7}}).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_port}/v1/chat/completions"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def mock_service():
    services = []

    def start(responder):
        s = MockService(responder)
        services.append(s)
        return s

    yield start
    for s in services:
        s.close()


def scripted(*answers):
    """Responder cycling through ``answers`` (shared across prompts, in request order)."""
    it = itertools.cycle(answers)
    return lambda prompt: (200, next(it))


def client_for(service, **kw) -> LlmClient:
    return LlmClient(service.url, "mock-model", sleep=lambda s: None, **kw)


# -- verdict parsing and tallies ----------------------------------------------------


@pytest.mark.parametrize("text, verdict", [
    ("TRUE_ALARM — the parameter flows unsanitized", TRUE_ALARM),
    ("false_alarm: input is shellquoted", FALSE_ALARM),
    ("It depends.", UNPARSEABLE),
    ("TRUE_ALARM or FALSE_ALARM, hard to say", UNPARSEABLE),
    ("Verdict: True_Alarm. Also TRUE_ALARM again.", TRUE_ALARM),
    ("", UNPARSEABLE),
])
def test_parse_verdict(text, verdict):
    assert parse_verdict(text) == verdict


def test_tally_majority_and_confidence():
    t = tally([TRUE_ALARM, TRUE_ALARM, FALSE_ALARM, TRUE_ALARM, FALSE_ALARM])
    assert (t.label, t.confidence) == (TRUE_ALARM, 0.6)
    assert tally([FALSE_ALARM] * 5).label == FALSE_ALARM


def test_tally_tie_goes_to_true_alarm():
    t = tally([TRUE_ALARM, TRUE_ALARM, FALSE_ALARM, FALSE_ALARM, UNPARSEABLE])
    assert t.label == TRUE_ALARM and t.confidence == 0.4


def test_tally_no_usable_votes_or_outage_is_unevaluated():
    assert tally([UNPARSEABLE] * 5).label == UNEVALUATED
    assert tally([TRUE_ALARM] * 4 + [UNPARSEABLE], failed=True).label == UNEVALUATED


# -- prompts ---------------------------------------------------------------------------


def test_listing5_prompt(tmp_path, reference_text):
    stage_reference(tmp_path, ["listing5_commands.lua"])
    result = scan_tree(tmp_path)
    (finding,) = result.report.findings
    functions = function_sources(finding, result.files, _function_spans(result.roots))
    req = build_prompt(finding, functions, "mock-model")
    body = "\n".join(reference_text("listing5_commands.lua").splitlines()[1:])
    assert body in req.prompt_text
    assert "`os.remove`" in req.prompt_text and req.prompt_text.rstrip().endswith(INSTRUCTION)
    assert req.prompt_text.count("```lua") == 1 and not req.truncated
    assert req.temperature == 0.0 and req.finding_id == finding.id
    assert build_prompt(finding, functions, "mock-model") == req


def test_long_chain_truncates_middle_and_keeps_endpoints():
    funcs = [(f"fn{i:02d}", f"function fn{i:02d}(x)\n" + "  local pad = 'xxxxxxxxxxxxxxxx'\n" * 10 + "end")
             for i in range(50)]
    chain = [{"file": "a.lua", "line": i + 1, "function": name, "excerpt": f"v{i} = v{i - 1}"}
             for i, (name, _) in enumerate(funcs)]
    finding = make_finding(function="fn49")
    finding.chain = chain
    full = build_prompt(finding, funcs, context_limit=10 ** 6)
    assert not full.truncated
    req = build_prompt(finding, funcs, context_limit=len(full.prompt_text) // 3)
    assert req.truncated and len(req.prompt_text) <= len(full.prompt_text) // 3
    assert funcs[0][1] in req.prompt_text and funcs[-1][1] in req.prompt_text
    assert "omitted to fit the context limit" in req.prompt_text
    assert req.prompt_text.endswith(INSTRUCTION)


# -- transport and pruning against the mock -------------------------------------------


def _prompts(findings, text="same prompt"):
    return {f.id: PruneRequest(f.id, text, "mock-model") for f in findings}


def test_client_request_shape(mock_service):
    svc = mock_service(scripted("TRUE_ALARM"))
    client = client_for(svc, api_key="sekret")
    assert client.complete("hello") == "TRUE_ALARM"
    (req,) = svc.requests
    assert req["body"]["temperature"] == 0 and req["body"]["model"] == "mock-model"
    assert req["body"]["messages"] == [{"role": "user", "content": "hello"}]
    assert req["auth"] == "Bearer sekret"
    assert (client.prompt_tokens, client.completion_tokens) == (100, 7)


def test_api_key_only_from_environment(monkeypatch):
    monkeypatch.setenv("LUCISCAN_LLM_API_KEY", "from-env")
    assert LlmClient.from_options(LlmOptions()).api_key == "from-env"
    monkeypatch.delenv("LUCISCAN_LLM_API_KEY")
    assert LlmClient.from_options(LlmOptions()).api_key is None


def test_always_false_alarm_is_pruned_not_deleted(mock_service):
    svc = mock_service(scripted("FALSE_ALARM: constant input"))
    findings = [make_finding()]
    kept, pruned, _ = prune(findings, client_for(svc), _prompts(findings))
    assert kept == [] and pruned == findings
    assert pruned[0].llm_votes[FALSE_ALARM] == 5 and pruned[0].llm_confidence == 1.0


def test_majority_t_t_f_t_f(mock_service):
    svc = mock_service(scripted("TRUE_ALARM", "TRUE_ALARM", "FALSE_ALARM", "TRUE_ALARM", "FALSE_ALARM"))
    findings = [make_finding()]
    kept, pruned, _ = prune(findings, client_for(svc), _prompts(findings), max_in_flight=1)
    assert pruned == [] and kept[0].llm_label == TRUE_ALARM and kept[0].llm_confidence == 0.6


def test_gibberish_is_unevaluated_and_kept(mock_service):
    svc = mock_service(scripted("Hmm, maybe?"))
    findings = [make_finding()]
    kept, pruned, _ = prune(findings, client_for(svc), _prompts(findings))
    assert kept[0].llm_label == UNEVALUATED and kept[0].llm_votes[UNPARSEABLE] == 5


def test_duplicate_prompts_cost_exactly_one_vote_round(mock_service):
    svc = mock_service(scripted("TRUE_ALARM"))
    findings = [make_finding(file=f"img{i}/a.lua") for i in range(7)]
    kept, _, tallies = prune(findings, client_for(svc), _prompts(findings), votes=5)
    assert len(svc.requests) == 5 and len(tallies) == 1
    assert all(f.llm_label == TRUE_ALARM for f in kept)


def test_distinct_prompts_queried_separately(mock_service):
    svc = mock_service(lambda prompt: (200, "FALSE_ALARM" if "B" in prompt else "TRUE_ALARM"))
    a, b = make_finding(file="a.lua"), make_finding(file="b.lua")
    prompts = {a.id: PruneRequest(a.id, "prompt A", "m"), b.id: PruneRequest(b.id, "prompt B", "m")}
    kept, pruned, _ = prune([a, b], client_for(svc), prompts, votes=3)
    assert len(svc.requests) == 6 and kept == [a] and pruned == [b]


def test_outage_retries_with_capped_backoff_then_unevaluated(mock_service):
    svc = mock_service(lambda prompt: (503, "overloaded"))
    sleeps = []
    client = LlmClient(svc.url, "m", sleep=sleeps.append, backoff=1.0, backoff_cap=1.5)
    with pytest.raises(ServiceUnavailable):
        client.complete("x")
    assert len(svc.requests) == 3 and sleeps == [1.0, 1.5]
    findings = [make_finding()]
    kept, pruned, _ = prune(findings, client, _prompts(findings))
    assert pruned == [] and kept[0].llm_label == UNEVALUATED


def test_unreachable_endpoint_is_unevaluated():
    client = LlmClient("http://127.0.0.1:9/v1/chat/completions", "m", timeout=0.5, sleep=lambda s: None)
    findings = [make_finding()]
    kept, pruned, _ = prune(findings, client, _prompts(findings), votes=2)
    assert kept == findings and kept[0].llm_label == UNEVALUATED


@pytest.mark.parametrize("answer", ["TRUE_ALARM", "FALSE_ALARM", "no idea"])
def test_scan_never_deletes(tmp_path, mock_service, answer):
    stage_reference(tmp_path)
    baseline = scan_tree(tmp_path).report
    svc = mock_service(scripted(answer))
    options = LlmOptions(endpoint=svc.url, model="mock-model")
    result = scan(ScanConfig(str(tmp_path), llm=options), llm_client=client_for(svc))
    report = result.report
    assert len(report.findings) + len(report.pruned) == len(baseline.findings) == 4
    assert {f.id for f in report.findings + report.pruned} == {f.id for f in baseline.findings}
    assert report.stats["llm"]["unique_prompts"] == len(svc.requests) // 5
    if answer == "FALSE_ALARM":
        assert report.findings == [] and result.exit_code == 0
    else:
        assert report.pruned == []
