"""Chat-completions client (against a local stub server) and response simulator."""

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from foodsem.errors import ConfigError
from foodsem.evaluate import gold_from_pair, parse_ner_response, parse_response, score_nel
from foodsem.gateway import (
    CompletionResult,
    CorruptionProfile,
    GatewayConfig,
    complete_batch,
    simulate_response,
)
from foodsem.irpairs import build_ir_sequence
from foodsem.refs import Ontology, UriMode


class _StubState:
    def __init__(self):
        self.lock = threading.Lock()
        self.in_flight = 0
        self.max_in_flight = 0
        self.requests = []
        self.fail_next = 0  # respond 500 to this many requests
        self.fail_prompts = {}  # prompt content -> remaining 500s for it
        self.delay = 0.0


class _StubHandler(BaseHTTPRequestHandler):
    state: _StubState

    def do_POST(self):
        state = self.state
        with state.lock:
            state.in_flight += 1
            state.max_in_flight = max(state.max_in_flight, state.in_flight)
        try:
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length))
            prompt = body["messages"][0]["content"]
            with state.lock:
                body["_auth"] = self.headers.get("Authorization")
                state.requests.append(body)
                should_fail = state.fail_next > 0
                if should_fail:
                    state.fail_next -= 1
                elif state.fail_prompts.get(prompt, 0) > 0:
                    state.fail_prompts[prompt] -= 1
                    should_fail = True
            if state.delay:
                time.sleep(state.delay)
            if should_fail:
                self.send_response(500)
                self.end_headers()
                return
            content = f"echo: {body['messages'][0]['content']}"
            payload = json.dumps(
                {"choices": [{"message": {"role": "assistant", "content": content}}]}
            ).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)
        finally:
            with state.lock:
                state.in_flight -= 1

    def log_message(self, *args):  # quiet
        pass


@pytest.fixture()
def stub_server():
    state = _StubState()
    handler = type("Handler", (_StubHandler,), {"state": state})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
    yield url, state
    server.shutdown()
    thread.join(timeout=5)


def _config(url, **kw):
    defaults = dict(
        endpoint_url=url,
        model_name="stub-model",
        max_in_flight=3,
        max_attempts=3,
        backoff_base=0.01,
        request_timeout=10.0,
    )
    defaults.update(kw)
    return GatewayConfig(**defaults)


def test_batch_happy_path_preserves_order(stub_server):
    url, state = stub_server
    prompts = [(f"id{i}", f"prompt {i}") for i in range(7)]
    results = complete_batch(prompts, _config(url))
    assert [r.instance_id for r in results] == [f"id{i}" for i in range(7)]
    assert all(not r.failed for r in results)
    assert [r.text for r in results] == [f"echo: prompt {i}" for i in range(7)]
    assert all(r.attempts == 1 for r in results)
    assert all(r.latency_ms >= 0 for r in results)


def test_request_body_shape_and_auth(stub_server):
    url, state = stub_server
    config = _config(url, temperature=0.25, max_new_tokens=64, api_key="sekret")
    complete_batch([("a", "hello")], config)
    body = state.requests[0]
    assert body["model"] == "stub-model"
    assert body["messages"] == [{"role": "user", "content": "hello"}]
    assert body["temperature"] == 0.25
    assert body["max_tokens"] == 64
    assert body["_auth"] == "Bearer sekret"


def test_concurrency_bounded_by_max_in_flight(stub_server):
    url, state = stub_server
    state.delay = 0.1
    prompts = [(f"id{i}", f"p{i}") for i in range(9)]
    complete_batch(prompts, _config(url, max_in_flight=2))
    assert state.max_in_flight <= 2
    state.max_in_flight = 0
    complete_batch(prompts, _config(url, max_in_flight=4))
    assert state.max_in_flight <= 4
    assert state.max_in_flight >= 2  # actually ran concurrently


def test_retry_then_success(stub_server):
    url, state = stub_server
    state.fail_next = 1
    results = complete_batch([("a", "hi")], _config(url))
    assert results[0].attempts == 2
    assert not results[0].failed
    assert results[0].text == "echo: hi"


def test_exhausted_retries_flag_item(stub_server):
    url, state = stub_server
    state.fail_prompts = {"hi": 99}
    results = complete_batch([("a", "hi"), ("b", "ho")], _config(url))
    failed = {r.instance_id: r for r in results}
    assert failed["a"].failed
    assert failed["a"].text == ""
    assert failed["a"].attempts == 3
    assert not failed["b"].failed  # other items unaffected


def test_unreachable_endpoint_fails_all_items():
    config = _config("http://127.0.0.1:9/nothing", max_attempts=2)
    results = complete_batch([("a", "x")], config)
    assert results[0].failed
    assert results[0].attempts == 2


def test_transcript_written(stub_server, tmp_path):
    url, state = stub_server
    transcript = tmp_path / "transcript.jsonl"
    config = _config(url, transcript_path=transcript)
    complete_batch([("a", "one"), ("b", "two")], config)
    lines = [json.loads(l) for l in transcript.read_text().splitlines()]
    assert [l["instance_id"] for l in lines] == ["a", "b"]
    assert lines[0]["prompt"] == "one"
    assert lines[0]["response"] == "echo: one"
    assert lines[0]["attempts"] == 1


def test_empty_batch_returns_empty(stub_server):
    url, _ = stub_server
    assert complete_batch([], _config(url)) == []


def test_config_validation():
    with pytest.raises(ConfigError):
        GatewayConfig(endpoint_url="ftp://bad")
    with pytest.raises(ConfigError):
        GatewayConfig(endpoint_url="http://ok", max_in_flight=0)
    with pytest.raises(ConfigError):
        GatewayConfig(endpoint_url="http://ok", max_attempts=0)


def test_config_from_env(monkeypatch):
    monkeypatch.setenv("FOODSEM_ENDPOINT", "http://example.test/v1")
    monkeypatch.setenv("FOODSEM_MODEL", "m1")
    monkeypatch.setenv("FOODSEM_API_KEY", "k1")
    config = GatewayConfig.from_env(max_in_flight=2)
    assert config.endpoint_url == "http://example.test/v1"
    assert config.model_name == "m1"
    assert config.api_key == "k1"
    assert config.max_in_flight == 2


def test_config_from_env_requires_endpoint(monkeypatch):
    monkeypatch.delenv("FOODSEM_ENDPOINT", raising=False)
    with pytest.raises(ConfigError):
        GatewayConfig.from_env()


# ---------------------------------------------------------------------------
# Response simulator


@pytest.fixture(scope="module")
def toy_pairs(toy_bundles, pools):
    seqs = [build_ir_sequence(b, pools) for b in toy_bundles]
    return [p for s in seqs for p in s.pairs]


@pytest.fixture(scope="module")
def nel_pairs(toy_pairs):
    return [p for p in toy_pairs if p.ontology is not None]


def test_profile_validation():
    with pytest.raises(ConfigError):
        CorruptionProfile(p_drop_mention=1.2)
    with pytest.raises(ConfigError):
        CorruptionProfile(p_empty=-0.1)


def test_zero_corruption_reproduces_gold(nel_pairs):
    zero = CorruptionProfile()
    for pair in nel_pairs:
        text = simulate_response(pair, zero)
        pred = parse_response(text, pair.ontology, pair.pair_id)
        gi = gold_from_pair(pair)
        assert pred.entries == {m: set(refs) for m, refs in gi.entries.items()}, pair.pair_id


def test_zero_corruption_ner_reproduces_mentions(toy_pairs):
    zero = CorruptionProfile()
    for pair in (p for p in toy_pairs if p.ontology is None):
        mentions = parse_ner_response(simulate_response(pair, zero))
        assert mentions == list(pair.gold)


def test_empty_probability_one_gives_empty(nel_pairs):
    profile = CorruptionProfile(p_empty=1.0)
    for pair in nel_pairs[:10]:
        assert simulate_response(pair, profile) == ""


def test_corrupt_refs_zero_precision(nel_pairs):
    profile = CorruptionProfile(p_corrupt_ref=1.0, rng_seed=5)
    pairs = [p for p in nel_pairs if p.ontology is Ontology.FOODON][:20]
    gold = [gold_from_pair(p) for p in pairs]
    preds = [
        parse_response(simulate_response(p, profile), p.ontology, p.pair_id)
        for p in pairs
    ]
    report = score_nel(gold, preds)
    assert report.macro_weighted["precision"] == 0.0
    assert report.macro_weighted["recall"] == 0.0


def test_drop_mention_reduces_recall_not_precision(nel_pairs):
    profile = CorruptionProfile(p_drop_mention=0.5, rng_seed=5)
    pairs = [p for p in nel_pairs if p.ontology is Ontology.HANSARD]
    gold = [gold_from_pair(p) for p in pairs]
    preds = [
        parse_response(simulate_response(p, profile), p.ontology, p.pair_id)
        for p in pairs
    ]
    report = score_nel(gold, preds)
    assert report.macro_weighted["recall"] < 1.0
    # surviving mentions keep their exact gold refs, so nothing spurious
    assert all(s.fp == 0 for s in report.per_entity.values())
    assert report.macro_weighted["precision"] >= report.macro_weighted["recall"]


def test_format_noise_keeps_content_parseable(nel_pairs):
    profile = CorruptionProfile(p_format_noise=1.0, rng_seed=11)
    for pair in nel_pairs:
        text = simulate_response(pair, profile)
        pred = parse_response(text, pair.ontology, pair.pair_id)
        gi = gold_from_pair(pair)
        assert pred.entries == {m: set(refs) for m, refs in gi.entries.items()}, pair.pair_id


def test_simulation_is_deterministic(nel_pairs):
    profile = CorruptionProfile(0.3, 0.3, 0.3, 0.1, rng_seed=7)
    first = [simulate_response(p, profile) for p in nel_pairs]
    second = [simulate_response(p, profile) for p in nel_pairs]
    assert first == second


def test_simulate_requires_gold():
    from foodsem.irpairs import IRPair, PairSource, TaskKind

    pair = IRPair(
        pair_id="g/0",
        task=TaskKind.GENERAL,
        instruction="say hi",
        response="hi there.",
        gold=None,
        source=PairSource.GENERAL,
        source_id="g/0",
    )
    with pytest.raises(ConfigError):
        simulate_response(pair, CorruptionProfile())
