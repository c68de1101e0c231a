import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import httpx
import pytest

from stn_analyst.llm_client import (
    AuthError,
    ChatClient,
    EndpointError,
    LLMConfig,
    RateLimitError,
    ResponseFormatError,
    TokenBucket,
    build_payload,
    complete,
)
from stn_analyst.prompt_engine import Attachment, RenderedPrompt
from stn_analyst.stubs import ScriptedTransport, envelope, stub_transport

CONFIG = LLMConfig("http://stub.local/v1/chat/completions", "stub-model", api_key_env="STN_TEST_KEY")
PROMPT = RenderedPrompt("A", "[DATA]\nhello\n")


def client(transport, sleeps=None, **kw):
    sleeps = [] if sleeps is None else sleeps
    return ChatClient(kw.pop("config", CONFIG), transport=transport, sleep=sleeps.append, **kw)


def test_echo_returns_prompt_verbatim():
    with client(stub_transport("echo")) as c:
        reply = c.complete(PROMPT)
    assert reply.text == PROMPT.text
    assert reply.model_id == "stub-model"
    assert reply.attempts == 1


def test_payload_bytes_are_the_rendered_prompt():
    prompt = RenderedPrompt("C2", "plot it\n", (Attachment("configuration.csv", "a,b\n1,2\n"),))
    transport = ScriptedTransport([(200, "ok")])
    with client(transport) as c:
        c.complete(prompt)
    body = json.loads(transport.requests[0].content)
    assert body == build_payload(prompt, CONFIG)
    assert body["messages"][0]["content"].encode() == prompt.message_content().encode()
    assert body["temperature"] == 0.0


def test_api_key_header(monkeypatch):
    monkeypatch.setenv("STN_TEST_KEY", "sk-test")
    transport = ScriptedTransport([(200, "ok")])
    with client(transport) as c:
        c.complete(PROMPT)
    assert transport.requests[0].headers["Authorization"] == "Bearer sk-test"


def test_no_key_no_header(monkeypatch):
    monkeypatch.delenv("STN_TEST_KEY", raising=False)
    transport = ScriptedTransport([(200, "ok")])
    with client(transport) as c:
        c.complete(PROMPT)
    assert "Authorization" not in transport.requests[0].headers


@pytest.mark.parametrize("status", [401, 403])
def test_auth_failure_is_not_retried(status):
    transport = ScriptedTransport([(status, "no"), (200, "never")])
    with client(transport) as c:
        with pytest.raises(AuthError):
            c.complete(PROMPT)
        assert len(c.attempts) == 1


def test_rate_limit_then_success():
    sleeps = []
    transport = ScriptedTransport([(429, "slow down"), (200, "fine")])
    with client(transport, sleeps) as c:
        reply = c.complete(PROMPT)
        assert [a.status for a in c.attempts] == [429, 200]
    assert reply.text == "fine"
    assert reply.attempts == 2
    assert sleeps == [1.0]


def test_retry_after_header_is_honoured():
    sleeps = []

    def handle(request):
        if not sleeps:
            return httpx.Response(429, headers={"Retry-After": "7"})
        return httpx.Response(200, json=envelope("ok"))

    with client(httpx.MockTransport(handle), sleeps) as c:
        c.complete(PROMPT)
    assert sleeps == [7.0]


def test_retries_are_capped_with_backoff():
    sleeps = []
    transport = ScriptedTransport([(503, "down")] * 10)
    with client(transport, sleeps, config=LLMConfig("http://x", "m", retries=3), backoff=0.5) as c:
        with pytest.raises(EndpointError):
            c.complete(PROMPT)
        assert len(c.attempts) == 4
    assert sleeps == [0.5, 1.0, 2.0]


def test_rate_limit_exhaustion():
    transport = ScriptedTransport([(429, "")] * 3)
    with client(transport, config=LLMConfig("http://x", "m", retries=2)) as c:
        with pytest.raises(RateLimitError):
            c.complete(PROMPT)


def test_network_error_is_retried():
    calls = []

    def handle(request):
        calls.append(1)
        if len(calls) == 1:
            raise httpx.ConnectError("refused", request=request)
        return httpx.Response(200, json=envelope("ok"))

    with client(httpx.MockTransport(handle)) as c:
        assert c.complete(PROMPT).text == "ok"
        assert c.attempts[0].status is None


@pytest.mark.parametrize("body", [{"choices": []}, {"nope": 1}, {"choices": [{"message": {"content": 3}}]}])
def test_malformed_envelope(body):
    transport = httpx.MockTransport(lambda r: httpx.Response(200, json=body))
    with client(transport) as c:
        with pytest.raises(ResponseFormatError):
            c.complete(PROMPT)
        assert len(c.attempts) == 1


def test_non_json_body():
    transport = httpx.MockTransport(lambda r: httpx.Response(200, text="<html>"))
    with client(transport) as c:
        with pytest.raises(ResponseFormatError):
            c.complete(PROMPT)


def test_transcript_is_jsonl(tmp_path):
    path = tmp_path / "t.jsonl"
    with client(ScriptedTransport([(200, "one"), (401, "")]), transcript_path=path) as c:
        c.complete(PROMPT)
        with pytest.raises(AuthError):
            c.complete(PROMPT)
    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert records[0]["reply"] == "one"
    assert records[0]["request"]["messages"][0]["content"] == PROMPT.text
    assert records[1]["reply"] is None and "401" in records[1]["error"]


def test_config_validation():
    with pytest.raises(ValueError):
        LLMConfig("", "m")
    with pytest.raises(ValueError):
        LLMConfig("http://x", "m", retries=9)
    with pytest.raises(ValueError, match="colour"):
        LLMConfig.from_dict({"endpoint_url": "http://x", "model_id": "m", "colour": 1})
    assert LLMConfig.from_dict({"endpoint_url": "http://x", "model_id": "m", "temperature": 0.5}).temperature == 0.5


def test_token_bucket_paces_requests():
    now = [0.0]
    waits = []

    def sleep(dt):
        waits.append(dt)
        now[0] += dt

    bucket = TokenBucket(2.0, capacity=1, clock=lambda: now[0], sleep=sleep)
    for _ in range(3):
        bucket.acquire()
    assert waits == [0.5, 0.5]


def test_real_http_server():
    seen = []

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            seen.append(body)
            data = json.dumps(envelope(body["messages"][0]["content"].upper())).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, *args):
            pass

    server = HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        config = LLMConfig(f"http://127.0.0.1:{server.server_port}/v1/chat/completions", "local", timeout=5)
        reply = complete(PROMPT, config)
    finally:
        server.shutdown()
        server.server_close()
    assert reply.text == PROMPT.text.upper()
    assert seen[0]["model"] == "local"
