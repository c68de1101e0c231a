"""Minimal chat-completions client.

Speaks the common ``/v1/chat/completions`` JSON protocol, so the same code
talks to hosted models and to local open-model servers. Attachments are
inlined into the user message, the text is never altered, and every attempt
is logged on the client.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass
from typing import Callable

import httpx

from .prompt_engine import RenderedPrompt

log = logging.getLogger(__name__)

MAX_RETRIES = 5


class LLMError(RuntimeError):
    """Base class for endpoint failures."""

    retryable = False


class AuthError(LLMError):
    pass


class RateLimitError(LLMError):
    retryable = True


class EndpointError(LLMError):
    """Network failure or 5xx reply."""

    retryable = True


class ResponseFormatError(LLMError):
    """Reply body is not a chat-completions envelope."""


@dataclass(frozen=True)
class LLMConfig:
    endpoint_url: str
    model_id: str
    temperature: float = 0.0
    max_tokens: int = 1024
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    retries: int = 3
    requests_per_second: float | None = None

    def __post_init__(self):
        if not self.endpoint_url:
            raise ValueError("endpoint_url must not be empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 <= self.retries <= MAX_RETRIES:
            raise ValueError(f"retries must be in [0, {MAX_RETRIES}]")

    @classmethod
    def from_dict(cls, data: dict) -> "LLMConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown LLM config key(s): {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass(frozen=True)
class LLMReply:
    text: str
    model_id: str
    latency: float
    attempts: int = 1


@dataclass
class Attempt:
    number: int
    status: int | None
    error: str | None = None


class TokenBucket:
    """Thread-safe token bucket; ``acquire`` blocks until a token is free."""

    def __init__(self, rate: float, capacity: float | None = None, clock=time.monotonic, sleep=time.sleep):
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self.tokens = self.capacity
        self.clock = clock
        self.sleep = sleep
        self.stamp = clock()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.stamp) * self.rate)
                self.stamp = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            self.sleep(wait)


_buckets: dict[str, TokenBucket] = {}
_buckets_lock = threading.Lock()


def bucket_for(endpoint: str, rate: float) -> TokenBucket:
    """One shared bucket per endpoint URL."""
    with _buckets_lock:
        if endpoint not in _buckets:
            _buckets[endpoint] = TokenBucket(rate)
        return _buckets[endpoint]


def build_payload(prompt: RenderedPrompt, config: LLMConfig) -> dict:
    return {
        "model": config.model_id,
        "messages": [{"role": "user", "content": prompt.message_content()}],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }


def _reply_text(body) -> str:
    try:
        content = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ResponseFormatError(f"unexpected response envelope: {str(body)[:200]}") from None
    if not isinstance(content, str):
        raise ResponseFormatError("message content is not text")
    return content


class ChatClient:
    """Chat-completions client for one endpoint configuration.

    Pass ``transport`` (any ``httpx`` transport) to talk to an in-process
    stub instead of the network. ``attempts`` records every HTTP attempt.
    """

    def __init__(
        self,
        config: LLMConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        backoff: float = 1.0,
        transcript_path: str | os.PathLike | None = None,
    ):
        self.config = config
        self.sleep = sleep
        self.backoff = backoff
        self.transcript_path = transcript_path
        self.attempts: list[Attempt] = []
        self._http = httpx.Client(transport=transport, timeout=config.timeout)
        self._lock = threading.Lock()
        self._bucket = bucket_for(config.endpoint_url, config.requests_per_second) if config.requests_per_second else None

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env) if self.config.api_key_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _record(self, number, status, error=None):
        with self._lock:
            self.attempts.append(Attempt(number, status, error))

    def _post(self, payload: dict, number: int) -> str:
        if self._bucket is not None:
            self._bucket.acquire()
        try:
            resp = self._http.post(self.config.endpoint_url, json=payload, headers=self._headers())
        except httpx.HTTPError as exc:
            self._record(number, None, str(exc))
            raise EndpointError(f"request failed: {exc}") from exc
        self._record(number, resp.status_code)
        if resp.status_code in (401, 403):
            raise AuthError(f"endpoint refused credentials (HTTP {resp.status_code})")
        if resp.status_code == 429:
            retry_after = resp.headers.get("Retry-After")
            err = RateLimitError("rate limited (HTTP 429)")
            try:
                err.retry_after = float(retry_after) if retry_after else None
            except ValueError:
                err.retry_after = None
            raise err
        if resp.status_code >= 500:
            raise EndpointError(f"server error (HTTP {resp.status_code})")
        if resp.status_code >= 400:
            raise LLMError(f"request rejected (HTTP {resp.status_code}): {resp.text[:200]}")
        try:
            body = resp.json()
        except ValueError:
            raise ResponseFormatError("response body is not JSON") from None
        return _reply_text(body)

    def complete(self, prompt: RenderedPrompt) -> LLMReply:
        payload = build_payload(prompt, self.config)
        start = time.perf_counter()
        for number in range(1, self.config.retries + 2):
            try:
                text = self._post(payload, number)
            except LLMError as exc:
                if not exc.retryable or number > self.config.retries:
                    self._write_transcript(payload, None, str(exc))
                    raise
                delay = getattr(exc, "retry_after", None) or self.backoff * 2 ** (number - 1)
                log.warning("attempt %d failed (%s); retrying in %.1fs", number, exc, delay)
                self.sleep(delay)
                continue
            reply = LLMReply(text, self.config.model_id, time.perf_counter() - start, number)
            self._write_transcript(payload, reply)
            return reply
        raise AssertionError("unreachable")

    def _write_transcript(self, payload, reply: LLMReply | None, error: str | None = None):
        if self.transcript_path is None:
            return
        record = {"request": payload, "reply": reply.text if reply else None, "error": error}
        if reply:
            record["attempts"] = reply.attempts
        with self._lock, open(self.transcript_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def complete(prompt: RenderedPrompt, config: LLMConfig, **client_kwargs) -> LLMReply:
    """One-shot helper: open a client, send ``prompt``, close."""
    with ChatClient(config, **client_kwargs) as client:
        return client.complete(prompt)


def reply_to_dict(reply: LLMReply) -> dict:
    return asdict(reply)
