"""Sending probes to model endpoints.

Requests use a chat-completions style JSON body::

    POST {base_url}/chat/completions
    {"model": ..., "messages": [...], "temperature": 0, "top_p": 1.0,
     "stream": false}

``temperature`` 0 gives greedy decoding and ``top_p`` 1.0 disables nucleus
truncation. Responses are read from ``choices[0].message.content`` or, for
Ollama-native servers, ``message.content``.
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Sequence

import httpx

from .errors import ConfigInvalid, EndpointUnreachable, MalformedResponse
from .mocks import MockBehavior, mock_checkpoint_respond, mock_respond
from .probes import ProbeInstance
from .records import TrialRecord
from .scoring import ExtractionMode, score_response
from .templates import CHAT_SYSTEM_MESSAGE, COT_INSTRUCTION

log = logging.getLogger(__name__)

DEFAULT_RETRIES = 3
DEFAULT_BACKOFF_S = 0.5
DEFAULT_TIMEOUT_S = 120.0


class PromptWrapper(str, Enum):
    BARE = "bare"
    CHAT = "chat"
    COT = "cot"


@dataclass(frozen=True)
class ModelEndpoint:
    name: str
    family: str
    base_url: str = ""
    model_id: str = ""
    param_count: float | None = None  # billions
    transport: str = "http"
    mock: MockBehavior | None = None

    def __post_init__(self):
        if not self.family:
            raise ConfigInvalid(f"endpoint {self.name!r} has no family")
        if self.param_count is not None and self.param_count <= 0:
            raise ConfigInvalid(f"endpoint {self.name!r} has non-positive param_count")
        if self.transport not in ("http", "mock"):
            raise ConfigInvalid(f"endpoint {self.name!r}: unknown transport {self.transport!r}")
        if self.transport == "mock" and self.mock is None:
            raise ConfigInvalid(f"mock endpoint {self.name!r} needs a mock behavior")
        if self.transport == "http" and not self.base_url:
            raise ConfigInvalid(f"http endpoint {self.name!r} needs a base_url")

    def to_dict(self) -> dict:
        d = {"name": self.name, "family": self.family, "base_url": self.base_url,
             "model_id": self.model_id, "param_count": self.param_count, "transport": self.transport}
        if self.mock is not None:
            d["mock"] = self.mock.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelEndpoint":
        d = dict(d)
        if d.get("mock") is not None:
            d["mock"] = MockBehavior.from_dict(d["mock"])
        return cls(**d)


def load_roster(source) -> list[ModelEndpoint]:
    """Read an endpoint roster (JSON list, or ``{"endpoints": [...]}``).

    ``ENDPOINT_URL_<NAME>`` environment variables override base URLs; the
    name is upper-cased with non-alphanumerics replaced by underscores.
    """
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text())
    else:
        data = source
    if isinstance(data, dict):
        data = data.get("endpoints", [])
    endpoints = []
    for entry in data:
        entry = dict(entry)
        env_key = "ENDPOINT_URL_" + "".join(c if c.isalnum() else "_" for c in entry["name"]).upper()
        if os.environ.get(env_key):
            entry["base_url"] = os.environ[env_key]
        try:
            endpoints.append(ModelEndpoint.from_dict(entry))
        except TypeError as exc:
            raise ConfigInvalid(f"bad roster entry {entry.get('name')!r}: {exc}") from exc
    names = [e.name for e in endpoints]
    if len(set(names)) != len(names):
        raise ConfigInvalid("duplicate endpoint names in roster")
    return endpoints


def build_messages(user_text: str, wrapper: PromptWrapper | str) -> list[dict]:
    wrapper = PromptWrapper(wrapper)
    messages = []
    if wrapper is PromptWrapper.CHAT:
        messages.append({"role": "system", "content": CHAT_SYSTEM_MESSAGE})
    if wrapper is PromptWrapper.COT:
        user_text = f"{user_text}\n\n{COT_INSTRUCTION}"
    messages.append({"role": "user", "content": user_text})
    return messages


def render_request(probe: ProbeInstance, wrapper: PromptWrapper | str, model_id: str) -> dict:
    """The exact JSON body sent for ``probe``."""
    return request_body(build_messages(probe.prompt, wrapper), model_id)


def request_body(messages: list[dict], model_id: str) -> dict:
    return {
        "model": model_id,
        "messages": messages,
        "temperature": 0,
        "top_p": 1.0,
        "stream": False,
    }


class TransientError(Exception):
    """A failure worth retrying (connection error, timeout, 429/5xx)."""


class HttpTransport:
    def __init__(self, endpoint: ModelEndpoint, timeout_s: float = DEFAULT_TIMEOUT_S,
                 token: str | None = None):
        self.url = endpoint.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        token = token if token is not None else os.environ.get("ENDPOINT_TOKEN")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(timeout=timeout_s, headers=headers)
        self.calls = 0

    def send(self, body: dict, hint: Any = None) -> str:
        self.calls += 1
        try:
            resp = self._client.post(self.url, json=body)
        except httpx.TransportError as exc:
            raise TransientError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise MalformedResponse(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise MalformedResponse("response is not JSON") from exc
        return extract_content(payload)

    def close(self):
        self._client.close()


def extract_content(payload: Any) -> str:
    try:
        if "choices" in payload:
            content = payload["choices"][0]["message"]["content"]
        else:
            content = payload["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse("response has no message content") from exc
    if not isinstance(content, str):
        raise MalformedResponse("message content is not text")
    return content


class MockTransport:
    """Answers from a :class:`MockBehavior` without any network traffic."""

    def __init__(self, behavior: MockBehavior):
        self.behavior = behavior
        self.calls = 0

    def send(self, body: dict, hint: Any = None) -> str:
        self.calls += 1
        wrapper = _wrapper_of(body)
        if isinstance(hint, ProbeInstance):
            return mock_respond(self.behavior, hint, wrapper)
        if isinstance(hint, dict) and "expected" in hint:
            return mock_checkpoint_respond(self.behavior, hint, wrapper)
        return "OK."

    def close(self):
        pass


class ScriptedTransport:
    """Replays a fixed list of responses, or calls ``fn(body, hint)``."""

    def __init__(self, responses: Sequence[str] | Callable[[dict, Any], str]):
        self._responses = responses
        self._i = 0
        self._lock = threading.Lock()
        self.calls = 0

    def send(self, body: dict, hint: Any = None) -> str:
        with self._lock:
            self.calls += 1
            if callable(self._responses):
                return self._responses(body, hint)
            reply = self._responses[self._i % len(self._responses)]
            self._i += 1
            return reply

    def close(self):
        pass


def _wrapper_of(body: dict) -> str:
    msgs = body.get("messages", [])
    if any(m.get("role") == "system" for m in msgs):
        return "chat"
    if msgs and msgs[-1].get("content", "").endswith(COT_INSTRUCTION):
        return "cot"
    return "bare"


def make_transport(endpoint: ModelEndpoint, timeout_s: float = DEFAULT_TIMEOUT_S):
    if endpoint.transport == "mock":
        return MockTransport(endpoint.mock)
    return HttpTransport(endpoint, timeout_s=timeout_s)


@dataclass
class InflightMonitor:
    """Counts concurrent requests; ``peak`` is the highest seen."""

    current: int = 0
    peak: int = 0
    total: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def enter(self):
        with self._lock:
            self.current += 1
            self.total += 1
            self.peak = max(self.peak, self.current)

    def exit(self):
        with self._lock:
            self.current -= 1


def send_with_retries(transport, body: dict, hint: Any = None, retries: int = DEFAULT_RETRIES,
                      backoff_s: float = DEFAULT_BACKOFF_S, monitor: InflightMonitor | None = None):
    """Send one request, retrying transient failures.

    Returns ``(text, attempts)``. Raises :class:`EndpointUnreachable` once
    ``retries`` attempts have failed.
    """
    last = None
    for attempt in range(1, retries + 1):
        if monitor is not None:
            monitor.enter()
        try:
            return transport.send(body, hint), attempt
        except TransientError as exc:
            last = exc
            log.warning("transient failure (attempt %d/%d): %s", attempt, retries, exc)
        finally:
            if monitor is not None:
                monitor.exit()
        if attempt < retries and backoff_s > 0:
            time.sleep(backoff_s * 2 ** (attempt - 1))
    raise EndpointUnreachable(f"gave up after {retries} attempts: {last}")


def run_trials(
    probes: Sequence[ProbeInstance],
    endpoint: ModelEndpoint,
    wrapper: PromptWrapper | str = PromptWrapper.CHAT,
    parallelism: int = 1,
    *,
    retries: int = DEFAULT_RETRIES,
    backoff_s: float = DEFAULT_BACKOFF_S,
    timeout_s: float = DEFAULT_TIMEOUT_S,
    fail_fast: bool = False,
    mode: ExtractionMode | str = ExtractionMode.STRICT_LAST_NUMBER,
    transport=None,
    monitor: InflightMonitor | None = None,
) -> list[TrialRecord]:
    """Run every probe against ``endpoint``; one record per probe, in input order.

    Failed requests become records with ``error`` set and ``correct`` false,
    unless ``fail_fast`` is set, in which case :class:`EndpointUnreachable`
    propagates.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    wrapper = PromptWrapper(wrapper)
    own_transport = transport is None
    transport = transport or make_transport(endpoint, timeout_s)

    def one(probe: ProbeInstance) -> TrialRecord:
        body = render_request(probe, wrapper, endpoint.model_id or endpoint.name)
        stamp = datetime.now(timezone.utc).isoformat()
        t0 = time.perf_counter()
        attempts, error, raw = retries, None, ""
        try:
            raw, attempts = send_with_retries(transport, body, probe, retries, backoff_s, monitor)
        except EndpointUnreachable as exc:
            if fail_fast:
                raise
            error = f"EndpointUnreachable: {exc}"
        except MalformedResponse as exc:
            attempts, error = 1, f"MalformedResponse: {exc}"
        latency = (time.perf_counter() - t0) * 1000.0
        if error is None:
            extracted, correct, credit = score_response(raw, probe, mode)
        else:
            extracted, correct, credit = None, False, 0.0
        return TrialRecord(endpoint.name, probe.probe_id, wrapper.value, raw, extracted,
                           bool(correct), float(credit), latency, stamp, attempts, error)

    try:
        if parallelism == 1:
            return [one(p) for p in probes]
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(one, probes))
    finally:
        if own_transport:
            transport.close()
