"""Chat model backends: an OpenAI-style HTTP client and a scripted stand-in."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import httpx

from .. import _http
from ..errors import ExternalServiceError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChatClientSpec:
    kind: str = "scripted"
    endpoint: Optional[str] = None
    model_id: Optional[str] = None
    temperature: float = 0.0
    max_retries: int = 3
    script: tuple = ()
    api_key_env: str = _http.API_KEY_ENV
    timeout: float = 120.0
    backoff: float = 1.0
    proxy: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "script", tuple(self.script))
        if self.kind not in ("http", "scripted"):
            raise ValueError(f"unknown chat client kind {self.kind!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.kind == "http" and not (self.endpoint and self.model_id):
            raise ValueError("http chat client needs endpoint and model_id")
        if self.kind == "scripted" and not self.script:
            raise ValueError("scripted chat client needs a non-empty script")


class ChatClient(Protocol):
    calls: list

    def complete(self, messages: Sequence[dict]) -> str: ...


@dataclass
class Usage:
    requests: int = 0
    tokens: int = 0
    retries: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, requests=0, tokens=0, retries=0):
        with self._lock:
            self.requests += requests
            self.tokens += tokens
            self.retries += retries

    def to_dict(self) -> dict:
        return {"requests": self.requests, "tokens": self.tokens, "retries": self.retries}


def _rough_tokens(messages, reply: str) -> int:
    return sum(len(m["content"].split()) for m in messages) + len(reply.split())


class ScriptedClient:
    """Replays a fixed list of responses in order and records every request."""

    def __init__(self, script: Sequence[str], usage: Optional[Usage] = None):
        self.script = list(script)
        self.calls: list[list[dict]] = []
        self.usage = usage or Usage()

    def complete(self, messages: Sequence[dict]) -> str:
        messages = [dict(m) for m in messages]
        self.calls.append(messages)
        if len(self.calls) > len(self.script):
            raise ExternalServiceError(f"scripted client exhausted after {len(self.script)} responses")
        reply = self.script[len(self.calls) - 1]
        if isinstance(reply, BaseException):
            raise reply
        self.usage.add(requests=1, tokens=_rough_tokens(messages, reply))
        return reply


class HttpChatClient:
    """POSTs ``{"model", "temperature", "messages"}`` and returns the first choice's content."""

    def __init__(self, spec: ChatClientSpec, http_client: Optional[httpx.Client] = None,
                 limiter: Optional[_http.RateLimiter] = None, sleep=time.sleep,
                 usage: Optional[Usage] = None):
        self.spec = spec
        self.http = http_client or _http.make_http_client(spec.timeout, spec.proxy)
        self.limiter = limiter
        self.sleep = sleep
        self.calls: list[list[dict]] = []
        self.usage = usage or Usage()

    def complete(self, messages: Sequence[dict]) -> str:
        messages = [dict(m) for m in messages]
        self.calls.append(messages)
        payload = {"model": self.spec.model_id, "temperature": self.spec.temperature, "messages": messages}
        body, retries = _http.post_json(
            self.http, self.spec.endpoint, payload, _http.auth_headers(self.spec.api_key_env),
            max_retries=self.spec.max_retries, backoff=self.spec.backoff,
            sleep=self.sleep, limiter=self.limiter,
        )
        try:
            reply = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ExternalServiceError("chat response has no choices[0].message.content") from exc
        if not isinstance(reply, str):
            raise ExternalServiceError("chat response content is not a string")
        tokens = (body.get("usage") or {}).get("total_tokens") or _rough_tokens(messages, reply)
        self.usage.add(requests=1, tokens=int(tokens), retries=retries)
        return reply

    def close(self):
        self.http.close()


def build_client(spec: ChatClientSpec, limiter: Optional[_http.RateLimiter] = None,
                 usage: Optional[Usage] = None, http_client: Optional[httpx.Client] = None):
    if spec.kind == "scripted":
        return ScriptedClient(spec.script, usage)
    return HttpChatClient(spec, http_client=http_client, limiter=limiter, usage=usage)
