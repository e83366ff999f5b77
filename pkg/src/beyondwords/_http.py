"""JSON-over-HTTP POST with retry/backoff, shared by embedding and chat clients."""

from __future__ import annotations

import logging
import os
import threading
import time
from typing import Callable, Optional

import httpx

from .errors import ExternalServiceError

log = logging.getLogger(__name__)

RETRY_STATUS = frozenset({429, 500, 502, 503, 504})
API_KEY_ENV = "BEYONDWORDS_API_KEY"
PROXY_ENV = "BEYONDWORDS_PROXY"


class RateLimiter:
    """Minimum spacing between requests, shared by every thread holding it."""

    def __init__(self, min_interval: float = 0.0, clock=time.monotonic, sleep=time.sleep):
        self.min_interval = min_interval
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = self._clock()
            delay = self._next - now
            self._next = max(now, self._next) + self.min_interval
        if delay > 0:
            self._sleep(delay)


def make_http_client(timeout: float = 60.0, proxy: Optional[str] = None,
                     transport: Optional[httpx.BaseTransport] = None) -> httpx.Client:
    proxy = proxy or os.environ.get(PROXY_ENV) or None
    kwargs = {"timeout": timeout}
    if transport is not None:
        kwargs["transport"] = transport
    elif proxy:
        kwargs["proxy"] = proxy
    return httpx.Client(**kwargs)


def auth_headers(api_key_env: str = API_KEY_ENV) -> dict:
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(api_key_env)
    if key:
        headers["Authorization"] = f"Bearer {key}"
    return headers


def post_json(
    client: httpx.Client,
    url: str,
    payload: dict,
    headers: Optional[dict] = None,
    max_retries: int = 3,
    backoff: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
    limiter: Optional[RateLimiter] = None,
) -> tuple[dict, int]:
    """POST ``payload`` and return ``(decoded body, retries used)``.

    429, 5xx and transport errors are retried up to ``max_retries`` times with
    exponential backoff; anything else fails immediately.
    """
    attempt = 0
    while True:
        if limiter is not None:
            limiter.wait()
        try:
            resp = client.post(url, json=payload, headers=headers)
        except httpx.TransportError as exc:
            reason = f"transport error: {exc}"
        else:
            if resp.status_code < 400:
                try:
                    return resp.json(), attempt
                except ValueError as exc:
                    raise ExternalServiceError(f"{url}: response is not JSON") from exc
            if resp.status_code not in RETRY_STATUS:
                raise ExternalServiceError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
            reason = f"HTTP {resp.status_code}"
        if attempt >= max_retries:
            raise ExternalServiceError(f"{url}: giving up after {attempt} retries ({reason})")
        delay = backoff * (2 ** attempt)
        attempt += 1
        log.warning("retry %d/%d for %s after %s; sleeping %.2fs", attempt, max_retries, url, reason, delay)
        sleep(delay)
