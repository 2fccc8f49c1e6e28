"""Chat-completion client for any OpenAI-compatible HTTP endpoint.

One client serves both the generator and improver roles; the roles differ
only in prompt content (a run may still configure distinct endpoints per
role).  The per-call seed sent to the backend is ``base_seed + call_counter``
so runs are replayable against seed-respecting servers.  The client never
rewrites prompt text: bytes in are bytes sent.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from typing import Any

import requests

from archloop.model import SamplingParams

DEFAULT_API_KEY_ENV = "ARCHLOOP_API_KEY"

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class LlmError(Exception):
    """Base class for client failures."""


class TransportError(LlmError):
    """Network or HTTP failure that persisted through all retries."""


class EmptyResponseError(LlmError):
    """The backend returned a zero-length completion."""


@dataclass(frozen=True)
class LlmEndpoint:
    """Connection settings for one chat-completions backend."""

    base_url: str
    model_name: str
    api_key_env: str | None = DEFAULT_API_KEY_ENV
    request_timeout: float = 120.0
    max_retries: int = 3
    retry_backoff: float = 1.0
    debug_log_path: str | None = None

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @property
    def completions_url(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"

    def to_dict(self) -> dict[str, Any]:
        return {
            "base_url": self.base_url,
            "model_name": self.model_name,
            "api_key_env": self.api_key_env,
            "request_timeout": self.request_timeout,
            "max_retries": self.max_retries,
            "retry_backoff": self.retry_backoff,
            "debug_log_path": self.debug_log_path,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LlmEndpoint":
        return cls(**dict(data))


class LlmClient:
    """Blocking chat-completion calls with bounded exponential-backoff retries."""

    def __init__(self, endpoint: LlmEndpoint, session: requests.Session | None = None):
        self.endpoint = endpoint
        self._session = session or requests.Session()

    def complete(self, system_prompt: str, user_prompt: str, params: SamplingParams) -> str:
        messages = []
        if system_prompt:
            messages.append({"role": "system", "content": system_prompt})
        messages.append({"role": "user", "content": user_prompt})
        body = {
            "model": self.endpoint.model_name,
            "messages": messages,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "max_tokens": params.max_new_tokens,
            "seed": params.effective_seed,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.endpoint.api_key_env, "") if self.endpoint.api_key_env else ""
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        for attempt in range(self.endpoint.max_retries + 1):
            if attempt > 0:
                time.sleep(self.endpoint.retry_backoff * 2 ** (attempt - 1))
            try:
                response = self._session.post(
                    self.endpoint.completions_url,
                    headers=headers,
                    json=body,
                    timeout=self.endpoint.request_timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            self._mirror(body, response.status_code, response.text)
            if response.status_code in _RETRYABLE_STATUS:
                last_error = TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
                continue
            if response.status_code != 200:
                raise TransportError(f"HTTP {response.status_code}: {response.text[:200]}")
            try:
                content = response.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                last_error = TransportError(f"malformed completion payload: {exc}")
                continue
            if content is None or content == "":
                raise EmptyResponseError("backend returned an empty completion")
            return content
        raise TransportError(f"request failed after {self.endpoint.max_retries + 1} attempts: {last_error}")

    def _mirror(self, body: dict[str, Any], status: int, response_text: str) -> None:
        if not self.endpoint.debug_log_path:
            return
        entry = {"request": body, "status": status, "response": response_text}
        with open(self.endpoint.debug_log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
