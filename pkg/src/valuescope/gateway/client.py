"""Chat-completion client with retries, a concurrency cap and cost accounting."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from typing import Any

from ..exceptions import AuthenticationError, ConfigError, TransientError, TransportError

logger = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "VALUESCOPE_API_KEY"


@dataclass(frozen=True)
class PriceSheet:
    """USD per one million tokens."""

    input_price: float
    output_price: float

    def __post_init__(self):
        if self.input_price < 0 or self.output_price < 0:
            raise ConfigError("prices must be non-negative")


def estimate_cost(input_tokens: float, output_tokens: float, price: PriceSheet) -> float:
    return input_tokens * price.input_price / 1e6 + output_tokens * price.output_price / 1e6


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.2
    max_tokens: int | None = None

    @classmethod
    def from_prompt(cls, prompt: str, temperature: float = 0.2, system: str | None = None) -> "ChatRequest":
        msgs = ((("system", system),) if system else ()) + (("user", prompt),)
        return cls(messages=msgs, temperature=temperature)


@dataclass(frozen=True)
class ChatExchange:
    request: ChatRequest
    response: str
    input_tokens: int
    output_tokens: int
    attempts: int = 1
    approximate_tokens: bool = False

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")


def whitespace_tokens(text: str) -> int:
    """Crude token proxy used when the endpoint reports no usage."""
    return len(text.split())


Transport = Callable[[ChatRequest], dict]
"""Sends one request; returns ``{"text": str, "input_tokens": int|None, "output_tokens": int|None}``.

Raises :class:`TransientError` for retryable failures and
:class:`AuthenticationError` for credential failures.
"""


def exponential_backoff(base: float = 1.0, factor: float = 2.0, cap: float = 60.0) -> Callable[[int], float]:
    return lambda retry: min(cap, base * factor**retry)


@dataclass
class Usage:
    requests: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    approximate: bool = False

    def cost(self, price: PriceSheet | None) -> float | None:
        return None if price is None else estimate_cost(self.input_tokens, self.output_tokens, price)


@dataclass
class ChatClient:
    transport: Transport
    max_retries: int = 3
    backoff: Callable[[int], float] = field(default_factory=exponential_backoff)
    max_in_flight: int = 4
    price: PriceSheet | None = None
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        self._slots = threading.BoundedSemaphore(self.max_in_flight)
        self._lock = threading.Lock()
        self.usage = Usage()

    def complete(self, request: ChatRequest) -> ChatExchange:
        return complete_with_retry(self, request)

    def complete_text(self, prompt: str, temperature: float = 0.2) -> str:
        return self.complete(ChatRequest.from_prompt(prompt, temperature)).response

    def _record(self, exchange: ChatExchange) -> None:
        with self._lock:
            self.usage.requests += 1
            self.usage.input_tokens += exchange.input_tokens
            self.usage.output_tokens += exchange.output_tokens
            self.usage.approximate |= exchange.approximate_tokens


def complete_with_retry(
    client: ChatClient,
    request: ChatRequest,
    max_retries: int | None = None,
    backoff: Callable[[int], float] | None = None,
) -> ChatExchange:
    """Send ``request``, retrying transient failures with backoff.

    At most ``max_retries + 1`` attempts are made. Authentication failures are
    raised immediately. On exhaustion a :class:`TransportError` carrying the
    last cause is raised.
    """
    retries = client.max_retries if max_retries is None else max_retries
    delay = client.backoff if backoff is None else backoff
    last: Exception | None = None
    for attempt in range(retries + 1):
        if attempt:
            client.sleep(delay(attempt - 1))
        try:
            with client._slots:
                raw = client.transport(request)
        except AuthenticationError:
            raise
        except TransientError as exc:
            last = exc
            logger.warning("transient failure (attempt %d/%d): %s", attempt + 1, retries + 1, exc)
            continue
        text = raw["text"]
        approx = raw.get("input_tokens") is None or raw.get("output_tokens") is None
        in_tok = raw.get("input_tokens")
        out_tok = raw.get("output_tokens")
        if in_tok is None:
            in_tok = sum(whitespace_tokens(m) for _, m in request.messages)
        if out_tok is None:
            out_tok = whitespace_tokens(text)
        exchange = ChatExchange(request, text, int(in_tok), int(out_tok), attempts=attempt + 1, approximate_tokens=approx)
        client._record(exchange)
        return exchange
    raise TransportError(f"request failed after {retries + 1} attempts: {last}", last_error=last, attempts=retries + 1) from last


class HttpChatTransport:
    """Posts OpenAI-style chat-completion payloads to a configurable endpoint."""

    def __init__(self, url: str, model: str, api_key_env: str = DEFAULT_API_KEY_ENV, timeout: float = 60.0):
        if not url or not model:
            raise ConfigError("endpoint url and model are required")
        self.url = url
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise AuthenticationError(f"environment variable {self.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def payload(self, request: ChatRequest) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
        }
        if request.max_tokens is not None:
            body["max_tokens"] = request.max_tokens
        return body

    def __call__(self, request: ChatRequest) -> dict:
        data = json.dumps(self.payload(request)).encode("utf-8")
        req = urllib.request.Request(self.url, data=data, headers=self._headers(), method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                obj = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            if exc.code in (401, 403):
                raise AuthenticationError(f"HTTP {exc.code} from {self.url}") from exc
            if exc.code == 429 or exc.code >= 500:
                raise TransientError(f"HTTP {exc.code} from {self.url}") from exc
            raise TransportError(f"HTTP {exc.code} from {self.url}", last_error=exc, attempts=1) from exc
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            raise TransientError(str(exc)) from exc
        usage = obj.get("usage") or {}
        return {
            "text": obj["choices"][0]["message"]["content"],
            "input_tokens": usage.get("prompt_tokens"),
            "output_tokens": usage.get("completion_tokens"),
        }


class HttpScoringTransport:
    """JSON scoring endpoint for perplexity / similarity / preference models.

    Sends ``{"task": ..., "inputs": [...]}`` and expects ``{"scores": [...]}``.
    """

    def __init__(self, url: str, task: str, api_key_env: str = DEFAULT_API_KEY_ENV, timeout: float = 60.0):
        if not url:
            raise ConfigError("scoring endpoint url is required")
        self.url, self.task, self.api_key_env, self.timeout = url, task, api_key_env, timeout

    def score(self, inputs: Iterable[Any]) -> list[float]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        data = json.dumps({"task": self.task, "inputs": list(inputs)}).encode("utf-8")
        req = urllib.request.Request(self.url, data=data, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return [float(s) for s in json.loads(resp.read().decode("utf-8"))["scores"]]
        except urllib.error.URLError as exc:
            raise TransportError(f"scoring request to {self.url} failed: {exc}", last_error=exc) from exc
