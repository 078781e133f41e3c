"""Single gateway for model traffic: live HTTP client, response cache, replay.

Every request is content-addressed by a digest of its semantic fields; the
cache and the replay fixture store share one layout (one JSON file per
digest), so a directory recorded by the caching transport replays verbatim.
"""

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .prompts import RenderedPrompt

DEFAULT_MAX_TOKENS = 2048

# Absent seeds hash as a sentinel so seeded and unseeded requests never collide.
_UNSEEDED = "__unseeded__"


class TransportError(Exception):
    """Base for all transport failures."""


class RetryableTransportError(TransportError):
    """Network trouble that persisted past the retry budget."""


class PermanentTransportError(TransportError):
    """4xx response; retrying cannot help."""

    def __init__(self, status_code: int, body: str):
        super().__init__(f"permanent transport error {status_code}: {body[:500]}")
        self.status_code = status_code
        self.body = body


class FixtureMissingError(TransportError):
    """Replay store has no recording for the request digest."""

    def __init__(self, digest: str):
        super().__init__(f"no recorded fixture for digest {digest}")
        self.digest = digest


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    prompt: RenderedPrompt
    temperature: float
    num_samples: int = 1
    max_tokens: int = DEFAULT_MAX_TOKENS
    seed: int | None = None

    def __post_init__(self):
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class CompletionResponse:
    texts: tuple[str, ...]
    from_cache: bool = False
    latency: float = 0.0


def request_digest(request: CompletionRequest) -> str:
    """Content address of a request; any semantic field change changes the digest."""
    payload = {
        "model": request.model,
        "prompt": request.prompt.text,
        "temperature": request.temperature,
        "num_samples": request.num_samples,
        "max_tokens": request.max_tokens,
        "seed": request.seed if request.seed is not None else _UNSEEDED,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def stable_seed(*parts) -> int:
    """Deterministic 32-bit seed derived from the given parts."""
    tag = "\x1f".join(str(p) for p in parts)
    return int(hashlib.sha256(tag.encode("utf-8")).hexdigest()[:8], 16)


class FixtureStore:
    """One JSON file per request digest; shared by cache and replay."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def path_for(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def read(self, digest: str) -> dict | None:
        path = self.path_for(digest)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def record(self, request: CompletionRequest, response: CompletionResponse) -> Path:
        """Persist request fields and texts under the request digest."""
        digest = request_digest(request)
        payload = {
            "model": request.model,
            "prompt": request.prompt.text,
            "stage": request.prompt.stage,
            "temperature": request.temperature,
            "num_samples": request.num_samples,
            "max_tokens": request.max_tokens,
            "seed": request.seed,
            "texts": list(response.texts),
        }
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.path_for(digest)
        tmp = path.with_suffix(f".tmp{os.getpid()}.{threading.get_ident()}")
        tmp.write_text(json.dumps(payload, ensure_ascii=False, indent=1), encoding="utf-8")
        os.replace(tmp, path)
        return path


class ReplayTransport:
    """Serves recorded fixtures only; performs zero network operations."""

    def __init__(self, directory: str | Path):
        self.store = FixtureStore(directory)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        digest = request_digest(request)
        payload = self.store.read(digest)
        if payload is None:
            raise FixtureMissingError(digest)
        return CompletionResponse(texts=tuple(payload["texts"]), from_cache=True)


class CachingTransport:
    """Wraps another transport with a write-through content-addressed cache."""

    def __init__(self, inner, directory: str | Path):
        self.inner = inner
        self.store = FixtureStore(directory)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        digest = request_digest(request)
        payload = self.store.read(digest)
        if payload is not None:
            return CompletionResponse(texts=tuple(payload["texts"]), from_cache=True)
        response = self.inner.complete(request)
        self.store.record(request, response)
        return response


@dataclass
class HttpTransport:
    """OpenAI-compatible chat-completions client with retry and bounded concurrency."""

    base_url: str
    token_env: str = "REASONFORGE_API_TOKEN"
    max_attempts: int = 4
    backoff_base: float = 0.5
    timeout: float = 120.0
    max_concurrency: int = 4
    max_samples: int = 64
    client: httpx.Client | None = None
    _semaphore: threading.BoundedSemaphore = field(init=False, repr=False)

    def __post_init__(self):
        self._semaphore = threading.BoundedSemaphore(self.max_concurrency)
        if self.client is None:
            self.client = httpx.Client(timeout=self.timeout)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        if request.num_samples > self.max_samples:
            raise ValueError(
                f"num_samples {request.num_samples} exceeds ceiling {self.max_samples}"
            )
        body = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt.text}],
            "temperature": request.temperature,
            "n": request.num_samples,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            body["seed"] = request.seed
        url = self.base_url.rstrip("/") + "/v1/chat/completions"

        start = time.monotonic()
        last_error: Exception | None = None
        with self._semaphore:
            for attempt in range(self.max_attempts):
                if attempt:
                    time.sleep(self.backoff_base * 2 ** (attempt - 1))
                try:
                    reply = self.client.post(url, json=body, headers=self._headers())
                except httpx.HTTPError as exc:
                    last_error = exc
                    continue
                if 400 <= reply.status_code < 500:
                    raise PermanentTransportError(reply.status_code, reply.text)
                if reply.status_code >= 500:
                    last_error = RetryableTransportError(
                        f"server error {reply.status_code}: {reply.text[:200]}"
                    )
                    continue
                texts = self._parse(reply, request.num_samples)
                return CompletionResponse(
                    texts=texts, from_cache=False, latency=time.monotonic() - start
                )
        raise RetryableTransportError(
            f"gave up after {self.max_attempts} attempts: {last_error}"
        )

    @staticmethod
    def _parse(reply: httpx.Response, num_samples: int) -> tuple[str, ...]:
        try:
            data = reply.json()
            choices = data["choices"]
            texts = tuple(choice["message"]["content"] for choice in choices)
        except (ValueError, KeyError, TypeError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc
        if len(texts) != num_samples:
            raise TransportError(
                f"backend returned {len(texts)} samples, expected {num_samples}"
            )
        return texts
