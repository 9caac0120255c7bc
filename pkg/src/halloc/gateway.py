"""Provider-agnostic completion access: caching, retries, deterministic replay.

Cache layout is one JSON file per request digest under the cache directory
(``HALLOC_CACHE_DIR`` by default). Writes go through a temp file and an atomic
rename, so concurrent readers never observe partial entries.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Protocol

import httpx

from halloc.errors import (
    CacheMissError,
    GatewayError,
    ProviderError,
    ProviderRateLimit,
    ProviderTimeout,
)

CACHE_DIR_ENV = "HALLOC_CACHE_DIR"
MODES = ("live", "replay", "live_with_cache")


@dataclass(frozen=True)
class LlmRequest:
    model_id: str
    user_prompt: str
    system_prompt: str | None = None
    temperature: float = 0.0
    max_tokens: int = 2048
    sample_index: int = 0

    def __post_init__(self) -> None:
        if not self.model_id:
            raise GatewayError("model_id must be non-empty")
        if not self.user_prompt:
            raise GatewayError("user_prompt must be non-empty")
        if self.temperature < 0:
            raise GatewayError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise GatewayError("max_tokens must be positive")
        if self.sample_index < 0:
            raise GatewayError("sample_index must be non-negative")


@dataclass
class LlmResponse:
    text: str
    from_cache: bool
    provider_metadata: dict = field(default_factory=dict)


def cache_key(req: LlmRequest) -> str:
    """Content digest of the full request tuple; any field change changes it."""
    canonical = json.dumps(
        [
            req.model_id,
            req.system_prompt,
            req.user_prompt,
            float(req.temperature),
            int(req.max_tokens),
            int(req.sample_index),
        ],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Provider(Protocol):
    def complete(self, req: LlmRequest) -> tuple[str, dict]:
        """Returns (completion text, provider metadata)."""
        ...


class CallableProvider:
    """Wraps a deterministic function; used to script fixtures and record caches."""

    def __init__(self, fn: Callable[[LlmRequest], str], name: str = "scripted"):
        self._fn = fn
        self.name = name

    def complete(self, req: LlmRequest) -> tuple[str, dict]:
        return self._fn(req), {"provider": self.name}


class HttpChatProvider:
    """Minimal chat-completions client (OpenAI-style wire format) over httpx."""

    def __init__(
        self,
        base_url: str,
        api_key_env: str,
        timeout: float = 60.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout

    def complete(self, req: LlmRequest) -> tuple[str, dict]:
        api_key = os.environ.get(self.api_key_env)
        if not api_key:
            raise ProviderError(f"missing API key env var {self.api_key_env}")
        messages = []
        if req.system_prompt:
            messages.append({"role": "system", "content": req.system_prompt})
        messages.append({"role": "user", "content": req.user_prompt})
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                headers={"Authorization": f"Bearer {api_key}"},
                json={
                    "model": req.model_id,
                    "messages": messages,
                    "temperature": req.temperature,
                    "max_tokens": req.max_tokens,
                },
                timeout=self.timeout,
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise ProviderError(str(exc)) from exc
        if resp.status_code == 429:
            raise ProviderRateLimit(f"rate limited: {resp.text[:200]}")
        if resp.status_code in (408, 504):
            raise ProviderTimeout(f"timeout status {resp.status_code}")
        if resp.status_code >= 400:
            raise ProviderError(f"status {resp.status_code}: {resp.text[:200]}")
        payload = resp.json()
        try:
            text = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider payload: {exc}") from exc
        return text, {"provider": "http", "usage": payload.get("usage", {})}


class LlmGateway:
    """Front door for completions. Modes: live (no cache), replay (cache only),
    live_with_cache (read-through, store before returning)."""

    def __init__(
        self,
        provider: Provider | None = None,
        cache_dir: str | Path | None = None,
        mode: str = "replay",
        max_attempts: int = 3,
        backoff_base: float = 0.5,
        max_parallel: int = 4,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if mode not in MODES:
            raise GatewayError(f"mode must be one of {MODES}, got {mode!r}")
        self.provider = provider
        self.mode = mode
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._inflight = threading.Semaphore(max_parallel)
        raw_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_DIR_ENV)
        self.cache_dir = Path(raw_dir) if raw_dir else None
        if mode in ("replay", "live_with_cache") and self.cache_dir is None:
            raise GatewayError(
                f"mode {mode} needs a cache directory (set {CACHE_DIR_ENV} or pass cache_dir)"
            )

    # -- cache plumbing -------------------------------------------------

    def _entry_path(self, key: str) -> Path:
        assert self.cache_dir is not None
        return self.cache_dir / f"{key}.json"

    def _cache_read(self, key: str) -> dict | None:
        path = self._entry_path(key)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None

    def _cache_write(self, key: str, req: LlmRequest, text: str, metadata: dict) -> None:
        assert self.cache_dir is not None
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        entry = {
            "key": key,
            "request": {
                "model_id": req.model_id,
                "system_prompt": req.system_prompt,
                "user_prompt": req.user_prompt,
                "temperature": float(req.temperature),
                "max_tokens": int(req.max_tokens),
                "sample_index": int(req.sample_index),
            },
            "text": text,
            "provider_metadata": metadata,
        }
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False)
            os.replace(tmp, self._entry_path(key))
        except BaseException:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass
            raise

    def seed_cache(self, req: LlmRequest, text: str, metadata: dict | None = None) -> str:
        """Store a completion for later replay; returns the cache key."""
        key = cache_key(req)
        self._cache_write(key, req, text, metadata or {"provider": "seed"})
        return key

    # -- completion -----------------------------------------------------

    def _call_provider(self, req: LlmRequest) -> tuple[str, dict]:
        if self.provider is None:
            raise ProviderError("no provider configured for live completion")
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                with self._inflight:
                    return self.provider.complete(req)
            except (ProviderTimeout, ProviderRateLimit) as exc:
                last = exc
                if attempt + 1 < self.max_attempts:
                    self._sleep(self.backoff_base * (2**attempt))
        assert last is not None
        raise last

    def complete(self, req: LlmRequest, mode: str | None = None) -> LlmResponse:
        mode = mode or self.mode
        if mode not in MODES:
            raise GatewayError(f"mode must be one of {MODES}, got {mode!r}")
        key = cache_key(req)
        if mode in ("replay", "live_with_cache"):
            if self.cache_dir is None:
                raise GatewayError(f"mode {mode} needs a cache directory")
            entry = self._cache_read(key)
            if entry is not None:
                return LlmResponse(
                    text=entry["text"],
                    from_cache=True,
                    provider_metadata=entry.get("provider_metadata", {}),
                )
            if mode == "replay":
                raise CacheMissError(f"no cache entry for key {key}")
        text, metadata = self._call_provider(req)
        if mode == "live_with_cache":
            self._cache_write(key, req, text, metadata)
        return LlmResponse(text=text, from_cache=False, provider_metadata=metadata)

    def sample_many(self, req: LlmRequest, n: int, mode: str | None = None) -> list[LlmResponse]:
        """n completions of the same prompt distinguished by sample_index 0..n-1."""
        if n < 1:
            raise GatewayError("n must be >= 1")
        out = []
        for i in range(n):
            try:
                out.append(self.complete(replace(req, sample_index=i), mode=mode))
            except GatewayError as exc:
                raise type(exc)(f"sample_index={i}: {exc}") from exc
        return out
