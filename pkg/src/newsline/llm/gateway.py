"""Chat-completion gateway with a content-hashed transcript cache."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Protocol, TypeVar

import httpx

from newsline.errors import BackendError, BudgetExceeded, UnparseableOutput
from newsline.llm.prompts import FORMAT_REMINDER

logger = logging.getLogger(__name__)

T = TypeVar("T")


@dataclass(frozen=True)
class ChatRequest:
    prompt: str
    temperature: float = 0.0
    max_output: int = 2048
    model_tag: str = ""
    # run index; varies the hash (and backend seed) for repeated runs
    nonce: int = 0

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be nonempty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def content_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode()).hexdigest()


class ChatBackend(Protocol):
    model_tag: str

    def complete(self, req: ChatRequest) -> str: ...


class HttpChatBackend:
    """OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(
        self,
        endpoint: str,
        model_tag: str,
        credential: str | None = None,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
        max_retries: int = 5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.url = endpoint.rstrip("/")
        if not self.url.endswith("/chat/completions"):
            self.url += "/chat/completions"
        self.model_tag = model_tag
        self.credential = credential
        self.client = client or httpx.Client(timeout=timeout)
        self.max_retries = max_retries
        self.sleep = sleep

    def complete(self, req: ChatRequest) -> str:
        body: dict[str, Any] = {
            "model": req.model_tag or self.model_tag,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_output,
        }
        if req.nonce:
            body["seed"] = req.nonce
        headers = {"Authorization": f"Bearer {self.credential}"} if self.credential else {}
        delay = 1.0
        for attempt in range(self.max_retries + 1):
            try:
                resp = self.client.post(self.url, json=body, headers=headers)
            except httpx.HTTPError as exc:
                raise BackendError(f"transport error: {exc}") from exc
            if resp.status_code == 429 and attempt < self.max_retries:
                self.sleep(delay)
                delay *= 2
                continue
            if resp.status_code >= 400:
                raise BackendError(f"backend returned {resp.status_code}: {_provider_message(resp)}")
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"unexpected completion payload: {resp.text[:200]}") from exc
        raise BackendError("rate limited: retries exhausted")


def _provider_message(resp: httpx.Response) -> str:
    try:
        err = resp.json().get("error")
        if isinstance(err, dict):
            return str(err.get("message", err))
        if err:
            return str(err)
    except ValueError:
        pass
    return resp.text[:300]


class TranscriptCache:
    """Append-only JSON Lines of ``{hash, request, response}`` records."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._records: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            for n, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    self._records[rec["hash"]] = rec["response"]
                except (ValueError, KeyError) as exc:
                    raise ValueError(f"{self.path}:{n}: bad transcript record") from exc

    def __len__(self) -> int:
        return len(self._records)

    def get(self, key: str) -> str | None:
        return self._records.get(key)

    def record(self, key: str, req: ChatRequest, response: str) -> None:
        with self._lock:
            self._records[key] = response
            if self.path is None:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            rec = {"hash": key, "request": asdict(req), "response": response}
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


class Gateway:
    """Budget checks, transcript replay and a concurrency cap in front of a backend.

    With ``replay_only`` set, a cache miss is an error instead of a backend call.
    """

    def __init__(
        self,
        backend: ChatBackend | None = None,
        cache: TranscriptCache | None = None,
        *,
        replay_only: bool = False,
        model_tag: str | None = None,
        max_output_limit: int = 8192,
        context_limit: int | None = None,
        concurrency: int = 4,
        nonce: int = 0,
    ):
        self.backend = backend
        self.cache = cache if cache is not None else TranscriptCache()
        self.replay_only = replay_only
        self.model_tag = model_tag if model_tag is not None else getattr(backend, "model_tag", "")
        self.max_output_limit = max_output_limit
        self.context_limit = context_limit
        self.nonce = nonce
        self._slots = threading.BoundedSemaphore(max(1, concurrency))
        self.calls = 0
        self.cache_hits = 0

    def chat(self, req: ChatRequest) -> str:
        if req.max_output > self.max_output_limit:
            raise BudgetExceeded(f"max_output {req.max_output} exceeds limit {self.max_output_limit}")
        if self.context_limit is not None:
            # rough chars-per-token estimate; only guards against gross overruns
            needed = len(req.prompt) // 4 + req.max_output
            if needed > self.context_limit:
                raise BudgetExceeded(f"request needs ~{needed} tokens, context limit is {self.context_limit}")
        key = req.content_hash()
        cached = self.cache.get(key)
        if cached is not None:
            self.cache_hits += 1
            return cached
        if self.backend is None or self.replay_only:
            raise BackendError(f"no recorded completion for request {key[:12]} and no live backend")
        with self._slots:
            text = self.backend.complete(req)
        self.calls += 1
        logger.debug("chat %s -> %d chars", key[:12], len(text))
        self.cache.record(key, req, text)
        return text

    def complete(self, prompt: str, **kw: Any) -> str:
        kw.setdefault("model_tag", self.model_tag)
        kw.setdefault("nonce", self.nonce)
        return self.chat(ChatRequest(prompt, **kw))

    def ask(self, prompt: str, parse: Callable[[str], T], **kw: Any) -> T:
        """Complete and parse; on UnparseableOutput retry once with a format reminder."""
        raw = self.complete(prompt, **kw)
        try:
            return parse(raw)
        except UnparseableOutput as exc:
            logger.warning("unparseable model output (%s); retrying with format reminder", exc)
        return parse(self.complete(prompt + "\n\n" + FORMAT_REMINDER, **kw))


def gateway_from_env(cache_path: str | Path | None = None, **kw: Any) -> Gateway:
    """Gateway over an HTTP backend configured by ``NEWSLINE_LLM_*`` variables."""
    endpoint = os.environ.get("NEWSLINE_LLM_ENDPOINT")
    model = os.environ.get("NEWSLINE_LLM_MODEL", "")
    backend = None
    if endpoint:
        backend = HttpChatBackend(endpoint, model, os.environ.get("NEWSLINE_LLM_API_KEY"))
    return Gateway(backend, TranscriptCache(cache_path), **kw)
