"""Run configuration file and service construction.

The config file is JSON; every section is optional::

    {
      "llm":       {"endpoint": "...", "model": "...", "api_key_env": "NEWSLINE_LLM_API_KEY",
                    "replay_only": false, "concurrency": 4, "max_output_limit": 8192,
                    "context_limit": null, "nonce": 0},
      "search":    {"provider": "web" | "local" | "fixture",
                    "endpoint": "...", "api_key_env": "NEWSLINE_SEARCH_API_KEY",
                    "reader_url": "https://r.jina.ai/", "reader_api_key_env": "NEWSLINE_READER_API_KEY",
                    "credential_header": "Ocp-Apim-Subscription-Key",
                    "index_dir": "...", "fixture": "...", "replay_only": false},
      "embedding": {"backend": "hashing" | "http", "dimension": 256,
                    "endpoint": "...", "model": "...", "api_key_env": "NEWSLINE_EMBED_API_KEY"},
      "pool": "path/to/pool.json",
      "cache_dir": ".newsline-cache",
      "pipeline":  {"m": 5, "N": 30, "s": 3, "rounds": 2, ...}
    }

Credentials are only ever read from the environment. Relative paths resolve
against the config file's directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from newsline.llm.gateway import Gateway, HttpChatBackend, TranscriptCache
from newsline.pipeline import PipelineConfig, Services
from newsline.questioning import EmbeddingProvider, ExamplePool, HashingEmbedder, HttpEmbedder
from newsline.retrieval.base import CachedSearchProvider, FixtureSearchProvider, SearchProvider
from newsline.retrieval.index import CorpusIndex, LocalSearchProvider
from newsline.retrieval.web import HttpSearchProvider, WebSearchConfig

SECTIONS = ("llm", "search", "embedding", "pool", "cache_dir", "pipeline")


@dataclass
class RunConfig:
    llm: dict[str, Any] = field(default_factory=dict)
    search: dict[str, Any] = field(default_factory=dict)
    embedding: dict[str, Any] = field(default_factory=dict)
    pool: str | None = None
    cache_dir: str | None = None
    pipeline: dict[str, Any] = field(default_factory=dict)
    base: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, d: dict[str, Any], base: Path | None = None) -> RunConfig:
        unknown = set(d) - set(SECTIONS)
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        return cls(**{k: d[k] for k in SECTIONS if k in d}, base=base or Path.cwd())

    @classmethod
    def load(cls, path: str | Path | None) -> RunConfig:
        if path is None:
            return cls()
        p = Path(path)
        return cls.from_dict(json.loads(p.read_text(encoding="utf-8")), p.parent.resolve())

    def path(self, value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def pipeline_config(self, **overrides: Any) -> PipelineConfig:
        d = dict(self.pipeline)
        d.update({k: v for k, v in overrides.items() if v is not None})
        return PipelineConfig.from_dict(d)


def _env(name: str | None) -> str | None:
    return os.environ.get(name) if name else None


def build_gateway(rc: RunConfig, cache_dir: Path | None) -> Gateway:
    c = rc.llm
    endpoint = c.get("endpoint") or os.environ.get("NEWSLINE_LLM_ENDPOINT")
    model = c.get("model") or os.environ.get("NEWSLINE_LLM_MODEL", "")
    backend = None
    if endpoint:
        backend = HttpChatBackend(endpoint, model, _env(c.get("api_key_env", "NEWSLINE_LLM_API_KEY")))
    cache = TranscriptCache(cache_dir / "transcripts.jsonl" if cache_dir else None)
    return Gateway(
        backend,
        cache,
        replay_only=bool(c.get("replay_only", False)),
        model_tag=model,
        max_output_limit=int(c.get("max_output_limit", 8192)),
        context_limit=c.get("context_limit"),
        concurrency=int(c.get("concurrency", 4)),
        nonce=int(c.get("nonce", 0)),
    )


def build_provider(rc: RunConfig, cache_dir: Path | None) -> SearchProvider:
    c = rc.search
    kind = c.get("provider", "web")
    inner: SearchProvider
    if kind == "web":
        cfg = WebSearchConfig.from_env(
            endpoint=c.get("endpoint"),
            credential=_env(c.get("api_key_env")),
            reader_url=c.get("reader_url"),
            reader_credential=_env(c.get("reader_api_key_env")),
            credential_header=c.get("credential_header"),
        )
        inner = HttpSearchProvider(cfg)
    elif kind == "local":
        index_dir = rc.path(c.get("index_dir"))
        if index_dir is None:
            raise ValueError("search.index_dir is required for the local provider")
        inner = LocalSearchProvider(CorpusIndex.load(index_dir))
    elif kind == "fixture":
        fixture = rc.path(c.get("fixture"))
        if fixture is None:
            raise ValueError("search.fixture is required for the fixture provider")
        inner = FixtureSearchProvider.from_file(fixture)
    else:
        raise ValueError(f"unknown search provider {kind!r}")
    cache = cache_dir / "search.jsonl" if cache_dir else None
    if cache is None and not c.get("replay_only"):
        return inner
    return CachedSearchProvider(inner, cache, replay_only=bool(c.get("replay_only", False)))


def build_embedder(rc: RunConfig) -> EmbeddingProvider:
    c = rc.embedding
    backend = c.get("backend", "hashing")
    dim = int(c.get("dimension", 256))
    if backend == "hashing":
        return HashingEmbedder(dim)
    if backend == "http":
        return HttpEmbedder(c["endpoint"], c["model"], dim, _env(c.get("api_key_env", "NEWSLINE_EMBED_API_KEY")))
    raise ValueError(f"unknown embedding backend {backend!r}")


def build_services(rc: RunConfig, cache_dir: str | Path | None = None, provider: SearchProvider | None = None) -> Services:
    cdir = Path(cache_dir) if cache_dir else rc.path(rc.cache_dir)
    embedder = build_embedder(rc)
    pool_path = rc.path(rc.pool)
    pool = ExamplePool.load(pool_path, embedder) if pool_path else None
    return Services(
        gateway=build_gateway(rc, cdir),
        provider=provider if provider is not None else build_provider(rc, cdir),
        embedder=embedder,
        pool=pool,
    )
