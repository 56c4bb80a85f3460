"""Open-domain search over an HTTP search API plus a page-reader endpoint."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, replace
from typing import Any, Callable, Mapping, Sequence
from urllib.parse import urlsplit, urlunsplit

import httpx

from newsline.core import Article, EventDate
from newsline.errors import ProviderError, RateLimited
from newsline.retrieval.base import SearchRequest, coerce_date

logger = logging.getLogger(__name__)


def canonical_url(url: str) -> str:
    """Lower-case scheme/host, drop fragment and trailing slash."""
    parts = urlsplit(url.strip())
    path = parts.path.rstrip("/") or ""
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), path, parts.query, ""))


def hits_to_articles(
    hits: Sequence[Mapping[str, Any]], query: str, cutoff: EventDate | None
) -> list[Article]:
    """Turn raw hits into Articles: URL ids, dedup by URL, cutoff post-filter."""
    out: list[Article] = []
    seen: set[str] = set()
    for rank, hit in enumerate(hits):
        url = hit.get("url")
        if not url:
            continue
        aid = canonical_url(url)
        if aid in seen:
            continue
        published, unparsed = coerce_date(hit.get("published"))
        if cutoff is not None and published is not None and published > cutoff:
            logger.debug("dropping %s: published %s after cutoff %s", aid, published, cutoff)
            continue
        if unparsed:
            logger.warning("unparseable publication date %r for %s", hit.get("published"), aid)
        seen.add(aid)
        out.append(
            Article(
                id=aid,
                title=str(hit.get("title") or ""),
                body=str(hit.get("body") or ""),
                published=published,
                source_query=query,
                url=url,
                score=float(len(hits) - rank),
                date_unparsed=unparsed,
            )
        )
    return out


@dataclass
class WebSearchConfig:
    endpoint: str
    credential: str | None = None
    reader_url: str | None = "https://r.jina.ai/"
    reader_credential: str | None = None
    credential_header: str = "Ocp-Apim-Subscription-Key"
    freshness_param: str = "freshness"
    timeout: float = 30.0
    max_retries: int = 5
    backoff_initial: float = 1.0
    backoff_factor: float = 2.0

    @classmethod
    def from_env(cls, **overrides: Any) -> WebSearchConfig:
        values: dict[str, Any] = {
            "endpoint": os.environ.get("NEWSLINE_SEARCH_ENDPOINT", ""),
            "credential": os.environ.get("NEWSLINE_SEARCH_API_KEY"),
            "reader_url": os.environ.get("NEWSLINE_READER_URL", "https://r.jina.ai/"),
            "reader_credential": os.environ.get("NEWSLINE_READER_API_KEY"),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _extract_hits(payload: Any) -> list[dict[str, Any]]:
    """Accept Bing-style (``webPages.value`` / ``value``) or generic ``results`` payloads."""
    if isinstance(payload, dict):
        if isinstance(payload.get("webPages"), dict):
            items = payload["webPages"].get("value", [])
        elif isinstance(payload.get("value"), list):
            items = payload["value"]
        else:
            items = payload.get("results", [])
    elif isinstance(payload, list):
        items = payload
    else:
        items = []
    hits = []
    for it in items:
        if not isinstance(it, dict):
            continue
        hits.append(
            {
                "url": it.get("url") or it.get("link"),
                "title": it.get("name") or it.get("title") or "",
                "snippet": it.get("snippet") or it.get("description") or "",
                "published": it.get("datePublished") or it.get("published") or it.get("date"),
            }
        )
    return hits


class HttpSearchProvider:
    """Generic search-API adapter with page-reader body fetching.

    429 responses are retried with exponential backoff; once retries run out
    the failure surfaces as :class:`ProviderError`.
    """

    def __init__(
        self,
        config: WebSearchConfig,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not config.endpoint:
            raise ProviderError("search endpoint not configured")
        self.config = config
        self.client = client or httpx.Client(timeout=config.timeout, follow_redirects=True)
        self.sleep = sleep

    def _get(self, url: str, params: dict | None = None, headers: dict | None = None) -> httpx.Response:
        cfg = self.config
        delay = cfg.backoff_initial
        for attempt in range(cfg.max_retries + 1):
            try:
                resp = self.client.get(url, params=params, headers=headers)
            except httpx.HTTPError as exc:
                raise ProviderError(f"transport error for {url}: {exc}") from exc
            if resp.status_code == 429:
                if attempt == cfg.max_retries:
                    break
                logger.info("rate limited by %s, sleeping %.1fs", url, delay)
                self.sleep(delay)
                delay *= cfg.backoff_factor
                continue
            if resp.status_code in (401, 403):
                raise ProviderError(f"auth failed ({resp.status_code}) for {url}: {resp.text[:200]}")
            if resp.status_code >= 400:
                raise ProviderError(f"HTTP {resp.status_code} for {url}: {resp.text[:200]}")
            return resp
        raise RateLimited(f"rate limited by {url} after {cfg.max_retries} retries")

    def _read_page(self, url: str) -> str | None:
        cfg = self.config
        if not cfg.reader_url:
            return None
        headers = {"Authorization": f"Bearer {cfg.reader_credential}"} if cfg.reader_credential else None
        try:
            return self._get(cfg.reader_url + url, headers=headers).text
        except ProviderError as exc:
            logger.warning("page read failed for %s: %s", url, exc)
            return None

    def search(self, req: SearchRequest) -> list[Article]:
        cfg = self.config
        params: dict[str, Any] = {"q": req.query, "count": req.top_k, "offset": req.offset}
        if req.cutoff is not None:
            params[cfg.freshness_param] = f"1900-01-01..{req.cutoff}"
        headers = {cfg.credential_header: cfg.credential} if cfg.credential else None
        resp = self._get(cfg.endpoint, params=params, headers=headers)
        try:
            hits = _extract_hits(resp.json())
        except ValueError as exc:
            raise ProviderError(f"search endpoint returned non-JSON: {exc}") from exc
        for hit in hits:
            hit["body"] = hit.get("snippet", "")
        # filter and dedup before paying for page reads
        articles = hits_to_articles(hits, req.query, req.cutoff)[: req.top_k]
        out = []
        for art in articles:
            body = self._read_page(art.url or art.id)
            out.append(replace(art, body=body) if body else art)
        return out


def web_search(provider: HttpSearchProvider, req: SearchRequest) -> list[Article]:
    return provider.search(req)
