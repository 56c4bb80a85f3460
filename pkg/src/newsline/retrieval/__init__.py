from newsline.retrieval.base import (
    MAX_TOP_K,
    CachedSearchProvider,
    FixtureSearchProvider,
    SearchProvider,
    SearchRequest,
    interleave,
    search_many,
    search_paged,
)
from newsline.retrieval.dedup import Deduplicator, dedup_articles, fingerprint
from newsline.retrieval.index import CorpusIndex, LocalSearchProvider, bm25_search, chunk_document
from newsline.retrieval.web import HttpSearchProvider, WebSearchConfig, canonical_url, web_search

__all__ = [
    "MAX_TOP_K",
    "CachedSearchProvider",
    "CorpusIndex",
    "Deduplicator",
    "FixtureSearchProvider",
    "HttpSearchProvider",
    "LocalSearchProvider",
    "SearchProvider",
    "SearchRequest",
    "WebSearchConfig",
    "bm25_search",
    "canonical_url",
    "chunk_document",
    "dedup_articles",
    "fingerprint",
    "interleave",
    "search_many",
    "search_paged",
    "web_search",
]
