from __future__ import annotations

import json
import random

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newsline.core import Article, parse_date
from newsline.errors import EmptyDocument, EmptyQuery, ProviderError, RateLimited
from newsline.retrieval import (
    CachedSearchProvider,
    CorpusIndex,
    Deduplicator,
    FixtureSearchProvider,
    HttpSearchProvider,
    LocalSearchProvider,
    SearchRequest,
    WebSearchConfig,
    bm25_search,
    canonical_url,
    chunk_document,
    dedup_articles,
    fingerprint,
    interleave,
    search_many,
    search_paged,
    web_search,
)
from newsline.retrieval.dedup import containment

import oracles

HAND_CORPUS = [
    ("A", "bank collapse shocks markets"),
    ("B", "bank regulators meet"),
    ("C", "weather report sunny"),
    ("D", "bank bank collapse"),
    ("E", "markets rally after collapse fears"),
    ("F", "local sports report"),
]

# N=6, avgdl=21/6=3.5, df(bank)=df(collapse)=3 so idf = ln(1 + 3.5/3.5) = ln 2 for both.
# term(tf, dl) = ln2 * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * dl / 3.5))
#   A: 2 * term(1, 4)             D: term(2, 3) + term(1, 3)
#   B: term(1, 3)                 E: term(1, 5)
HAND_SCORES = {
    "D#0": 1.729143744415299,
    "A#0": 1.3097505006899581,
    "B#0": 0.7361701090084937,
    "E#0": 0.5897495348410585,
}


def hand_index(**kw):
    docs = [{"id": i, "text": t, "published": "2023-01-0" + str(n + 1)} for n, (i, t) in enumerate(HAND_CORPUS)]
    return CorpusIndex.from_documents(docs, **kw)


# ---------------------------------------------------------------- chunking


def test_chunk_examples():
    words = " ".join(f"w{i}" for i in range(1200))
    chunks = chunk_document("doc", words, chunk_size=500)
    assert [len(c.body.split()) for c in chunks] == [500, 500, 200]
    assert [c.id for c in chunks] == ["doc#0", "doc#1", "doc#2"]
    assert len(chunk_document("d", "one two three four five six seven eight nine ten")) == 1
    with pytest.raises(EmptyDocument):
        chunk_document("d", "   \n ")
    with pytest.raises(ValueError):
        chunk_document("d", "x", chunk_size=0)


@settings(max_examples=500, deadline=None)
@given(st.integers(1, 5000), st.integers(1, 700), st.integers(0, 2**32))
def test_chunking_lossless_and_bounded(n_words, size, seed):
    rnd = random.Random(seed)
    words = [rnd.choice(["a", "bb", "ccc", "d-d", "ée"]) for _ in range(n_words)]
    seps = [rnd.choice([" ", "\n", "\t", "  "]) for _ in range(n_words)]
    text = "".join(w + s for w, s in zip(words, seps))
    chunks = chunk_document("x", text, chunk_size=size)
    rebuilt = [w for c in chunks for w in c.body.split()]
    assert rebuilt == words
    lens = [len(c.body.split()) for c in chunks]
    assert all(n == size for n in lens[:-1]) and 1 <= lens[-1] <= size


# -------------------------------------------------------------------- BM25


def test_bm25_hand_corpus_scores_and_ranking():
    index = hand_index()
    hits = bm25_search(index, SearchRequest("bank collapse", None, 10))
    assert [h.id for h in hits] == list(HAND_SCORES)
    for h in hits:
        assert h.score == pytest.approx(HAND_SCORES[h.id], abs=1e-9)
        assert h.source_query == "bank collapse"


def test_bm25_against_brute_force_oracle():
    index = hand_index()
    tokens = [t.split() for _, t in HAND_CORPUS]
    want = oracles.bm25(tokens, ["bank", "collapse", "bank"])
    scores, matched = index.score_all("bank collapse bank")
    assert scores.tolist() == pytest.approx(want, abs=1e-12)
    assert matched.tolist() == [True, True, False, True, True, False]


def test_bm25_only_matching_chunks_and_top_k():
    index = hand_index()
    assert [h.id for h in bm25_search(index, SearchRequest("weather", None, 10))] == ["C#0"]
    assert len(bm25_search(index, SearchRequest("bank collapse", None, 2))) == 2
    assert bm25_search(index, SearchRequest("nonexistent", None, 5)) == []


def test_bm25_cutoff_filter():
    index = hand_index()
    assert bm25_search(index, SearchRequest("bank", parse_date("2022-12-31"), 5)) == []
    ids = [h.id for h in bm25_search(index, SearchRequest("bank", parse_date("2023-01-02"), 5))]
    assert ids == ["B#0", "A#0"]


def test_bm25_tie_break_by_doc_then_chunk():
    docs = [{"id": "z", "text": "flood"}, {"id": "a", "text": "flood"}, {"id": "m", "text": "flood"}]
    hits = bm25_search(CorpusIndex.from_documents(docs), SearchRequest("flood", None, 5))
    assert [h.id for h in hits] == ["a#0", "m#0", "z#0"]


def test_bm25_empty_query_and_index():
    with pytest.raises(EmptyQuery):
        hand_index().score_all("!!! ...")
    with pytest.raises(EmptyQuery):
        SearchRequest("  ")
    with pytest.raises(ValueError):
        bm25_search(CorpusIndex([]), SearchRequest("x"))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=12), min_size=1, max_size=30),
       st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=4))
def test_bm25_matches_score_all_then_sort(docs, query):
    index = CorpusIndex.from_documents([{"id": f"d{i:03d}", "text": " ".join(d)} for i, d in enumerate(docs)])
    want = oracles.bm25(docs, query)
    ranked = sorted(
        (i for i, d in enumerate(docs) if set(d) & set(query)),
        key=lambda i: (-want[i], i),
    )
    hits = bm25_search(index, SearchRequest(" ".join(query), None, 50))
    assert [h.id for h in hits] == [f"d{i:03d}#0" for i in ranked][:50]
    for h, i in zip(hits, ranked):
        assert h.score == pytest.approx(want[i], abs=1e-9)


def test_irrelevant_document_keeps_order():
    base = hand_index()
    before = [h.id for h in bm25_search(base, SearchRequest("bank collapse", None, 10))]
    docs = [{"id": i, "text": t} for i, t in HAND_CORPUS] + [{"id": "G", "text": "garden show tulips"}]
    after = [h.id for h in bm25_search(CorpusIndex.from_documents(docs), SearchRequest("bank collapse", None, 10))]
    assert before == after


def test_index_persistence_roundtrip(tmp_path):
    index = hand_index(chunk_size=3)
    index.save(tmp_path / "idx")
    loaded = CorpusIndex.load(tmp_path / "idx")
    assert [c.id for c in loaded.chunks] == [c.id for c in index.chunks]
    header = json.loads((tmp_path / "idx" / "header.json").read_text())
    assert header["k1"] == 1.2 and header["b"] == 0.75 and header["chunk_size"] == 3
    req = SearchRequest("bank collapse", None, 10)
    assert bm25_search(loaded, req) == bm25_search(index, req)
    assert LocalSearchProvider(loaded).search(req) == bm25_search(index, req)


def test_index_load_detects_tampering(tmp_path):
    hand_index().save(tmp_path)
    lines = (tmp_path / "chunks.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    rec["body"] += " extra"
    lines[0] = json.dumps(rec)
    (tmp_path / "chunks.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="inconsistent"):
        CorpusIndex.load(tmp_path)


# ------------------------------------------------------------------- dedup

LOREM = (
    "the regional water authority said on monday that the reservoir had risen "
    "past its safe level and engineers were inspecting the spillway for cracks"
)


def art(aid, body, **kw):
    return Article(aid, "", body, **kw)


def test_dedup_examples():
    pool = [art("a", LOREM)]
    assert dedup_articles(pool, [art("a", "different text entirely here")]) == []
    assert dedup_articles(pool, [art("b", LOREM)]) == []
    other = art("c", "a storm system moved across the northern plains bringing hail and high winds to several towns")
    assert dedup_articles(pool, [other]) == [other]


def test_unrelated_fixture_overlap_below_threshold():
    a = fingerprint(LOREM)
    b = fingerprint("a storm system moved across the northern plains bringing hail and high winds to several towns")
    assert containment(b, a) < 0.9


def test_near_duplicate_with_small_edit():
    words = LOREM.split() * 4
    edited = words[:-1] + ["today"]
    # one changed word touches one of 89 shingles
    assert dedup_articles([art("a", " ".join(words))], [art("b", " ".join(edited))]) == []


def test_dedup_within_incoming_and_limit():
    a, b = art("a", LOREM), art("b", LOREM)
    c = art("c", "completely different words about elections and ballots counted overnight in the capital city")
    assert dedup_articles([], [a, b, c]) == [a, c]
    assert Deduplicator().filter([a, b, c], limit=1) == [a]


@settings(max_examples=100)
@given(st.lists(st.tuples(st.sampled_from("abcde"), st.sampled_from([LOREM, "x y z", "", LOREM + " extra words"]))))
def test_dedup_idempotent(items):
    incoming = [art(i, body) for i, body in items]
    pool = [art("p", "x y z")]
    once = dedup_articles(pool, incoming)
    assert dedup_articles(pool, once) == once
    assert len({a.id for a in once}) == len(once)


# --------------------------------------------------------------- providers


def test_interleave_and_search_many_order():
    a = [art(f"a{i}", "") for i in range(3)]
    b = [art(f"b{i}", "") for i in range(1)]
    assert [x.id for x in interleave([a, b])] == ["a0", "b0", "a1", "a2"]
    prov = FixtureSearchProvider({"q1": [{"url": "http://x/1"}], "q2": [{"url": "http://x/2"}]})
    reqs = [SearchRequest("q1"), SearchRequest("q2"), SearchRequest("q1")]
    out = search_many(prov, reqs, parallelism=3)
    assert [[x.id for x in r] for r in out] == [["http://x/1"], ["http://x/2"], ["http://x/1"]]


def test_fixture_provider_contract():
    hits = [
        {"url": "https://A.com/1/", "title": "t1", "body": "b1", "published": "2023-01-01"},
        {"url": "https://a.com/1", "title": "dup", "body": "b1", "published": "2023-01-01"},
        {"url": "https://a.com/2", "title": "late", "body": "b2", "published": "2023-05-01"},
        {"url": "https://a.com/3", "title": "odd date", "body": "b3", "published": "last tuesday"},
    ]
    prov = FixtureSearchProvider({"q": hits})
    out = prov.search(SearchRequest("q", parse_date("2023-02-01"), 10))
    assert [a.id for a in out] == ["https://a.com/1", "https://a.com/3"]
    assert out[1].date_unparsed and out[1].published is None
    assert prov.search(SearchRequest("q", None, 1, offset=1))[0].id == "https://a.com/2"


def test_search_paged_collects_beyond_page_size():
    hits = [{"url": f"http://x/{i}", "body": str(i)} for i in range(120)]
    prov = FixtureSearchProvider({"q": hits})
    got = search_paged(prov, "q", None, 110, max_top_k=50)
    assert [a.id for a in got] == [f"http://x/{i}" for i in range(110)]
    assert [(r.offset, r.top_k) for r in prov.calls] == [(0, 50), (50, 50), (100, 10)]


def test_top_k_bounded():
    with pytest.raises(ValueError):
        SearchRequest("q", None, 51)
    SearchRequest("q", None, 80, max_top_k=100)


def test_cached_provider_replays(tmp_path):
    prov = FixtureSearchProvider({"q": [{"url": "http://x/1", "body": "b"}]})
    cache = tmp_path / "search.jsonl"
    c1 = CachedSearchProvider(prov, cache)
    first = c1.search(SearchRequest("q"))
    c2 = CachedSearchProvider(FixtureSearchProvider({}), cache, replay_only=True)
    assert c2.search(SearchRequest("q")) == first
    with pytest.raises(ProviderError):
        c2.search(SearchRequest("other"))


def test_canonical_url():
    assert canonical_url("HTTPS://Example.COM/a/b/#frag") == "https://example.com/a/b"


def _web(handler, **cfg):
    sleeps = []
    config = WebSearchConfig(endpoint="https://search.test/v7", credential="k", reader_url="https://reader.test/", **cfg)
    prov = HttpSearchProvider(config, httpx.Client(transport=httpx.MockTransport(handler)), sleep=sleeps.append)
    return prov, sleeps


def test_web_search_pages_bodies_and_filters():
    seen = {}

    def handler(request: httpx.Request):
        if request.url.host == "search.test":
            seen.update(dict(request.url.params))
            seen["key"] = request.headers.get("Ocp-Apim-Subscription-Key")
            return httpx.Response(200, json={"webPages": {"value": [
                {"url": "https://n.com/1", "name": "One", "snippet": "s1", "datePublished": "2023-01-05T10:00:00Z"},
                {"url": "https://n.com/1", "name": "One again", "snippet": "s1"},
                {"url": "https://n.com/2", "name": "Two", "snippet": "s2", "datePublished": "2023-03-01"},
                {"url": "https://n.com/3", "name": "Three", "snippet": "s3", "datePublished": "2023-01-20"},
            ]}})
        return httpx.Response(200, text="Full text of " + str(request.url).split("reader.test/")[1])

    prov, _ = _web(handler)
    out = web_search(prov, SearchRequest("flood", parse_date("2023-02-01"), 10))
    assert [a.title for a in out] == ["One", "Three"]
    assert out[0].body == "Full text of https://n.com/1"
    assert all(a.published <= parse_date("2023-02-01") for a in out)
    assert seen["freshness"] == "1900-01-01..2023-02-01" and seen["q"] == "flood" and seen["key"] == "k"


def test_web_search_rate_limit_backoff():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(429)

    prov, sleeps = _web(handler)
    with pytest.raises(RateLimited):
        prov.search(SearchRequest("x"))
    assert sleeps == [1.0, 2.0, 4.0, 8.0, 16.0]
    assert len(calls) == 6
    assert issubclass(RateLimited, ProviderError)


def test_web_search_recovers_after_429():
    state = {"n": 0}

    def handler(request):
        if request.url.host == "search.test":
            state["n"] += 1
            if state["n"] < 3:
                return httpx.Response(429)
            return httpx.Response(200, json={"results": [{"url": "https://n.com/9", "title": "T"}]})
        return httpx.Response(500)

    prov, sleeps = _web(handler)
    out = prov.search(SearchRequest("x"))
    assert sleeps == [1.0, 2.0]
    # reader failure falls back to the snippet
    assert [a.id for a in out] == ["https://n.com/9"]


def test_web_search_auth_error():
    prov, _ = _web(lambda r: httpx.Response(401, text="bad key"))
    with pytest.raises(ProviderError, match="auth"):
        prov.search(SearchRequest("x"))
    with pytest.raises(ProviderError):
        HttpSearchProvider(WebSearchConfig(endpoint=""))
