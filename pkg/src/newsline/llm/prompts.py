"""Prompt templates for questioning, rewriting, generation and merging.

Template bodies are stored verbatim; only the named placeholders listed per
template are substituted, so the literal JSON braces in the output-format
instructions pass through untouched.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from newsline.core import Article, DatedEvent, Timeline
from newsline.errors import MissingBinding

DOC_WORD_BUDGET = 600

SELF_QUESTION = """\
You are an experienced journalist building a timeline for the target news. You need to propose at least 5 questions related to the Target News that the current news database cannot answer.
These questions should help continue organizing the timeline of news developments or the life history of individuals, focusing on the origins, development processes, and key figures of related events, emphasizing factual news knowledge rather than subjective evaluative content.
These 5 questions must be independent and non-overlapping. The overall potential information volume of all questions should be as large as possible, and the time span covered should also be as extensive as possible. Avoid asking questions similar to those already searched. Directly output your questions in the specified format.
Output format: ["Question_1", "Question_2", ...]

{Retrieved Examples}

Current News Database: {docs}
Target News: {news}
Questions Already Searched: {questions}
"""

REWRITE = """\
Generate 2-3 rewrite queries of the question as a python list, directly output it as ["..", "..", ..]

# Examples:
Question: When did the initial protests that led to the Egyptian Crisis begin?
Rewrite: ["Egyptian Crisis initial protests", "Time of protests lead to Egyptian Crisis"]

Question: When and where did Robert Jasmiden die?
Rewrite: ["Robert Jasmiden's death time", "Robert Jasmiden's death place"]

Question: What profession do Nicholas Ray and Elia Kazan have in common?
Rewrite: ["Nicholas Ray profession", "Elia Kazan profession"]

Question: {question}
Rewrite:"""

GENERATE = """\
You are an experienced journalist building a timeline for the target news.

Instructions:
Step 1: Read each background news item and extract all significant milestone events related to the target news from your news database, along with their dates.
Step 2: Write a description for each event, including key detail information about the event, using the phrasing from the news database as much as possible. Save all events as a list. The format should be: [{"start": <date|format as "2023-02-02", cannot be empty, must include specific year, month, and day>, "summary": "<event description|no quotes allowed>"}, ...]

Target News: {news}
Current news database: {docs}
"""

MERGE = """\
You are an experienced journalist building a timeline for the target news.
Merge the existing news summaries and timelines in chronological order. When merging the news summaries, select the top-{l} significant news from the original timeline, and strictly follow the chronological order from past to present without changing the original date, using "\\n" to separate events that occurred on different dates. Directly output your answer in the following format: [{"start": <date|format as "2023-02-02", cannot be empty, must include specific year, month, and day>, "summary": "<event description|no quotes allowed>"}, ...]

Target News: {news}
Original Timeline: {timelines}
"""

FORMAT_REMINDER = (
    "Your previous answer could not be parsed. Reply with only the list, "
    "exactly in the output format given above, and nothing else."
)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    placeholders: tuple[str, ...]

    @property
    def pattern(self) -> re.Pattern[str]:
        alts = "|".join(re.escape(p) for p in self.placeholders)
        return re.compile(r"\{(" + alts + r")\}")

    def render(self, bindings: Mapping[str, Any] | None = None, *, doc_word_budget: int = DOC_WORD_BUDGET, **kw: Any) -> str:
        return render(self, {**(bindings or {}), **kw}, doc_word_budget=doc_word_budget)


TEMPLATES = {
    "self_question": PromptTemplate("self_question", SELF_QUESTION, ("Retrieved Examples", "docs", "news", "questions")),
    "rewrite": PromptTemplate("rewrite", REWRITE, ("question",)),
    "generate": PromptTemplate("generate", GENERATE, ("news", "docs")),
    "merge": PromptTemplate("merge", MERGE, ("l", "news", "timelines")),
}


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


def serialize_docs(articles: Sequence[Article], word_budget: int = DOC_WORD_BUDGET) -> str:
    """``[id] title (published): body`` blocks, one per line, bodies cut to ``word_budget`` words."""
    blocks = []
    for art in articles:
        body = " ".join(art.body.split()[:word_budget])
        pub = str(art.published) if art.published else "unknown date"
        blocks.append(f"[{_one_line(art.id)}] {_one_line(art.title)} ({pub}): {body}")
    return "\n\n".join(blocks)


def serialize_timeline(events: Iterable[DatedEvent]) -> str:
    return json.dumps([ev.to_json() for ev in events], ensure_ascii=False)


def format_examples(examples: Iterable[Any]) -> str:
    """Few-shot blocks; accepts pool entries or ``(topic, questions)`` pairs."""
    blocks = []
    for ex in examples:
        if isinstance(ex, tuple):
            topic, questions = ex
        else:
            topic, questions = ex.topic_query, ex.questions
        blocks.append(f"Target News: {_one_line(topic)}\nQuestions: {json.dumps(list(questions), ensure_ascii=False)}")
    return "\n\n".join(blocks)


def _coerce(name: str, value: Any, doc_word_budget: int) -> str:
    if name == "docs" and not isinstance(value, str):
        return serialize_docs(list(value), doc_word_budget)
    if name == "questions" and not isinstance(value, str):
        return json.dumps(list(value), ensure_ascii=False)
    if name == "timelines" and not isinstance(value, str):
        if isinstance(value, Timeline):
            return serialize_timeline(value.events)
        events: list[DatedEvent] = []
        for item in value:
            events.extend(item.events if isinstance(item, Timeline) else [item])
        return serialize_timeline(events)
    if name == "Retrieved Examples" and not isinstance(value, str):
        return format_examples(value)
    return str(value)


def render(template: PromptTemplate | str, bindings: Mapping[str, Any], *, doc_word_budget: int = DOC_WORD_BUDGET) -> str:
    """Substitute every placeholder of ``template``; raise MissingBinding if any is unbound."""
    if isinstance(template, str):
        template = TEMPLATES[template]
    missing = [p for p in template.placeholders if p not in bindings]
    if missing:
        raise MissingBinding(f"template {template.name!r} missing bindings: {', '.join(missing)}")
    unknown = set(bindings) - set(template.placeholders)
    if unknown:
        raise ValueError(f"template {template.name!r} has no placeholders {sorted(unknown)}")
    values = {p: _coerce(p, bindings[p], doc_word_budget) for p in template.placeholders}
    # single pass, so substituted text is never rescanned for placeholders
    return template.pattern.sub(lambda m: values[m.group(1)], template.body)
