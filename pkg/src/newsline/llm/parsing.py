"""Tolerant extraction of JSON lists from free-form model output."""

from __future__ import annotations

import ast
import json
import logging
from typing import Any, Callable

from newsline.core import DatedEvent, parse_date
from newsline.errors import DateError, UnparseableOutput

logger = logging.getLogger(__name__)

_decoder = json.JSONDecoder()


def _balanced_end(text: str, start: int) -> int | None:
    """Index just past the bracket closing ``text[start]``, respecting quoted strings."""
    depth = 0
    quote: str | None = None
    i = start
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return None


def find_list(text: str, accept: Callable[[list], bool]) -> list | None:
    """First ``[...]`` in ``text`` that decodes to a list satisfying ``accept``.

    Tries strict JSON first, then a Python literal (models sometimes emit
    single-quoted lists when asked for a "python list").
    """
    pos = text.find("[")
    while pos != -1:
        value: Any = None
        try:
            value, _ = _decoder.raw_decode(text, pos)
        except ValueError:
            end = _balanced_end(text, pos)
            if end is not None:
                try:
                    value = ast.literal_eval(text[pos:end])
                except (ValueError, SyntaxError, MemoryError, RecursionError):
                    value = None
        if isinstance(value, list) and accept(value):
            return value
        pos = text.find("[", pos + 1)
    return None


def parse_question_list(raw: str, expected_min: int = 1) -> list[str]:
    found = find_list(raw, lambda v: all(isinstance(x, str) for x in v))
    if found is None:
        raise UnparseableOutput("no list of strings found in model output")
    items = [x.strip() for x in found if x.strip()]
    if len(items) < expected_min:
        raise UnparseableOutput(f"expected at least {expected_min} items, got {len(items)}")
    return items


def parse_timeline(raw: str) -> tuple[list[DatedEvent], int]:
    """Valid events from the first list of objects, plus the count of dropped entries."""
    found = find_list(raw, lambda v: bool(v) and all(isinstance(x, dict) for x in v))
    if found is None:
        raise UnparseableOutput("no list of event objects found in model output")
    events: list[DatedEvent] = []
    dropped = 0
    for item in found:
        start, summary = item.get("start"), item.get("summary")
        if not isinstance(start, str) or not isinstance(summary, str) or not summary.strip():
            dropped += 1
            continue
        try:
            events.append(DatedEvent(parse_date(start.strip()), summary))
        except DateError:
            dropped += 1
    if dropped:
        logger.warning("dropped %d invalid timeline entries", dropped)
    if not events:
        raise UnparseableOutput("model output contained no valid timeline entries")
    return events, dropped
