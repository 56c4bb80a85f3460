from newsline.llm.gateway import ChatBackend, ChatRequest, Gateway, HttpChatBackend, TranscriptCache, gateway_from_env
from newsline.llm.parsing import find_list, parse_question_list, parse_timeline
from newsline.llm.prompts import TEMPLATES, PromptTemplate, render, serialize_docs

__all__ = [
    "ChatBackend",
    "ChatRequest",
    "Gateway",
    "HttpChatBackend",
    "PromptTemplate",
    "TEMPLATES",
    "TranscriptCache",
    "find_list",
    "gateway_from_env",
    "parse_question_list",
    "parse_timeline",
    "render",
    "serialize_docs",
]
