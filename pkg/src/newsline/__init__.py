"""Timeline summarization of news topics by iterative self-questioning."""

from newsline.core import Article, DatedEvent, EventDate, Timeline, Topic, parse_date
from newsline.metrics import MetricReport, TokenizerConfig, evaluate
from newsline.pipeline import PipelineConfig, RunReport, Services, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "Article",
    "DatedEvent",
    "EventDate",
    "MetricReport",
    "PipelineConfig",
    "RunReport",
    "Services",
    "Timeline",
    "TokenizerConfig",
    "Topic",
    "evaluate",
    "parse_date",
    "run_pipeline",
]
