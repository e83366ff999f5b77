"""Agentic theme extraction: chain-of-thought generation graded by a second model."""

from .clients import ChatClientSpec, HttpChatClient, ScriptedClient, Usage, build_client
from .cot import PromptTemplates, evaluate_themes, extract_evaluation, extract_themes
from .loop import (
    MAX_ITERATIONS, THRESHOLD_MET, RefinementError, RefinementTranscript, RunSummary,
    refine_loop, run_all_clusters,
)
from .structured import Evaluation, Theme, ThemeSet, parse_score_feedback

__all__ = [
    "ChatClientSpec", "Evaluation", "HttpChatClient", "MAX_ITERATIONS", "PromptTemplates",
    "RefinementError", "RefinementTranscript", "RunSummary", "ScriptedClient", "THRESHOLD_MET",
    "Theme", "ThemeSet", "Usage", "build_client", "evaluate_themes", "extract_evaluation",
    "extract_themes", "parse_score_feedback", "refine_loop", "run_all_clusters",
]
