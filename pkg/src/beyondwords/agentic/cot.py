"""Three-step chain-of-thought extraction (keywords, groups, themes) and grading."""

from __future__ import annotations

import logging
from importlib import resources
from pathlib import Path
from string import Template
from typing import Callable, Optional, Sequence

from ..errors import ParseError
from .structured import (
    Evaluation, ThemeSet, parse_groups, parse_keywords, parse_score_feedback, parse_themes,
)

log = logging.getLogger(__name__)

TEMPLATE_NAMES = (
    "system", "keywords", "groups", "themes", "feedback",
    "grader", "grader_feedback", "repair", "extractor",
)


class PromptTemplates:
    """Prompt texts keyed by name; defaults ship with the package.

    ``overrides`` maps a template name to a file path, so single prompts can
    be edited without copying the rest.
    """

    def __init__(self, texts: dict):
        missing = set(TEMPLATE_NAMES) - set(texts)
        if missing:
            raise ValueError(f"missing prompt templates: {sorted(missing)}")
        self.texts = dict(texts)

    @classmethod
    def load(cls, directory=None, overrides: Optional[dict] = None) -> "PromptTemplates":
        texts = {}
        base = resources.files("beyondwords.agentic") / "prompts"
        for name in TEMPLATE_NAMES:
            texts[name] = (base / f"{name}.txt").read_text(encoding="utf-8")
            if directory is not None and (Path(directory) / f"{name}.txt").is_file():
                texts[name] = (Path(directory) / f"{name}.txt").read_text(encoding="utf-8")
        for name, path in (overrides or {}).items():
            if name not in TEMPLATE_NAMES:
                raise ValueError(f"unknown prompt template {name!r}")
            texts[name] = Path(path).read_text(encoding="utf-8")
        return cls(texts)

    def render(self, name: str, **values) -> str:
        return Template(self.texts[name]).substitute(**values).strip()


_DEFAULT: Optional[PromptTemplates] = None


def default_templates() -> PromptTemplates:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = PromptTemplates.load()
    return _DEFAULT


def format_posts(texts: Sequence[str]) -> str:
    return "\n".join(f"{i}. {t}" for i, t in enumerate(texts, start=1))


def _ask(client, messages: list, parse: Callable, templates: PromptTemplates):
    """Send ``messages``; on a parse failure re-ask once with the error attached."""
    reply = client.complete(messages)
    try:
        return reply, parse(reply)
    except ParseError as exc:
        log.info("re-asking after unparseable reply: %s", exc)
        messages.append({"role": "assistant", "content": reply})
        messages.append({"role": "user", "content": templates.render("repair", error=str(exc))})
        reply = client.complete(messages)
        return reply, parse(reply)


def extract_themes(texts: Sequence[str], client, prior: Optional[tuple] = None, *,
                   cluster_id: int = 0, iteration: int = 1,
                   previous: Optional[ThemeSet] = None,
                   templates: Optional[PromptTemplates] = None) -> ThemeSet:
    """Run the keyword -> group -> theme prompt chain on one cluster sample.

    ``prior`` is the ``(score, feedback)`` pair from the last grading round;
    it is quoted verbatim at the top of the first prompt. The conversation is
    kept as one message thread, so later prompts carry it too.
    """
    if not texts:
        raise ValueError("sample is empty")
    templates = templates or default_templates()
    feedback_block = ""
    if prior is not None:
        score, feedback = prior
        feedback_block = templates.render(
            "feedback", score=score, feedback=feedback,
            previous_themes=previous.render() if previous is not None else "(not available)",
        ) + "\n\n"

    messages = [
        {"role": "system", "content": templates.render("system")},
        {"role": "user", "content": templates.render(
            "keywords", feedback_block=feedback_block, n_posts=len(texts), posts=format_posts(texts))},
    ]
    reply, keywords = _ask(client, messages, parse_keywords, templates)

    messages.append({"role": "assistant", "content": reply})
    messages.append({"role": "user", "content": templates.render(
        "groups", keywords="\n".join(f"- {k}" for k in keywords))})
    reply, groups = _ask(client, messages, lambda r: parse_groups(r, keywords), templates)

    messages.append({"role": "assistant", "content": reply})
    messages.append({"role": "user", "content": templates.render(
        "themes", groups="\n".join(f"- {name}: {', '.join(m)}" for name, m in groups))})
    _, themes = _ask(client, messages, lambda r: parse_themes(r, groups), templates)

    result = ThemeSet(cluster_id, keywords, groups, themes, iteration)
    result.validate()
    return result


def evaluate_themes(themes: ThemeSet, client, texts: Sequence[str] = (),
                    prior: Optional[tuple] = None,
                    templates: Optional[PromptTemplates] = None) -> str:
    """Ask the grader model for a 0-10 score and feedback; returns its raw reply."""
    if not themes.themes:
        raise ValueError("no themes to evaluate")
    themes.validate()
    templates = templates or default_templates()
    block = ""
    if prior is not None:
        block = "\n" + templates.render("grader_feedback", feedback=prior[1]) + "\n"
    prompt = templates.render("grader", feedback_block=block, posts=format_posts(texts),
                              themes=themes.render())
    return client.complete([
        {"role": "system", "content": templates.render("system")},
        {"role": "user", "content": prompt},
    ])


def extract_evaluation(raw: str, extractor=None,
                       templates: Optional[PromptTemplates] = None) -> Evaluation:
    """Parse grader output, optionally routing it through a third extraction model first."""
    if extractor is None:
        return parse_score_feedback(raw)
    templates = templates or default_templates()
    restated = extractor.complete([
        {"role": "system", "content": templates.render("system")},
        {"role": "user", "content": templates.render("extractor", raw=raw)},
    ])
    try:
        ev = parse_score_feedback(restated)
    except ParseError:
        ev = parse_score_feedback(raw)
    return Evaluation(ev.score, ev.feedback, raw)
