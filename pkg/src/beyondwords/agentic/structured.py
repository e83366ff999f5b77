"""Theme data types and the ``===BEGIN===`` / ``===END===`` block format.

Inside a block, a header line (``keywords:``, ``groups:``, ``themes:``)
opens a list of ``name | detail`` items; ``score:`` and ``feedback:`` carry
their value on the same line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import ParseError

BEGIN, END = "===BEGIN===", "===END==="
_BLOCK_RE = re.compile(r"^\s*===BEGIN===\s*$(.*?)^\s*===END===\s*$", re.MULTILINE | re.DOTALL)
_HEADER_RE = re.compile(r"^(keywords|groups|themes|score|feedback)\s*:\s*(.*)$", re.IGNORECASE)
_BULLET_RE = re.compile(r"^(?:[-*•]\s+|\d+[.)]\s+)")
_SPLIT_RE = re.compile(r"\s*[,;]\s*")


@dataclass
class Theme:
    title: str
    description: str
    groups: list[str]


@dataclass
class ThemeSet:
    cluster_id: int
    keywords: list[str]
    groups: list[tuple[str, list[str]]]
    themes: list[Theme]
    iteration: int = 1

    def validate(self) -> None:
        if self.iteration < 1:
            raise ParseError("iteration must be >= 1")
        known = set(self.keywords)
        for name, members in self.groups:
            for kw in members:
                if kw not in known:
                    raise ParseError(f"group {name!r} references unknown keyword {kw!r}")
        group_names = {name for name, _ in self.groups}
        for theme in self.themes:
            if not theme.title.strip():
                raise ParseError("theme with empty title")
            if not theme.groups:
                raise ParseError(f"theme {theme.title!r} references no group")
            for g in theme.groups:
                if g not in group_names:
                    raise ParseError(f"theme {theme.title!r} references unknown group {g!r}")

    def render(self) -> str:
        lines = []
        for t in self.themes:
            lines.append(f"- {t.title}: {t.description} (groups: {', '.join(t.groups)})")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "iteration": self.iteration,
            "keywords": list(self.keywords),
            "groups": [{"name": n, "keywords": list(m)} for n, m in self.groups],
            "themes": [{"title": t.title, "description": t.description, "groups": list(t.groups)}
                       for t in self.themes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ThemeSet":
        ts = cls(
            int(d["cluster_id"]), list(d["keywords"]),
            [(g["name"], list(g["keywords"])) for g in d["groups"]],
            [Theme(t["title"], t["description"], list(t["groups"])) for t in d["themes"]],
            int(d.get("iteration", 1)),
        )
        ts.validate()
        return ts


@dataclass
class Evaluation:
    score: float
    feedback: str
    raw: str = field(default="", repr=False)

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ParseError(f"score {self.score} outside [0, 1]")
        if not self.feedback.strip():
            raise ParseError("empty feedback")

    def to_dict(self) -> dict:
        return {"score": self.score, "feedback": self.feedback, "raw": self.raw}

    @classmethod
    def from_dict(cls, d: dict) -> "Evaluation":
        return cls(float(d["score"]), d["feedback"], d.get("raw", ""))


def extract_block(text: str) -> str:
    """Body of the last BEGIN/END block in ``text``."""
    blocks = _BLOCK_RE.findall(text)
    if not blocks:
        raise ParseError("no ===BEGIN=== / ===END=== block found")
    return blocks[-1]


def parse_block(text: str) -> dict:
    """Split a block into ``{section: [items]}``; scalar fields map to a string."""
    body = extract_block(text)
    out: dict = {}
    current = None
    for raw_line in body.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        m = _HEADER_RE.match(line)
        if m:
            key, rest = m.group(1).lower(), m.group(2).strip()
            if key in ("score", "feedback"):
                out[key] = rest
                current = None
            else:
                current = out.setdefault(key, [])
                if rest and key == "keywords":
                    # inline form: "keywords: a, b, c"
                    current.extend(x for x in _SPLIT_RE.split(rest) if x)
                elif rest:
                    current.append(rest)
            continue
        if current is None:
            continue
        current.append(_BULLET_RE.sub("", line))
    return out


def _fields(item: str) -> list[str]:
    return [part.strip() for part in item.split("|")]


def _unique(seq):
    seen, out = set(), []
    for x in seq:
        key = x.casefold()
        if x and key not in seen:
            seen.add(key)
            out.append(x)
    return out


def parse_keywords(text: str) -> list[str]:
    items = parse_block(text).get("keywords")
    if not items:
        raise ParseError("block has no keywords")
    return _unique(_fields(item)[0] for item in items)


def parse_groups(text: str, keywords: list[str]) -> list[tuple[str, list[str]]]:
    items = parse_block(text).get("groups")
    if not items:
        raise ParseError("block has no groups")
    canon = {k.casefold(): k for k in keywords}
    groups = []
    for item in items:
        parts = _fields(item)
        if len(parts) < 2 or not parts[0]:
            raise ParseError(f"group line {item!r} is not 'name | keyword, ...'")
        members = []
        for m in _SPLIT_RE.split(parts[1]):
            if not m:
                continue
            if m.casefold() not in canon:
                raise ParseError(f"group {parts[0]!r} references unknown keyword {m!r}")
            members.append(canon[m.casefold()])
        if not members:
            raise ParseError(f"group {parts[0]!r} has no members")
        groups.append((parts[0], _unique(members)))
    return groups


def parse_themes(text: str, groups: list[tuple[str, list[str]]]) -> list[Theme]:
    items = parse_block(text).get("themes")
    if not items:
        raise ParseError("block has no themes")
    canon = {name.casefold(): name for name, _ in groups}
    themes = []
    for item in items:
        parts = _fields(item)
        if len(parts) < 3 or not parts[0]:
            raise ParseError(f"theme line {item!r} is not 'title | description | group, ...'")
        refs = []
        for g in _SPLIT_RE.split(parts[2]):
            if not g:
                continue
            if g.casefold() not in canon:
                raise ParseError(f"theme {parts[0]!r} references unknown group {g!r}")
            refs.append(canon[g.casefold()])
        if not refs:
            raise ParseError(f"theme {parts[0]!r} references no group")
        themes.append(Theme(parts[0], parts[1], _unique(refs)))
    return themes


_NUM = r"(\d+(?:\.\d+)?)"
_SCORE_FIELD_RE = re.compile(rf"^\s*{_NUM}\s*(?:/\s*10)?\s*$")
_FREE_SCORE_RE = re.compile(rf"{_NUM}(?:\s*/\s*10(?![\d.]))?")


def _normalize(value: float) -> float:
    if not 0.0 <= value <= 10.0:
        raise ParseError(f"score {value} outside the 0-10 scale")
    return value / 10.0


def parse_score_feedback(raw: str) -> Evaluation:
    """Score (0-10, returned /10) and feedback from a grader reply.

    The structured block is tried first. Failing that, the first number
    (optionally written ``x/10``) in the free text is the score and
    everything after it is the feedback.
    """
    if not raw or not raw.strip():
        raise ParseError("empty grader response")
    try:
        fields = parse_block(raw)
    except ParseError:
        fields = {}
    score_txt, feedback = fields.get("score"), fields.get("feedback", "")
    if isinstance(score_txt, str) and isinstance(feedback, str) and feedback.strip():
        m = _SCORE_FIELD_RE.match(score_txt)
        if m:
            return Evaluation(_normalize(float(m.group(1))), feedback.strip(), raw)

    for m in _FREE_SCORE_RE.finditer(raw):
        value = float(m.group(1))
        if value <= 10.0:
            rest = raw[m.end():].strip()
            return Evaluation(_normalize(value), rest or raw.strip(), raw)
    raise ParseError("no score found in grader response")
