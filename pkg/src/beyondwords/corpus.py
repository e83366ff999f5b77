"""Post corpus loading, filtering and text cleaning."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import CorpusError

_URL_RE = re.compile(r"(?:[A-Za-z][A-Za-z0-9+.\-]*://|\bwww\.)\S*", re.IGNORECASE)
_MENTION_RE = re.compile(r"(?<!\S)@\S*")
_HASHTAG_RE = re.compile(r"(?<!\S)#\S*")
_WS_RE = re.compile(r"\s+")
_KEEP_PUNCT = frozenset(" .,!?'-")

# Small closed list; enough for a yes/no English check, not for NLP.
ENGLISH_STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because been
    before being below between both but by can could did do does doing down during
    each few for from further had has have having he her here hers herself him
    himself his how i if in into is it its itself just me more most my myself no
    nor not now of off on once only or other our ours ourselves out over own same
    she should so some such than that the their theirs them themselves then there
    these they this those through to too under until up very was we were what when
    where which while who whom why will with would you your yours yourself
    yourselves im dont cant its
    """.split()
)


@dataclass(frozen=True)
class Post:
    id: str
    raw_text: str
    clean_text: str = ""
    created_at: Optional[str] = None
    lang: Optional[str] = None

    def to_record(self) -> dict:
        rec = {"id": self.id, "raw_text": self.raw_text, "clean_text": self.clean_text}
        if self.created_at is not None:
            rec["created_at"] = self.created_at
        if self.lang is not None:
            rec["lang"] = self.lang
        return rec


@dataclass(frozen=True)
class Corpus:
    posts: tuple[Post, ...]
    source_path: str = ""
    filters_applied: tuple[dict, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen = set()
        for post in self.posts:
            if not post.id:
                raise CorpusError("post with empty id")
            if post.id in seen:
                raise CorpusError(f"duplicate post id {post.id!r}")
            seen.add(post.id)

    def __len__(self) -> int:
        return len(self.posts)

    def __iter__(self):
        return iter(self.posts)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.posts]

    def _derive(self, posts: Iterable[Post], descriptor: dict) -> "Corpus":
        return Corpus(tuple(posts), self.source_path, self.filters_applied + (descriptor,))


def _make_post(rec: dict, where: str) -> Post:
    if not isinstance(rec, dict):
        raise CorpusError(f"{where}: record is not an object")
    pid, text = rec.get("id"), rec.get("text")
    if pid is None or text is None:
        raise CorpusError(f"{where}: record needs 'id' and 'text' fields")
    if not isinstance(text, str):
        raise CorpusError(f"{where}: 'text' must be a string")
    pid = str(pid)
    if not pid:
        raise CorpusError(f"{where}: empty id")
    return Post(
        id=pid,
        raw_text=text,
        created_at=rec.get("created_at") or None,
        lang=rec.get("lang") or None,
    )


def load_corpus(path, format: str = "jsonl") -> Corpus:
    """Read posts from a JSONL or CSV file, keeping file order.

    Malformed records raise :class:`CorpusError` with the offending line
    number; repeated ids are rejected.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    if format not in ("jsonl", "csv"):
        raise CorpusError(f"unknown corpus format {format!r}")

    posts: list[Post] = []
    seen: set[str] = set()

    def add(post: Post, lineno: int):
        if post.id in seen:
            raise CorpusError(f"line {lineno}: duplicate post id {post.id!r}")
        seen.add(post.id)
        posts.append(post)

    with path.open(encoding="utf-8", newline="") as fh:
        if format == "jsonl":
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
                add(_make_post(rec, f"line {lineno}"), lineno)
        else:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return Corpus((), str(path))
            missing = {"id", "text"} - set(reader.fieldnames)
            if missing:
                raise CorpusError(f"line 1: CSV header lacks {sorted(missing)}")
            for rec in reader:
                lineno = reader.line_num
                add(_make_post(rec, f"line {lineno}"), lineno)

    return Corpus(tuple(posts), str(path))


def filter_by_tags(c: Corpus, variants: Sequence[str], case_insensitive: bool = True) -> Corpus:
    if not variants:
        raise ValueError("variants must be non-empty")
    if case_insensitive:
        needles = [v.casefold() for v in variants]
        keep = (p for p in c.posts if any(n in p.raw_text.casefold() for n in needles))
    else:
        keep = (p for p in c.posts if any(v in p.raw_text for v in variants))
    return c._derive(
        keep, {"filter": "tags", "variants": list(variants), "case_insensitive": case_insensitive}
    )


def looks_english(text: str, min_ascii: float = 0.8, min_stopwords: int = 3) -> bool:
    """ASCII share of letters plus a distinct-stopword count."""
    letters = [ch for ch in text if ch.isalpha()]
    if not letters:
        return False
    ascii_share = sum(1 for ch in letters if ord(ch) < 128) / len(letters)
    if ascii_share < min_ascii:
        return False
    words = set(re.findall(r"[a-z']+", text.lower()))
    return len(words & ENGLISH_STOPWORDS) >= min_stopwords


def filter_language(c: Corpus, lang: str = "en") -> Corpus:
    code = lang.lower()

    def ok(p: Post) -> bool:
        if p.lang is not None:
            return p.lang.lower() == code
        # the heuristic only knows English
        return code == "en" and looks_english(p.raw_text)

    return c._derive((p for p in c.posts if ok(p)), {"filter": "language", "lang": code})


def _clean_once(text: str) -> str:
    text = _URL_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = _HASHTAG_RE.sub(" ", text)
    text = "".join(
        ch if (ch.isalpha() or ch.isdigit() or ch in _KEEP_PUNCT or ch.isspace()) else " "
        for ch in text
    )
    return _WS_RE.sub(" ", text).strip()


def clean_text(raw: str) -> str:
    """Strip URLs, @mentions, #hashtags and special characters.

    >>> clean_text("Check https://t.co/xyz @user #actuallyautistic !!")
    'Check !!'
    """
    # Character removal can expose a new "www." or "@x" token, so repeat until
    # nothing changes; each pass only removes or blanks characters, so this
    # terminates.
    prev, cur = None, raw
    while cur != prev:
        prev, cur = cur, _clean_once(cur)
    return cur


def clean_corpus(c: Corpus, drop_empty: bool = True) -> Corpus:
    """Fill ``clean_text`` for every post; optionally drop posts left empty."""
    cleaned = [replace(p, clean_text=clean_text(p.raw_text)) for p in c.posts]
    if drop_empty:
        cleaned = [p for p in cleaned if p.clean_text]
    return c._derive(cleaned, {"filter": "clean", "drop_empty": drop_empty})


def write_corpus_jsonl(c: Corpus, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for p in c.posts:
            fh.write(json.dumps(p.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def read_corpus_jsonl(path, source_path: str = "", filters: Sequence[dict] = ()) -> Corpus:
    """Inverse of :func:`write_corpus_jsonl` (keeps clean_text)."""
    posts = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                r = json.loads(line)
                posts.append(
                    Post(r["id"], r["raw_text"], r.get("clean_text", ""), r.get("created_at"), r.get("lang"))
                )
    return Corpus(tuple(posts), source_path, tuple(filters))
