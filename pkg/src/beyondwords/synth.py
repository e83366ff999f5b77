"""Synthetic post corpora with planted topics, for tests and offline runs."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Sequence

import numpy as np

TOPIC_LEXICONS: tuple[tuple[str, ...], ...] = (
    ("sensory", "overload", "noise", "lights", "crowded", "loud", "meltdown", "headphones",
     "texture", "bright", "shutdown", "stimming", "quiet", "smells", "supermarket"),
    ("burnout", "job", "work", "masking", "office", "boss", "interview", "career",
     "exhausted", "employment", "accommodations", "workplace", "deadline", "colleagues", "meetings"),
    ("diagnosis", "identity", "community", "diagnosed", "proud", "acceptance", "advocacy",
     "neurodivergent", "voices", "belonging", "adulthood", "validation", "representation", "pride", "assessment"),
    ("school", "parents", "teacher", "kids", "family", "classroom", "sibling", "homework",
     "education", "childhood", "playground", "bullying", "lessons", "grades", "recess"),
    ("doctor", "therapy", "appointment", "healthcare", "clinic", "medication", "anxiety",
     "therapist", "waitlist", "referral", "insurance", "psychiatrist", "treatment", "nurse", "pharmacy"),
    ("friends", "conversation", "social", "cues", "eye", "contact", "smalltalk", "party",
     "texting", "invitations", "loneliness", "jokes", "sarcasm", "dating", "gatherings"),
)

_TEMPLATES = (
    "i think the {0} and the {1} are about {2} with {3} for me",
    "today was all about {0} and {1}, then {2} at the {3} again",
    "does anyone else find {0} hard when {1} and {2} are in the {3}?",
    "my {0} is better now but the {1} with {2} and {3} is not",
    "we need to talk about {0}, {1} and {2} because {3} is real",
)
_EXTRAS = ("", "", " #ActuallyAutistic", " #actuallyautistic", " https://t.co/{k}", " @friend{k}")
_WORD_RE = re.compile(r"[a-z]+")


def topic_of(text: str, lexicons: Sequence[Sequence[str]] = TOPIC_LEXICONS) -> int:
    """Index of the lexicon with the most word hits (ties go to the lower index)."""
    words = _WORD_RE.findall(text.lower())
    hits = [sum(1 for w in words if w in set(lex)) for lex in lexicons]
    return int(np.argmax(hits))


def generate_posts(n_posts: int, n_topics: int = 3, seed: int = 0) -> list[dict]:
    """Balanced corpus of ``n_posts`` JSONL records over ``n_topics`` planted topics."""
    if not 1 <= n_topics <= len(TOPIC_LEXICONS):
        raise ValueError(f"n_topics must be in 1..{len(TOPIC_LEXICONS)}")
    if n_posts < 0:
        raise ValueError("n_posts must be non-negative")
    rng = np.random.default_rng(seed)
    labels = np.arange(n_posts) % n_topics
    rng.shuffle(labels)
    seen: set[str] = set()
    records = []
    for i, label in enumerate(labels):
        lex = TOPIC_LEXICONS[int(label)]
        while True:
            words = rng.choice(len(lex), size=4, replace=False)
            template = _TEMPLATES[int(rng.integers(len(_TEMPLATES)))]
            base = template.format(*(lex[j] for j in words))
            extra = _EXTRAS[int(rng.integers(len(_EXTRAS)))].format(k=int(rng.integers(1000)))
            # uniqueness on the part that survives cleaning
            if base not in seen:
                break
        seen.add(base)
        text = base + extra
        records.append({
            "id": f"p{i:05d}",
            "text": text,
            "lang": "en",
            "topic": int(label),
        })
    return records


def write_jsonl(records: Sequence[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path
