"""Report data: word-cloud frequencies, Sankey links, metric tables, curve CSVs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import jsonschema

from .artifacts import canonical_json, dump_json
from .errors import MissingArtifact

METRIC_ROWS = (("CH Index", "ch_index"), ("DB Index", "db_index"), ("Silhouette Score", "silhouette"))

_LINK = {
    "type": "object",
    "required": ["source", "target", "weight", "kind"],
    "properties": {
        "source": {"type": "string"}, "target": {"type": "string"},
        "weight": {"type": "integer", "minimum": 1},
        "kind": {"enum": ["keyword_group", "group_theme"]},
    },
}
SCHEMAS = {
    "themes.json": {
        "type": "object", "required": ["clusters"],
        "properties": {"clusters": {"type": "array", "items": {
            "type": "object",
            "required": ["cluster_id", "themes", "rounds", "final_score", "terminal_reason"],
            "properties": {
                "cluster_id": {"type": "integer"},
                "rounds": {"type": "integer", "minimum": 1},
                "final_score": {"type": "number", "minimum": 0, "maximum": 1},
                "themes": {"type": "array", "items": {
                    "type": "object", "required": ["title", "description", "groups"]}},
            },
        }}},
    },
    "wordcloud.json": {
        "type": "object", "required": ["clusters"],
        "properties": {"clusters": {"type": "array", "items": {
            "type": "object", "required": ["cluster_id", "frequencies"],
            "properties": {"frequencies": {"type": "object",
                                           "additionalProperties": {"type": "integer", "minimum": 1}}},
        }}},
    },
    "sankey.json": {
        "type": "object", "required": ["clusters"],
        "properties": {"clusters": {"type": "array", "items": {
            "type": "object", "required": ["cluster_id", "links"],
            "properties": {"links": {"type": "array", "items": _LINK}},
        }}},
    },
    "metrics.json": {
        "type": "object", "required": ["columns", "rows"],
        "properties": {
            "columns": {"type": "array", "items": {"type": "string"}},
            "rows": {"type": "array", "items": {
                "type": "object", "required": ["metric", "with_autoencoder", "without_autoencoder"]}},
        },
    },
}


def _count(haystack: str, needle: str) -> int:
    # str.count is non-overlapping, which is what a phrase tally wants
    return haystack.count(needle) if needle else 0


def keyword_frequencies(themes, texts: Sequence[str]) -> dict[str, int]:
    """Case-insensitive phrase counts over the sampled texts, floored at 1."""
    lowered = [t.casefold() for t in texts]
    return {kw: max(1, sum(_count(t, kw.casefold()) for t in lowered)) for kw in themes.keywords}


def _citations(themes) -> dict[str, int]:
    cites: dict[str, int] = {}
    for theme in themes.themes:
        for g in theme.groups:
            cites[g] = cites.get(g, 0) + 1
    return cites


def sankey_scale(themes, freqs: Mapping[str, int]) -> int:
    """Smallest integer multiplier that keeps every split group->theme share >= 1."""
    cites = _citations(themes)
    scale = 1
    for name, members in themes.groups:
        w = sum(int(freqs.get(kw, 1)) for kw in members)
        scale = max(scale, math.ceil(cites.get(name, 0) / w))
    return scale


def sankey_links(themes, freqs: Mapping[str, int]) -> list[dict]:
    """Keyword->group links weighted by keyword frequency, then group->theme
    links carrying the group's summed weight.

    A group cited by several themes splits its weight between them (largest
    remainder, earlier themes first) so inbound and outbound flow stay equal.
    If a split would leave a share of 0, every weight in the diagram is
    multiplied by :func:`sankey_scale`.
    """
    scale = sankey_scale(themes, freqs)
    cites = _citations(themes)
    links = []
    remaining = {}
    for name, members in themes.groups:
        total = 0
        for kw in members:
            w = scale * int(freqs.get(kw, 1))
            links.append({"source": kw, "target": name, "weight": w, "kind": "keyword_group"})
            total += w
        if cites.get(name):
            base, extra = divmod(total, cites[name])
            remaining[name] = [base + 1] * extra + [base] * (cites[name] - extra)
    for theme in themes.themes:
        for g in theme.groups:
            links.append({"source": g, "target": theme.title, "weight": remaining[g].pop(0),
                          "kind": "group_theme"})
    return links


def flow_imbalance(links: Iterable[dict]) -> dict[str, int]:
    """Inbound minus outbound weight for every group that feeds a theme.

    Groups no theme cites are sinks and are left out.
    """
    inbound: dict[str, int] = {}
    outbound: dict[str, int] = {}
    for link in links:
        if link["kind"] == "keyword_group":
            inbound[link["target"]] = inbound.get(link["target"], 0) + link["weight"]
        else:
            outbound[link["source"]] = outbound.get(link["source"], 0) + link["weight"]
    return {g: inbound.get(g, 0) - w for g, w in outbound.items()}


@dataclass
class MetricsTable:
    with_ae: dict
    without_ae: dict
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "columns": ["Metrics", "With Autoencoder Compression", "Without Autoencoder Compression"],
            "rows": [
                {"metric": name, "key": key,
                 "with_autoencoder": _json_number(self.with_ae[key]),
                 "without_autoencoder": _json_number(self.without_ae[key])}
                for name, key in METRIC_ROWS
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsTable":
        w = {r["key"]: _from_json_number(r["with_autoencoder"]) for r in d["rows"]}
        wo = {r["key"]: _from_json_number(r["without_autoencoder"]) for r in d["rows"]}
        return cls(w, wo, d.get("label", ""))

    def to_text(self) -> str:
        """Aligned plain-text table in the layout of the published comparison tables."""
        header = ("Metrics", "With Autoencoder", "Without Autoencoder")
        sub = ("", "Compression", "Compression")
        body = [(name, _fmt(key, self.with_ae[key]), _fmt(key, self.without_ae[key]))
                for name, key in METRIC_ROWS]
        rows = [header, sub] + body
        widths = [max(len(r[i]) for r in rows) for i in range(3)]

        def line(r):
            return "  ".join([r[0].ljust(widths[0])] + [r[i].rjust(widths[i]) for i in (1, 2)]).rstrip()

        rule = "-" * (sum(widths) + 4)
        return "\n".join([rule, line(header), line(sub), rule] + [line(r) for r in body] + [rule]) + "\n"


def _fmt(key: str, value: float) -> str:
    if value is None or (isinstance(value, float) and math.isinf(value)):
        return "inf"
    if key == "ch_index":
        return f"{value:.0f}"
    return f"{value:.2f}"


def _json_number(x):
    return "inf" if isinstance(x, float) and math.isinf(x) else x


def _from_json_number(x):
    return math.inf if x == "inf" else x


def metrics_table(with_ae, without_ae, label: str = "") -> MetricsTable:
    """Pair two ClusterQuality results (or plain metric dicts) into one table."""
    def as_dict(q):
        return q.summary() if hasattr(q, "summary") else dict(q)
    return MetricsTable(as_dict(with_ae), as_dict(without_ae), label)


def curves_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _write_checked(obj, path: Path) -> None:
    schema = SCHEMAS.get(path.name)
    if schema is not None:
        jsonschema.validate(obj, schema)
    canonical_json(obj)  # raises on NaN/inf before anything is written
    dump_json(obj, path)


def _write_csv_checked(text: str, path: Path) -> None:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError(f"{path.name}: ragged CSV")
    path.write_text(text, encoding="utf-8", newline="")


def build_theme_report(transcripts: Sequence, samples: Mapping[int, Sequence[str]],
                       cluster_ids: Sequence[int]) -> dict:
    """Assemble the per-cluster report payloads; every cluster needs a transcript."""
    by_id = {t.cluster_id: t for t in transcripts}
    missing = [c for c in cluster_ids if c not in by_id]
    if missing:
        raise MissingArtifact("themes", f"transcript missing for cluster {', '.join(map(str, missing))}")
    themes, cloud, sankey = [], [], []
    for cid in cluster_ids:
        t = by_id[cid]
        final = t.final
        freqs = keyword_frequencies(final, samples.get(cid, ()))
        links = sankey_links(final, freqs)
        themes.append({
            "cluster_id": cid,
            "rounds": len(t.rounds),
            "final_score": t.rounds[-1][1].score,
            "terminal_reason": t.terminal_reason,
            "score_history": [ev.score for _, ev in t.rounds],
            "themes": [{"title": th.title, "description": th.description, "groups": th.groups}
                       for th in final.themes],
        })
        cloud.append({"cluster_id": cid, "frequencies": freqs})
        sankey.append({"cluster_id": cid, "scale": sankey_scale(final, freqs), "links": links})
    return {"themes.json": {"clusters": themes},
            "wordcloud.json": {"clusters": cloud},
            "sankey.json": {"clusters": sankey}}


def write_report(out_dir, manifest: Optional[dict], transcripts: Sequence, samples: Mapping[int, Sequence[str]],
                 cluster_ids: Sequence[int], tables: Sequence[MetricsTable],
                 curves: Mapping[str, tuple]) -> Path:
    """Write ``themes/wordcloud/sankey/metrics.json``, ``curves/*.csv`` and ``manifest.json``.

    ``curves`` maps a file stem to ``(header, rows)``. Every JSON file is
    schema-checked before it is written; Sankey flow is checked per group.
    """
    out = Path(out_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    payloads = build_theme_report(transcripts, samples, cluster_ids)
    for entry in payloads["sankey.json"]["clusters"]:
        bad = [g for g, v in flow_imbalance(entry["links"]).items() if v != 0]
        if bad:
            raise ValueError(f"cluster {entry['cluster_id']}: Sankey flow not conserved at {sorted(bad)}")
    payloads["metrics.json"] = {
        "columns": ["Metrics", "With Autoencoder Compression", "Without Autoencoder Compression"],
        "rows": [row for t in tables for row in t.to_dict()["rows"]],
        "tables": [t.to_dict() for t in tables],
        "text": "".join(t.to_text() for t in tables),
    }
    for name, obj in payloads.items():
        _write_checked(obj, out / name)
    for stem, (header, rows) in curves.items():
        _write_csv_checked(curves_to_csv(header, rows), out / "curves" / f"{stem}.csv")
    if manifest is not None:
        dump_json(manifest, out / "manifest.json")
    return out
