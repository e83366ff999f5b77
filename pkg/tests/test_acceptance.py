"""Acceptance criteria, one test each, at their stated tolerances and time budgets.

Every test records a one-line PASS/FAIL verdict; conftest prints them all in
the terminal summary so ``pytest tests/test_acceptance.py`` ends with the
scorecard.
"""

import json
import shutil
import time
from fractions import Fraction

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from beyondwords.agentic import ScriptedClient, refine_loop
from beyondwords.agentic.loop import MAX_ITERATIONS, THRESHOLD_MET
from beyondwords.artifacts import load_json
from beyondwords.autoencoder import init_autoencoder, loss_and_gradients
from beyondwords.config import load_config
from beyondwords.latent import ch_index, cluster_quality, db_index, full_svd, silhouette
from beyondwords.pipeline import run_all, stage_run
from beyondwords.report import flow_imbalance, metrics_table
from beyondwords.sampling import Member, RepresentativeSample, cochran_n
from beyondwords.synth import generate_posts, write_jsonl
from tests.conftest import BUNDLED_CONFIG, make_config
from tests.oracles import (
    finite_difference_grads, jacobi_singular_values, max_relative_error, naive_ch, naive_db,
    naive_silhouette,
)
from tests.scripts import generator_script, grade

pytestmark = pytest.mark.acceptance

RESULTS: dict = {}


class Verdict:
    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.checks = []

    def check(self, ok, what):
        self.checks.append((bool(ok), what))

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        if exc_type is not None:
            self.checks.append((False, f"raised {exc_type.__name__}: {exc}"))
        self.check(elapsed < self.budget, f"time {elapsed:.3f}s < {self.budget}s")
        failed = [w for ok, w in self.checks if not ok]
        status = "PASS" if not failed else "FAIL"
        detail = "; ".join(failed) if failed else "; ".join(w for _, w in self.checks)
        RESULTS[self.number] = f"[{status}] criterion {self.number} {self.title} ({elapsed:.2f}s): {detail}"
        print(RESULTS[self.number])
        assert not failed, RESULTS[self.number]
        return False


def test_criterion_1_cochran():
    with Verdict(1, "sample size", budget=1e-3) as v:
        n = cochran_n(1.64, 0.5, 0.1)
        v.check(n == 68, f"cochran_n(1.64, 0.5, 0.1) = {n} (want 68)")


def test_criterion_2_gradients():
    with Verdict(2, "autoencoder gradients vs finite differences", budget=5) as v:
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(20):
            d = int(rng.integers(4, 7))
            ratio = ["1/2", "1/3", "1/4"][int(rng.integers(3))]
            m = init_autoencoder(d, ratio, int(rng.integers(1 << 30)))
            assert m.latent_dim <= 3
            for layer in m.layers:
                layer.bias[:] = rng.normal(scale=0.1, size=layer.bias.shape)
            E = rng.normal(size=(int(rng.integers(2, 9)), d))
            _, grads = loss_and_gradients(m, E)
            numeric = finite_difference_grads(m, E, lambda p, e: loss_and_gradients(p, e)[0], h=1e-5)
            for analytic, fd in zip(grads, numeric):
                for a, f in zip(analytic, fd):
                    worst = max(worst, max_relative_error(a, f))
        v.check(worst < 1e-4, f"max relative error {worst:.2e} < 1e-4 over 20 instances")


def test_criterion_3_svd():
    with Verdict(3, "SVD fidelity vs Jacobi oracle", budget=10) as v:
        rng = np.random.default_rng(3)
        recon = ortho = sv = 0.0
        for _ in range(50):
            n = int(rng.integers(2, 41))
            k = int(rng.integers(1, 17))
            C = rng.normal(size=(n, k)) * rng.uniform(0.1, 10)
            f = full_svd(C)
            r = f.rank
            recon = max(recon, np.linalg.norm(C - f.reconstruct()) / np.linalg.norm(C))
            ortho = max(ortho, np.abs(f.U.T @ f.U - np.eye(r)).max(), np.abs(f.V.T @ f.V - np.eye(r)).max())
            sv = max(sv, np.abs(f.S - jacobi_singular_values(C)[:r]).max())
        v.check(recon < 1e-6, f"reconstruction {recon:.1e} < 1e-6")
        v.check(ortho < 1e-8, f"orthonormality {ortho:.1e} < 1e-8")
        v.check(sv < 1e-8, f"singular values vs Jacobi {sv:.1e} < 1e-8")


def test_criterion_4_metric_oracles():
    with Verdict(4, "validity indices vs loop oracles", budget=10) as v:
        rng = np.random.default_rng(4)
        worst = {"ch": 0.0, "db": 0.0, "sil": 0.0}
        for _ in range(100):
            k = int(rng.choice([2, 3, 4]))
            n = int(rng.integers(k + 1, 51))
            labels = np.arange(n) % k
            rng.shuffle(labels)
            X = rng.normal(size=(n, int(rng.integers(1, 6)))) + labels[:, None] * rng.uniform(0, 3)
            q = cluster_quality(X, labels)
            ref_s, ref_mean = naive_silhouette(X, labels)
            worst["ch"] = max(worst["ch"], abs(q.ch_index - naive_ch(X, labels)) / max(1.0, naive_ch(X, labels)))
            worst["db"] = max(worst["db"], abs(q.db_index - naive_db(X, labels)))
            worst["sil"] = max(worst["sil"], np.abs(q.per_point_silhouette - ref_s).max(),
                               abs(q.mean_silhouette - ref_mean))
        for name, err in worst.items():
            v.check(err <= 1e-9, f"{name} deviation {err:.1e} <= 1e-9")
        A = np.array([[0.0], [0.2], [10.0], [10.2]])
        ch = ch_index(A, [0, 0, 1, 1])
        db = db_index(A, [0, 0, 1, 1])
        s, _ = silhouette(np.array([[0.0], [0.2], [10.0]]), [0, 0, 1])
        v.check(f"{ch:.0f}" == "5000", f"CH hand case {ch:.6f} -> 5000")
        v.check(f"{db:.2f}" == "0.02", f"DB hand case {db:.6f} -> 0.02")
        v.check(f"{s[0]:.2f}" == "0.98", f"silhouette hand case {s[0]:.6f} -> 0.98")


def _planted_run(tmp_path, seed):
    corpus = tmp_path / f"corpus_{seed}.jsonl"
    write_jsonl(generate_posts(300, 3, seed=seed), corpus)
    path = make_config(
        tmp_path,
        corpus={"path": str(corpus)},
        provider={"name": "planted-32", "kind": "planted", "dimension": 32,
                  "separation": 10.0, "noise": 1.0, "seed": seed},
        training={"seed": seed},
        clustering={"seed": seed},
        run_id=f"seed{seed}",
    )
    cfg = load_config(path)
    for stage in ("ingest", "embed", "compress", "factorize", "cluster"):
        stage_run(stage, cfg)
    root = cfg.run_path
    elbow = load_json(root / "clusters" / "elbow.json")
    quality = load_json(root / "clusters" / "quality.json")
    ids = [json.loads(l)["id"] for l in (root / "corpus.jsonl").read_text().splitlines()]
    topic = {r["id"]: r["topic"] for r in map(json.loads, corpus.read_text().splitlines())}
    assigned = [int(l.split(",")[1]) for l in
                (root / "clusters" / "with_ae_assignments.csv").read_text().splitlines()[1:]]
    ari = adjusted_rand_score([topic[i] for i in ids], assigned)
    return elbow["elbow_k"], ari, quality["with_ae"]["db_index"], quality["without_ae"]["db_index"]


def test_criterion_5_planted_recovery(tmp_path):
    with Verdict(5, "planted-theme recovery over 10 seeds", budget=60) as v:
        rows = [_planted_run(tmp_path, seed) for seed in range(10)]
        ks = [r[0] for r in rows]
        aris = [r[1] for r in rows]
        db_wins = sum(r[2] <= r[3] for r in rows)
        v.check(all(k == 3 for k in ks), f"elbow k per seed {ks}")
        v.check(min(aris) >= 0.9, f"min adjusted Rand {min(aris):.3f} >= 0.9")
        v.check(db_wins >= 8, f"DB(with AE) <= DB(without) on {db_wins}/10 seeds "
                              f"(median {np.median([r[2] for r in rows]):.2f} vs {np.median([r[3] for r in rows]):.2f})")


def _trace(scores, max_iterations=3, Q=0.8):
    texts = ["too loud in the shop", "burnout after masking", "lights hurt"]
    sample = RepresentativeSample(0, [Member(f"p{i}", 0.5, t) for i, t in enumerate(texts)])
    llm1 = ScriptedClient(generator_script(max_iterations))
    llm2 = ScriptedClient([grade(round(s * 10, 6), f"feedback after round {i + 1}") for i, s in enumerate(scores)])
    t = refine_loop(sample, llm1, llm2, Q, max_iterations)
    return t, llm1, llm2


def test_criterion_6_refinement_traces():
    with Verdict(6, "refinement state machine traces", budget=1) as v:
        t, llm1, llm2 = _trace([0.5, 0.9])
        v.check(len(t.rounds) == 2 and t.terminal_reason == THRESHOLD_MET, "(0.5, 0.9) -> 2 rounds, threshold_met")
        v.check(t.final is t.rounds[1][0], "final is round-2 themes")
        v.check("feedback after round 1" in llm1.calls[3][1]["content"], "round-2 generator prompt carries feedback")
        v.check("feedback after round 1" in llm2.calls[1][1]["content"], "round-2 grader prompt carries feedback")

        t, llm1, _ = _trace([0.4, 0.4, 0.4])
        v.check(len(t.rounds) == 3 and t.terminal_reason == MAX_ITERATIONS, "always 0.4 -> 3 rounds, max_iterations")
        v.check(all("feedback after round" in llm1.calls[3 * i][1]["content"] for i in (1, 2)),
                "feedback threaded into rounds 2 and 3")

        t, llm1, _ = _trace([0.95])
        v.check(len(t.rounds) == 1 and t.terminal_reason == THRESHOLD_MET and t.final is t.rounds[0][0],
                "0.95 -> 1 round, initial themes kept")
        v.check(not any("Reviewer feedback" in m["content"] for call in llm1.calls for m in call),
                "no feedback block in a first round")

        a, b = _trace([0.5, 0.6, 0.7]), _trace([0.5, 0.6, 0.7])
        v.check(a[0].to_dict() == b[0].to_dict() and a[1].calls == b[1].calls and a[2].calls == b[2].calls,
                "transcripts and prompts identical across runs")


@pytest.fixture(scope="module")
def generated_report(tmp_path_factory):
    cfg = load_config(make_config(tmp_path_factory.mktemp("report")))
    return run_all(cfg) / "report"


def test_criterion_7_report_integrity(generated_report):
    with Verdict(7, "report integrity", budget=1) as v:
        sankey = load_json(generated_report / "sankey.json")
        bad = [(c["cluster_id"], g) for c in sankey["clusters"] for g, d in flow_imbalance(c["links"]).items() if d]
        v.check(sankey["clusters"] and not bad, f"flow conserved at every group of {len(sankey['clusters'])} clusters")
        v.check(all(l["weight"] >= 1 for c in sankey["clusters"] for l in c["links"]), "all link weights >= 1")

        published = metrics_table({"ch_index": 366243, "db_index": 0.62, "silhouette": 0.48},
                                  {"ch_index": 6235, "db_index": 5.22, "silhouette": 0.04})
        lines = published.to_text().splitlines()
        v.check([line.split() for line in lines[1:3]] == [["Metrics", "With", "Autoencoder", "Without", "Autoencoder"],
                                                          ["Compression", "Compression"]], "header rows")
        v.check([line.split() for line in lines[4:7]] == [["CH", "Index", "366243", "6235"],
                                                          ["DB", "Index", "0.62", "5.22"],
                                                          ["Silhouette", "Score", "0.48", "0.04"]],
                "published values render in the table layout")
        v.check(published.to_dict()["columns"] == ["Metrics", "With Autoencoder Compression",
                                                   "Without Autoencoder Compression"], "JSON column headers")


REPORT_FILES = ("themes.json", "wordcloud.json", "sankey.json", "metrics.json")


def _strip_times(obj):
    if isinstance(obj, dict):
        return {k: _strip_times(v) for k, v in obj.items() if k not in ("started_at", "finished_at")}
    if isinstance(obj, list):
        return [_strip_times(x) for x in obj]
    return obj


def test_criterion_8_end_to_end_determinism(tmp_path):
    with Verdict(8, "end-to-end determinism", budget=120) as v:
        work = tmp_path / "bundle"
        shutil.copytree(BUNDLED_CONFIG.parent, work / "configs")
        shutil.copytree(BUNDLED_CONFIG.parent.parent / "data", work / "data")
        cfg = load_config(work / "configs" / "bundled.yaml")
        snapshots = []
        for _ in range(2):
            if cfg.run_path.exists():
                shutil.rmtree(cfg.run_path)
            root = run_all(cfg)
            files = {n: (root / "report" / n).read_bytes() for n in REPORT_FILES}
            files["manifest"] = _strip_times(json.loads((root / "report" / "manifest.json").read_text()))
            snapshots.append(files)
        for name in REPORT_FILES:
            v.check(snapshots[0][name] == snapshots[1][name], f"{name} byte-identical")
        v.check(snapshots[0]["manifest"] == snapshots[1]["manifest"], "manifest identical without timestamps")
