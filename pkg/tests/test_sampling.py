import numpy as np
import pytest
from hypothesis import given, strategies as st

from beyondwords.latent import silhouette
from beyondwords.sampling import RepresentativeSample, SamplePlan, cochran_n, select_representatives
from tests.oracles import naive_silhouette


def test_cochran_published_case():
    assert cochran_n(1.64, 0.5, 0.1) == 68


def test_cochran_95_percent():
    # 1.96^2 * 0.25 / 0.0025 = 384.16
    assert cochran_n(1.96, 0.5, 0.05) == 385


def test_cochran_exact_boundary():
    # 2^2 * 0.25 / 0.1^2 = 100 exactly; float arithmetic would give 100.00000000000001
    assert cochran_n(2, 0.5, 0.1) == 100


@pytest.mark.parametrize("args", [(0, 0.5, 0.1), (1.64, 0.0, 0.1), (1.64, 0.5, 0.0), (1.64, 1.0, 0.1)])
def test_cochran_domain(args):
    with pytest.raises(ValueError):
        cochran_n(*args)


probs = st.integers(1, 99).map(lambda x: x / 100)
zs = st.integers(50, 400).map(lambda x: x / 100)


@given(zs, probs, st.integers(1, 50).map(lambda x: x / 100))
def test_p_half_maximizes(z, p, e):
    assert cochran_n(z, 0.5, e) >= cochran_n(z, p, e)


@given(zs, zs, probs)
def test_monotone_in_z(z1, z2, p):
    lo, hi = sorted((z1, z2))
    assert cochran_n(lo, p, 0.1) <= cochran_n(hi, p, 0.1)


@given(zs, st.integers(1, 50), st.integers(1, 50))
def test_monotone_in_e(z, e1, e2):
    lo, hi = sorted((e1 / 100, e2 / 100))
    assert cochran_n(z, 0.5, hi) <= cochran_n(z, 0.5, lo)


def test_plan_default():
    assert SamplePlan().n_target == 68


class TestRepresentatives:
    def test_small_cluster_returns_everything_sorted(self):
        X = np.array([[0.0], [0.1], [0.3], [9.0], [9.5]])
        labels = np.array([0, 0, 0, 1, 1])
        ids = ["a", "b", "c", "d", "e"]
        s = select_representatives(0, labels, X, ids, SamplePlan())
        assert sorted(m.post_id for m in s.members) == ["a", "b", "c"]
        sil = [m.silhouette for m in s.members]
        assert sil == sorted(sil, reverse=True)

    def test_tie_broken_by_post_id(self):
        labels = np.array([0, 0, 1])
        sil = np.array([0.5, 0.5, 0.0])
        s = select_representatives(0, labels, np.zeros((3, 1)), ["z", "y", "x"], SamplePlan(), silhouettes=sil)
        assert [m.post_id for m in s.members] == ["y", "z"]

    def test_matches_oracle_ranking(self):
        rng = np.random.default_rng(0)
        centers = np.array([[0, 0], [8, 0], [0, 8]], dtype=float)
        labels = np.repeat(np.arange(3), 12)
        X = centers[labels] + rng.normal(size=(36, 2))
        ids = [f"p{i:02d}" for i in range(36)]
        plan = SamplePlan(z=1.2, p=0.5, e=0.25)  # 1.44 * 0.25 / 0.0625 = 5.76
        assert plan.n_target == 6
        ref, _ = naive_silhouette(X, labels)
        for cid in range(3):
            s = select_representatives(cid, labels, X, ids, plan)
            members = [i for i in range(36) if labels[i] == cid]
            top = sorted(members, key=lambda i: (-ref[i], ids[i]))[:6]
            assert [m.post_id for m in s.members] == [ids[i] for i in top]

    def test_selected_dominate_rest(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(80, 3))
        labels = np.arange(80) % 2
        s = select_representatives(1, labels, X, [str(i) for i in range(80)], SamplePlan(z=1.0, e=0.2))
        chosen = {m.post_id for m in s.members}
        sil, _ = silhouette(X, labels)
        rest = [sil[i] for i in range(80) if labels[i] == 1 and str(i) not in chosen]
        assert min(m.silhouette for m in s.members) >= max(rest)

    def test_empty_cluster(self):
        with pytest.raises(ValueError):
            select_representatives(5, np.array([0, 1]), np.zeros((2, 1)), ["a", "b"], SamplePlan())

    def test_round_trip(self):
        s = select_representatives(0, np.array([0, 0, 1]), np.array([[0.], [1.], [5.]]),
                                   ["a", "b", "c"], SamplePlan())
        assert RepresentativeSample.from_dict(s.to_dict()).to_dict() == s.to_dict()
