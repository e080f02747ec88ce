import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import mutual_info_score

from lightcast.exceptions import ZeroVarianceError
from lightcast.featsel import (MRMRSelector, correlation_matrix, default_bins, histogram_entropy,
                               joint_histogram, mrmr_select, mutual_information, pearson)

from conftest import make_frame


def oracle_mi(x, y, bins):
    """Plug-in MI from numpy's own equal-width 2-D histogram."""
    counts, _, _ = np.histogram2d(x, y, bins=bins)
    return mutual_info_score(None, None, contingency=counts)


def oracle_greedy(cols, target, candidates, k, bins):
    """Direct re-statement of the greedy difference-form rule."""
    rel = {f: oracle_mi(cols[f], cols[target], bins) for f in candidates}
    chosen = []
    while len(chosen) < k:
        scores = []
        for f in candidates:
            if f in chosen:
                continue
            red = (np.mean([oracle_mi(cols[f], cols[s], bins) for s in chosen])
                   if chosen else 0.0)
            scores.append((rel[f] - red, -candidates.index(f), f))
        chosen.append(max(scores)[2])
    return chosen


def correlated_pool(n=2000, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n)
    cols = {
        "y": z + 0.3 * rng.normal(size=n),
        "a": z + 0.5 * rng.normal(size=n),
        "b": z + 0.6 * rng.normal(size=n),
        "c": np.sin(3 * z) + 0.4 * rng.normal(size=n),
        "d": rng.normal(size=n),
        "e": z ** 2 + rng.normal(size=n),
        "f": 0.5 * z + rng.normal(size=n),
    }
    names = list(cols)
    return make_frame(names, values=np.column_stack([cols[c] for c in names])), cols


class TestPearson:
    def test_self(self):
        x = np.random.default_rng(0).normal(size=50)
        assert pearson(x, x) == 1.0
        assert pearson(x, -x) == -1.0

    def test_hand_case(self):
        assert pearson([1, 2, 3], [2, 2, 5]) == pytest.approx(math.sqrt(3) / 2, abs=1e-12)

    def test_constant_input(self):
        with pytest.raises(ZeroVarianceError):
            pearson([1, 1, 1], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pearson([1, 2, 3], [1, 2])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(0.1, 10), st.floats(-5, 5))
    def test_symmetry_and_affine_invariance(self, seed, a, b):
        rng = np.random.default_rng(seed)
        x, y = rng.normal(size=(2, 40))
        r = pearson(x, y)
        assert pearson(y, x) == pytest.approx(r, abs=1e-12)
        assert pearson(a * x + b, y) == pytest.approx(r, abs=1e-9)
        assert pearson(-x, y) == pytest.approx(-r, abs=1e-12)


class TestCorrelationMatrix:
    def test_single_column(self):
        np.testing.assert_array_equal(correlation_matrix(make_frame(["a"], n=5)), [[1.0]])

    def test_duplicated_column(self):
        x = np.random.default_rng(0).normal(size=20)
        m = correlation_matrix(make_frame(["a", "b"], values=np.column_stack([x, x])))
        assert m[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_independent_columns(self):
        m = correlation_matrix(make_frame(["a", "b", "c"], n=10_000, seed=7))
        off = m[~np.eye(3, dtype=bool)]
        assert np.all(np.abs(off) < 0.05)
        np.testing.assert_array_equal(m, m.T)


class TestMutualInformation:
    def test_perfect_dependence_ln4(self):
        x = np.tile(np.arange(4.0), 25)
        assert mutual_information(x, x, bins=4) == pytest.approx(math.log(4), abs=1e-12)

    def test_independent_uniforms(self):
        rng = np.random.default_rng(11)
        x, y = rng.uniform(size=(2, 100_000))
        mi = mutual_information(x, y, bins=8)
        assert mi == pytest.approx(oracle_mi(x, y, 8), abs=1e-12)
        assert mi <= 0.01

    def test_nonlinear_dependence(self):
        x = np.random.default_rng(3).uniform(-1, 1, 5000)
        y = x ** 2
        assert abs(pearson(x, y)) < 0.05
        mi = mutual_information(x, y, bins=16)
        assert mi == pytest.approx(oracle_mi(x, y, 16), abs=1e-12)
        assert mi > 0.5

    def test_histogram_sums(self):
        rng = np.random.default_rng(0)
        h = joint_histogram(rng.normal(size=333), rng.normal(size=333), 7)
        assert h.counts.sum() == 333
        assert h.pxy.sum() == pytest.approx(1.0, abs=1e-12)

    def test_bins_must_be_at_least_two(self):
        with pytest.raises(ValueError):
            mutual_information([1, 2, 3], [1, 2, 3], bins=1)

    def test_default_bins(self):
        assert default_bins(100) == 10
        assert default_bins(101) == 11
        assert default_bins(10**6) == 64

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(2, 20))
    def test_symmetric_and_self_entropy(self, seed, bins):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=300)
        y = x + rng.normal(size=300)
        assert mutual_information(x, y, bins) == pytest.approx(
            mutual_information(y, x, bins), abs=1e-12)
        assert mutual_information(x, x, bins) == pytest.approx(
            histogram_entropy(x, bins), abs=1e-12)
        assert mutual_information(x, y, bins) == pytest.approx(oracle_mi(x, y, bins), abs=1e-12)


class TestMRMR:
    def test_k1_is_max_relevance(self):
        frame, cols = correlated_pool()
        cands = ["a", "b", "c", "d", "e", "f"]
        state = mrmr_select(frame, "y", cands, 1, bins=20)
        best = max(cands, key=lambda f: oracle_mi(cols[f], cols["y"], 20))
        assert state.selected == [best]

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
    def test_matches_brute_force_greedy(self, k):
        frame, cols = correlated_pool(seed=k)
        cands = ["a", "b", "c", "d", "e", "f"]
        state = mrmr_select(frame, "y", cands, k, bins=45)
        assert state.selected == oracle_greedy(cols, "y", cands, k, 45)

    def test_all_candidates_is_permutation(self):
        frame, _ = correlated_pool()
        cands = ["a", "b", "c", "d", "e", "f"]
        state = mrmr_select(frame, "y", cands, len(cands))
        assert sorted(state.selected) == sorted(cands)

    def test_tie_broken_by_candidate_order(self):
        x = np.random.default_rng(0).normal(size=200)
        frame = make_frame(["y", "p", "q"], values=np.column_stack([x, x, x]))
        assert mrmr_select(frame, "y", ["q", "p"], 1).selected == ["q"]
        assert mrmr_select(frame, "y", ["p", "q"], 1).selected == ["p"]

    def test_deterministic_and_cache(self):
        frame, _ = correlated_pool()
        cands = ["a", "b", "c", "d"]
        s1 = mrmr_select(frame, "y", cands, 3)
        s2 = mrmr_select(frame, "y", cands, 3)
        assert s1.to_json() == s2.to_json()
        assert all(v >= 0 for v in s1.relevance.values())
        for (a, b), v in s1.redundancy_cache.items():
            assert v == pytest.approx(mutual_information(frame[a], frame[b]), abs=1e-12)

    def test_rows_restrict_statistics(self):
        frame, _ = correlated_pool()
        s_rows = mrmr_select(frame, "y", ["a", "b", "c"], 2, rows=range(0, 1000))
        s_slice = mrmr_select(frame.rows(slice(0, 1000)), "y", ["a", "b", "c"], 2)
        assert s_rows.to_dict() == s_slice.to_dict()

    @pytest.mark.parametrize("cands,k", [([], 1), (["a"], 0), (["a"], 2), (["y", "a"], 1)])
    def test_errors(self, cands, k):
        frame, _ = correlated_pool(n=50)
        with pytest.raises(ValueError):
            mrmr_select(frame, "y", cands, k)

    def test_report_shape(self):
        frame, _ = correlated_pool()
        d = mrmr_select(frame, "y", ["a", "b", "c"], 2).to_dict()
        assert d["selected"] == [s["feature"] for s in d["steps"]]
        assert d["steps"][0]["redundancy"] == 0.0

    def test_selector_estimator(self):
        frame, _ = correlated_pool()
        sel = MRMRSelector(target="y", candidates=("a", "b", "c", "d"), k=2).fit(frame)
        out = sel.transform(frame)
        assert out.columns == ("y", *sel.selected_)
        assert sel.get_support().sum() == 2
