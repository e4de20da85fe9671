import math
import random

import pytest

from semlearn.data import Dataset, EngagementEvent
from semlearn.evaluation import (
    LearnerScore,
    aggregate,
    confusion_counts,
    paired_t_test_one_tailed,
    recall_by_event_index,
    session_feature_table,
    session_feature_srocc,
    score_learner,
    srocc,
    srocc_exact_permutation,
)
from semlearn.relatedness import SRTable, zero_table

from oracles import (
    paired_t_oracle,
    spearman_exact_permutation_p,
    spearman_rho_brute,
    t_upper_tail_quad,
)


class TestScoreLearner:
    def test_all_correct_positive(self):
        s = score_learner("a", [(1, 1)] * 5)
        assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)

    def test_always_predict_positive_half_right(self):
        trace = [(1, 1), (1, -1)] * 5
        s = score_learner("a", trace)
        assert s.precision == pytest.approx(0.5)
        assert s.recall == 1.0
        assert s.f1 == pytest.approx(2.0 / 3.0)

    def test_zero_denominator_conventions(self):
        no_positive_predictions = score_learner("a", [(-1, 1), (-1, -1)])
        assert no_positive_predictions.precision == 0.0
        no_positive_labels = score_learner("a", [(1, -1), (-1, -1)])
        assert no_positive_labels.recall == 0.0
        assert no_positive_labels.f1 == 0.0

    def test_empty_trace_rejected(self):
        with pytest.raises(ValueError):
            score_learner("a", [])

    def test_random_trace_matches_confusion_recount(self):
        rng = random.Random(17)
        trace = [(rng.choice([1, -1]), rng.choice([1, -1])) for _ in range(50)]
        s = score_learner("a", trace)
        tp = sum(1 for p, l in trace if p == 1 and l == 1)
        fp = sum(1 for p, l in trace if p == 1 and l == -1)
        fn = sum(1 for p, l in trace if p == -1 and l == 1)
        assert confusion_counts(trace)[:3] == (tp, fp, fn)
        assert s.precision == pytest.approx(tp / (tp + fp) if tp + fp else 0.0)
        assert s.recall == pytest.approx(tp / (tp + fn) if tp + fn else 0.0)


class TestAggregate:
    def score(self, lid, n, p=0.0, r=0.0, f1=0.0):
        return LearnerScore(lid, n, p, r, f1, [(1, 1)] * n)

    def test_single_learner_identity(self):
        got = aggregate([self.score("a", 7, 0.3, 0.6, 0.4)])
        assert got == (pytest.approx(0.3), pytest.approx(0.6), pytest.approx(0.4))

    def test_weighted_two_learners(self):
        got = aggregate([self.score("a", 10, f1=0.8), self.score("b", 30, f1=0.4)])
        assert got[2] == pytest.approx(0.5)

    def test_permutation_invariance_and_recount(self):
        rng = random.Random(23)
        scores = [
            self.score(f"u{i}", rng.randint(1, 40), rng.random(), rng.random(), rng.random())
            for i in range(100)
        ]
        total = sum(s.n_events for s in scores)
        expected_f1 = sum(s.f1 * s.n_events for s in scores) / total
        got = aggregate(scores)
        assert got[2] == pytest.approx(expected_f1)
        shuffled = scores[:]
        rng.shuffle(shuffled)
        assert aggregate(shuffled) == got


class TestPairedTTest:
    def test_identical_vectors_give_half(self):
        t, p = paired_t_test_one_tailed([0.1, 0.2, 0.3], [0.1, 0.2, 0.3])
        assert t == 0.0
        assert p == 0.5

    def test_constant_positive_shift(self):
        t, p = paired_t_test_one_tailed([0.1, 0.2], [1.1, 1.2])
        assert p == 0.0
        t, p = paired_t_test_one_tailed([1.1, 1.2], [0.1, 0.2])
        assert p == 1.0

    def test_frozen_hand_computation(self):
        # diffs [0.1, 0.2, 0.05, 0.15]: t and p pinned by the quadrature t-CDF oracle
        a = [0.0, 0.0, 0.0, 0.0]
        b = [0.1, 0.2, 0.05, 0.15]
        t, p = paired_t_test_one_tailed(a, b)
        assert t == pytest.approx(3.872983346207, abs=1e-9)
        assert p == pytest.approx(0.015233145831, abs=1e-9)

    def test_random_vectors_match_oracle(self):
        rng = random.Random(37)
        for _ in range(20):
            n = rng.randint(2, 20)
            a = [rng.random() for _ in range(n)]
            b = [rng.random() for _ in range(n)]
            t, p = paired_t_test_one_tailed(a, b)
            t_ref, p_ref = paired_t_oracle(a, b)
            assert t == pytest.approx(t_ref, abs=1e-9)
            assert p == pytest.approx(p_ref, abs=1e-6)

    def test_rejects_mismatched_or_short(self):
        with pytest.raises(ValueError):
            paired_t_test_one_tailed([1.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            paired_t_test_one_tailed([1.0], [2.0])


class TestSrocc:
    def test_perfect_monotone(self):
        rho, p = srocc([1, 2, 3, 4], [10, 20, 30, 40])
        assert rho == 1.0
        assert p == 0.0

    def test_perfect_reverse(self):
        rho, _ = srocc([1, 2, 3, 4], [40, 30, 20, 10])
        assert rho == -1.0

    def test_constant_vector_undefined(self):
        rho, p = srocc([1.0, 1.0, 1.0, 1.0], [1, 2, 3, 4])
        assert math.isnan(rho) and math.isnan(p)

    def test_ties_match_rank_then_pearson_oracle(self):
        rng = random.Random(41)
        for _ in range(25):
            n = rng.randint(3, 20)
            x = [rng.choice([0.0, 0.5, 1.0, 2.0]) for _ in range(n)]
            y = [rng.choice([0.0, 1.0, 3.0]) for _ in range(n)]
            rho, p = srocc(x, y)
            if math.isnan(rho):
                assert len(set(x)) == 1 or len(set(y)) == 1
                continue
            assert rho == pytest.approx(spearman_rho_brute(x, y), abs=1e-12)
            if abs(rho) < 1.0:
                t = rho * math.sqrt((n - 2) / (1 - rho * rho))
                assert p == pytest.approx(2.0 * t_upper_tail_quad(abs(t), n - 2), abs=1e-6)

    def test_exact_permutation_matches_independent_enumeration(self):
        rng = random.Random(43)
        for _ in range(6):
            n = rng.randint(3, 6)
            x = [rng.random() for _ in range(n)]
            y = [rng.choice([0.0, 1.0, 2.0]) for _ in range(n)]
            rho, p = srocc_exact_permutation(x, y)
            assert rho == pytest.approx(spearman_rho_brute(x, y), abs=1e-12)
            assert p == spearman_exact_permutation_p(x, y)

    def test_exact_permutation_caps_n(self):
        with pytest.raises(ValueError):
            srocc_exact_permutation(list(range(11)), list(range(11)))


class TestRecallByEventIndex:
    def test_single_learner_all_correct(self):
        traces = {"a": [(1, 1)] * 5}
        assert recall_by_event_index(traces, 5) == [(n, 1.0) for n in range(1, 6)]

    def test_truncates_past_longest_session(self):
        traces = {"a": [(1, 1)] * 3}
        assert len(recall_by_event_index(traces, 10)) == 3

    def test_two_learners_manual(self):
        traces = {
            "a": [(1, 1), (-1, 1)],  # recall: 1, then 1/2
            "b": [(-1, 1), (1, 1), (1, -1)],  # recall: 0, 1/2, 1/2
        }
        series = recall_by_event_index(traces, 3)
        assert series[0] == (1, pytest.approx(0.5))
        assert series[1] == (2, pytest.approx(0.5))
        assert series[2] == (3, pytest.approx(0.5))


class TestSessionFeatures:
    def dataset_and_traces(self):
        events = []
        # 10 events, 4 unique topics, 7 positive labels
        labels = [1, 1, 1, 1, 1, 1, 1, -1, -1, -1]
        topics = [1, 2, 3, 4, 1, 2, 3, 4, 1, 2]
        for i, (t, l) in enumerate(zip(topics, labels)):
            events.append(EngagementEvent("a", i, ((t, 0.5),), l))
        ds = Dataset(learners={"a": events})
        traces = {"a": [(1, l) for l in labels]}
        return ds, traces

    def test_basic_feature_row(self):
        ds, traces = self.dataset_and_traces()
        rows = session_feature_table(ds, traces, zero_table())
        row = rows[0]
        assert row.n_events == 10
        assert row.n_unique_topics == 4
        assert row.positive_label_rate == pytest.approx(0.7)
        assert row.topic_sparsity_rate == pytest.approx(1.0 - 4.0 / 10.0)
        assert row.recall == 1.0

    def test_triangle_session_graph_features(self):
        table = SRTable(metric="w2v")
        for a, b in [(1, 2), (2, 3), (1, 3)]:
            table.set(a, b, 0.8)
        events = [EngagementEvent("a", i, ((t, 0.5),), 1) for i, t in enumerate([1, 2, 3])]
        ds = Dataset(learners={"a": events})
        rows = session_feature_table(ds, {"a": [(1, 1)] * 3}, table)
        assert rows[0].avg_connectedness == 2.0
        assert rows[0].min_cut_set_size == 2

    def test_srocc_entries_match_recount(self):
        rng = random.Random(53)
        learners = {}
        traces = {}
        for i in range(30):
            lid = f"u{i:03d}"
            n = rng.randint(3, 12)
            events = [
                EngagementEvent(lid, j, ((rng.randrange(15), 0.5),), rng.choice([1, -1]))
                for j in range(n)
            ]
            learners[lid] = events
            traces[lid] = [(rng.choice([1, -1]), ev.label) for ev in events]
        ds = Dataset(learners=learners)
        rows = session_feature_table(ds, traces, zero_table())
        stats = session_feature_srocc(rows)
        recalls = [r.recall for r in rows]
        n_events = [float(r.n_events) for r in rows]
        rho_ref = spearman_rho_brute(n_events, recalls)
        assert stats["n_events"][0] == pytest.approx(rho_ref, abs=1e-12)

    def test_trace_alignment_enforced(self):
        ds, traces = self.dataset_and_traces()
        traces["a"] = traces["a"][:-1]
        with pytest.raises(ValueError, match="trace has"):
            session_feature_table(ds, traces, zero_table())
