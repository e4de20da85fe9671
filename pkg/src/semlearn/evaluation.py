"""Sequential-prediction scoring, weighted aggregation, and the statistical analyses.

Per-learner precision/recall/F1 treat +1 (engaged) as the positive class,
with the conservative zero-denominator conventions: precision with no
positive predictions is 0, recall with no positive labels is 0, F1 is 0
when P + R is 0. Aggregates weight each learner by their event count.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import stdtr
from scipy.stats import rankdata

from .data import ENGAGED, Dataset
from .relatedness import SRTable, avg_connectedness, build_topic_graph, min_cut_set_size

Trace = list[tuple[int, int]]  # (prediction, label), both +-1

SESSION_FEATURES = (
    "n_events",
    "n_unique_topics",
    "topic_sparsity_rate",
    "positive_label_rate",
    "avg_connectedness",
    "min_cut_set_size",
)

# Exact permutation enumeration is n! work; past this it is not tractable
# and the t-approximation is the only offered p-value.
MAX_EXACT_PERMUTATION_N = 10


@dataclass
class LearnerScore:
    learner_id: str
    n_events: int
    precision: float
    recall: float
    f1: float
    trace: Trace = field(repr=False)


def confusion_counts(trace: Trace) -> tuple[int, int, int, int]:
    """(TP, FP, FN, TN) with engaged (+1) as the positive class."""
    tp = fp = fn = tn = 0
    for prediction, label in trace:
        if prediction == ENGAGED:
            if label == ENGAGED:
                tp += 1
            else:
                fp += 1
        elif label == ENGAGED:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def precision_recall_f1(trace: Trace) -> tuple[float, float, float]:
    tp, fp, fn, _ = confusion_counts(trace)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def score_learner(learner_id: str, trace: Trace) -> LearnerScore:
    """Per-learner classification scores over a full prediction trace."""
    if not trace:
        raise ValueError(f"empty trace for learner {learner_id!r}")
    precision, recall, f1 = precision_recall_f1(trace)
    return LearnerScore(learner_id, len(trace), precision, recall, f1, list(trace))


def aggregate(scores: list[LearnerScore]) -> tuple[float, float, float]:
    """Event-count-weighted mean of per-learner precision, recall and F1.

    F1 is the weighted mean of per-learner F1 values, not the F1 of pooled
    counts.
    """
    if not scores:
        raise ValueError("aggregate needs at least one learner score")
    # Summation in canonical learner order so the result is invariant to
    # the order scores arrive in (float addition is not associative).
    ordered = sorted(scores, key=lambda s: s.learner_id)
    total = sum(s.n_events for s in ordered)
    precision = sum(s.precision * s.n_events for s in ordered) / total
    recall = sum(s.recall * s.n_events for s in ordered) / total
    f1 = sum(s.f1 * s.n_events for s in ordered) / total
    return precision, recall, f1


def paired_t_test_one_tailed(a: list[float], b: list[float]) -> tuple[float, float]:
    """Learner-wise paired t-test with alternative mean(b - a) > 0.

    Returns (t, one-tailed p). Zero variance of the differences uses the
    documented convention: p = 0 if the mean difference is positive, 1 if
    negative, 0.5 if zero.
    """
    if len(a) != len(b):
        raise ValueError(f"paired vectors differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 pairs")
    diffs = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    mean = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    if sd == 0.0:
        if mean > 0.0:
            return math.inf, 0.0
        if mean < 0.0:
            return -math.inf, 1.0
        return 0.0, 0.5
    t = mean / (sd / math.sqrt(n))
    p = float(stdtr(n - 1, -t))  # upper tail of Student's t with n-1 dof
    return t, p


def srocc(x: list[float], y: list[float]) -> tuple[float, float]:
    """Spearman rank correlation with average ranks for ties; p by t-approximation.

    Returns (rho, two-sided p). Either vector constant makes the
    coefficient undefined: (nan, nan).
    """
    if len(x) != len(y):
        raise ValueError(f"vectors differ in length: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise ValueError("srocc needs at least 3 observations")
    rx = rankdata(x)
    ry = rankdata(y)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        return math.nan, math.nan
    rho = float(np.corrcoef(rx, ry)[0, 1])
    if abs(rho) >= 1.0:
        return max(min(rho, 1.0), -1.0), 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(stdtr(n - 2, -abs(t)))
    return rho, p


def srocc_exact_permutation(x: list[float], y: list[float]) -> tuple[float, float]:
    """Spearman rho with an exact two-sided permutation p-value.

    Enumerates all n! pairings, so only small vectors are accepted; the
    p-value counts permutations whose |rho| reaches the observed |rho|
    (within float slack), identity included.
    """
    n = len(x)
    if n > MAX_EXACT_PERMUTATION_N:
        raise ValueError(
            f"exact permutation enumeration capped at n={MAX_EXACT_PERMUTATION_N}, got {n}"
        )
    rho_obs, _ = srocc(x, y)
    if math.isnan(rho_obs):
        return math.nan, math.nan
    rx = rankdata(x)
    ry = rankdata(y)
    threshold = abs(rho_obs) - 1e-12
    hits = 0
    total = 0
    for perm in itertools.permutations(range(n)):
        total += 1
        rho_p = float(np.corrcoef(rx, ry[list(perm)])[0, 1])
        if abs(rho_p) >= threshold:
            hits += 1
    return rho_obs, hits / total


def recall_by_event_index(traces: dict[str, Trace], max_n: int) -> list[tuple[int, float]]:
    """Mean cumulative recall at each event position.

    For position n, learners with at least n events contribute their recall
    over events 1..n; the series stops once no learner reaches n.
    """
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    series: list[tuple[int, float]] = []
    ordered = [traces[k] for k in sorted(traces)]
    for n in range(1, max_n + 1):
        recalls = [
            precision_recall_f1(trace[:n])[1] for trace in ordered if len(trace) >= n
        ]
        if not recalls:
            break
        series.append((n, sum(recalls) / len(recalls)))
    return series


@dataclass
class SessionFeatureRow:
    learner_id: str
    n_events: int
    n_unique_topics: int
    topic_sparsity_rate: float
    positive_label_rate: float
    avg_connectedness: float
    min_cut_set_size: int
    recall: float

    def feature(self, name: str) -> float:
        return float(getattr(self, name))


def session_feature_table(
    dataset: Dataset, traces: dict[str, Trace], sr_table: SRTable
) -> list[SessionFeatureRow]:
    """Per-learner session features paired with that learner's recall.

    Graph features are computed on the learner's full session. Traces must
    align one-to-one with the learners' event lists.
    """
    rows: list[SessionFeatureRow] = []
    for learner_id in sorted(traces):
        events = dataset.learners.get(learner_id)
        if events is None:
            raise ValueError(f"trace for unknown learner {learner_id!r}")
        trace = traces[learner_id]
        if len(trace) != len(events):
            raise ValueError(
                f"learner {learner_id!r}: trace has {len(trace)} entries "
                f"for {len(events)} events"
            )
        topic_slots = sum(len(ev.topics) for ev in events)
        unique_topics = {t for ev in events for t in ev.topic_ids()}
        graph = build_topic_graph(events, sr_table)
        _, recall, _ = precision_recall_f1(trace)
        rows.append(
            SessionFeatureRow(
                learner_id=learner_id,
                n_events=len(events),
                n_unique_topics=len(unique_topics),
                topic_sparsity_rate=1.0 - len(unique_topics) / topic_slots,
                positive_label_rate=sum(1 for ev in events if ev.label == ENGAGED)
                / len(events),
                avg_connectedness=avg_connectedness(graph),
                min_cut_set_size=min_cut_set_size(graph),
                recall=recall,
            )
        )
    return rows


def session_feature_srocc(rows: list[SessionFeatureRow]) -> dict[str, tuple[float, float]]:
    """SROCC of each session feature against recall, over the cohort."""
    recalls = [row.recall for row in rows]
    return {
        name: srocc([row.feature(name) for row in rows], recalls)
        for name in SESSION_FEATURES
    }
