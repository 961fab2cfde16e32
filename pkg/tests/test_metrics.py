"""Ranking metrics against brute-force oracles, plus dispersion."""

import numpy as np
import pytest

from oosguard.errors import DataError
from oosguard.metrics import (
    ScoredLabel,
    aupr_oos,
    auroc,
    average_precision_from_curve,
    brute_force_pr_curve,
    dispersion,
    intent_accuracy,
)


def items_from(scores, flags, **kwargs):
    return [ScoredLabel(score=s, is_oos=f, **kwargs) for s, f in zip(scores, flags)]


def pairwise_auroc(items):
    """O(n^2) oracle: wins + half-ties over all (OOS, IS) pairs."""
    oos = [it.score for it in items if it.is_oos]
    ins = [it.score for it in items if not it.is_oos]
    total = 0.0
    for o in oos:
        for i in ins:
            if o > i:
                total += 1.0
            elif o == i:
                total += 0.5
    return total / (len(oos) * len(ins))


def random_instance(rng, max_items=1000, tie_heavy=False):
    n = int(rng.integers(2, max_items + 1))
    if tie_heavy:
        scores = rng.integers(0, max(2, n // 20), size=n).astype(float)
    else:
        scores = rng.standard_normal(n)
    flags = rng.random(n) < rng.uniform(0.05, 0.8)
    if not flags.any():
        flags[int(rng.integers(0, n))] = True
    if flags.all():
        flags[int(rng.integers(0, n))] = False
    return items_from(scores, flags)


class TestAuprOos:
    def test_perfect_ranking(self):
        items = items_from([0.9, 0.8, 0.2, 0.1], [True, True, False, False])
        assert aupr_oos(items) == 1.0

    def test_documented_four_item_case(self):
        items = items_from([0.9, 0.8, 0.7, 0.1], [True, False, True, False])
        assert aupr_oos(items) == pytest.approx(5.0 / 6.0)

    def test_single_oos_ranked_last(self):
        scores = [float(10 - i) for i in range(10)]
        flags = [False] * 9 + [True]
        assert aupr_oos(items_from(scores, flags)) == pytest.approx(0.1)

    def test_requires_oos(self):
        with pytest.raises(DataError):
            aupr_oos(items_from([1.0, 2.0], [False, False]))

    def test_matches_oracle_exactly_on_random_instances(self):
        rng = np.random.default_rng(100)
        for trial in range(60):
            items = random_instance(rng, max_items=400, tie_heavy=trial % 3 == 0)
            oracle = average_precision_from_curve(brute_force_pr_curve(items))
            assert aupr_oos(items) == oracle, f"trial {trial}"

    def test_order_invariance(self):
        rng = np.random.default_rng(101)
        items = random_instance(rng, max_items=300, tie_heavy=True)
        shuffled = [items[i] for i in rng.permutation(len(items))]
        assert aupr_oos(items) == aupr_oos(shuffled)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(102)
        items = random_instance(rng, max_items=300, tie_heavy=True)
        for transform in (np.exp, lambda s: 3.0 * s + 7.0, lambda s: s**3):
            mapped = [
                ScoredLabel(score=float(transform(it.score)), is_oos=it.is_oos)
                for it in items
            ]
            assert aupr_oos(mapped) == aupr_oos(items)


class TestAuroc:
    def test_perfect_separation(self):
        items = items_from([5.0, 4.0, 1.0, 0.0], [True, True, False, False])
        assert auroc(items) == 1.0

    def test_all_ties_is_half(self):
        items = items_from([1.0] * 6, [True, False, True, False, False, True])
        assert auroc(items) == 0.5

    def test_documented_four_item_case(self):
        items = items_from([0.9, 0.8, 0.7, 0.1], [True, False, True, False])
        assert auroc(items) == pytest.approx(0.75)

    def test_requires_both_classes(self):
        with pytest.raises(DataError):
            auroc(items_from([1.0, 2.0], [True, True]))

    def test_matches_pairwise_oracle_exactly(self):
        rng = np.random.default_rng(103)
        for trial in range(40):
            items = random_instance(rng, max_items=200, tie_heavy=trial % 2 == 0)
            assert auroc(items) == pairwise_auroc(items), f"trial {trial}"

    def test_flip_symmetry(self):
        rng = np.random.default_rng(104)
        items = random_instance(rng, max_items=300)
        flipped = [
            ScoredLabel(score=-it.score, is_oos=not it.is_oos) for it in items
        ]
        assert auroc(flipped) == auroc(items)

    def test_matches_trapezoidal_roc_when_tie_free(self):
        rng = np.random.default_rng(105)
        for _ in range(10):
            n = int(rng.integers(10, 200))
            scores = rng.permutation(n).astype(float)  # distinct scores
            flags = rng.random(n) < 0.4
            if not flags.any():
                flags[0] = True
            if flags.all():
                flags[-1] = False
            items = items_from(scores, flags)
            n_pos = int(flags.sum())
            n_neg = n - n_pos
            fpr, tpr = [0.0], [0.0]
            for t in sorted(set(scores), reverse=True):
                predicted = scores >= t
                tpr.append(np.sum(predicted & flags) / n_pos)
                fpr.append(np.sum(predicted & ~flags) / n_neg)
            trapezoid = float(np.trapezoid(tpr, fpr))
            assert abs(auroc(items) - trapezoid) < 1e-12


class TestIntentAccuracy:
    def test_all_correct(self):
        items = [
            ScoredLabel(score=0.1, is_oos=False, true_intent=i, predicted_intent=i)
            for i in range(5)
        ]
        assert intent_accuracy(items) == 1.0

    def test_constant_prediction_on_balanced_pair(self):
        items = [
            ScoredLabel(score=0.0, is_oos=False, true_intent=t, predicted_intent=0)
            for t in (0, 1, 0, 1)
        ]
        assert intent_accuracy(items) == 0.5

    def test_nine_of_ten(self):
        items = [
            ScoredLabel(score=0.0, is_oos=False, true_intent=i % 3, predicted_intent=i % 3)
            for i in range(9)
        ]
        items.append(
            ScoredLabel(score=0.0, is_oos=False, true_intent=0, predicted_intent=1)
        )
        assert intent_accuracy(items) == pytest.approx(0.9)

    def test_oos_excluded_from_denominator(self):
        items = [
            ScoredLabel(score=0.0, is_oos=False, true_intent=0, predicted_intent=0),
            ScoredLabel(score=9.0, is_oos=True),
        ]
        assert intent_accuracy(items) == 1.0

    def test_empty_is_set_errors(self):
        with pytest.raises(DataError):
            intent_accuracy([ScoredLabel(score=1.0, is_oos=True)])


class TestDispersion:
    def test_identical_embeddings(self):
        assert dispersion(np.ones((5, 4))) == 0.0

    def test_identity_covariance_trace_is_dim(self):
        rng = np.random.default_rng(106)
        x = rng.standard_normal((200000, 8))
        assert dispersion(x) == pytest.approx(8.0, rel=0.02)

    def test_shift_invariance(self):
        rng = np.random.default_rng(107)
        x = rng.standard_normal((100, 6))
        shifted = x + np.arange(6) * 10.0
        assert dispersion(shifted) == pytest.approx(dispersion(x), abs=1e-9)

    def test_nonnegative(self):
        rng = np.random.default_rng(108)
        for _ in range(10):
            x = rng.standard_normal((20, 3)) * rng.uniform(0.01, 100)
            assert dispersion(x) >= 0.0

    def test_needs_two(self):
        with pytest.raises(DataError):
            dispersion(np.ones((1, 3)))


class TestBruteForceCurve:
    def test_two_items(self):
        items = items_from([2.0, 1.0], [True, False])
        curve = brute_force_pr_curve(items)
        assert curve == [(2.0, 1.0, 1.0), (1.0, 0.5, 1.0)]

    def test_order_invariance(self):
        rng = np.random.default_rng(109)
        items = random_instance(rng, max_items=100, tie_heavy=True)
        shuffled = [items[i] for i in rng.permutation(len(items))]
        assert brute_force_pr_curve(items) == brute_force_pr_curve(shuffled)

    def test_oracle_matches_on_thousand_items(self):
        rng = np.random.default_rng(110)
        items = random_instance(rng, max_items=1000)
        # force exactly 1000 items for the documented bound
        while len(items) < 1000:
            items = random_instance(rng, max_items=1000)
        oracle = average_precision_from_curve(brute_force_pr_curve(items))
        assert aupr_oos(items) == oracle
