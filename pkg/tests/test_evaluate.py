import numpy as np
import pytest

from bmadex.evaluate import (ConfusionAtCut, average_curves, calibration_curve,
                             confusion_at, curve, stratified_confusion,
                             true_fdr_count)


def counting_oracle(values, truth, cut, kind):
    tp = fp = tn = fn = 0
    for v, t in zip(values, truth):
        sel = v <= cut if kind == "pvalue" else v >= cut
        if sel and t:
            tp += 1
        elif sel and not t:
            fp += 1
        elif not sel and t:
            fn += 1
        else:
            tn += 1
    return tp, fp, tn, fn


class TestConfusion:
    def test_hand_example(self):
        truth = np.array([True] * 9 + [False] + [False] * 10)
        p = np.array([0.0001] * 10 + [0.5] * 10)
        conf = confusion_at(p, truth, 0.001, kind="pvalue")
        assert (conf.tp, conf.fp) == (9, 1)
        assert conf.fdr == pytest.approx(0.1)

    def test_empty_selection_convention(self):
        conf = confusion_at(np.array([0.5, 0.6]), np.array([True, False]), 0.001)
        assert conf.fdr == 0.0
        assert conf.sensitivity == 0.0

    def test_matches_counting_oracle(self, rng):
        for kind in ("pvalue", "score"):
            values = rng.random(200)
            truth = rng.random(200) < 0.3
            cut = float(rng.random())
            conf = confusion_at(values, truth, cut, kind=kind)
            tp, fp, tn, fn = counting_oracle(values, truth, cut, kind)
            assert (conf.tp, conf.fp, conf.tn, conf.fn) == (tp, fp, tn, fn)
            assert conf.tp + conf.fp + conf.tn + conf.fn == 200

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            confusion_at(np.array([0.1]), np.array([True]), 0.5, kind="zz")


class TestStratified:
    def test_counts_sum_to_totals(self, rng):
        values = rng.random(300)
        truth = rng.random(300) < 0.2
        g0d0 = rng.random(300) < 0.7
        rep = stratified_confusion(values, truth, g0d0, 0.3, kind="pvalue")
        for field in ("tp", "fp", "tn", "fn"):
            assert (getattr(rep.g0d0, field) + getattr(rep.rest, field)
                    == getattr(rep.total, field))

    def test_rates_recomputed_from_counts(self, rng):
        values = rng.random(100)
        truth = rng.random(100) < 0.5
        g0d0 = np.ones(100, dtype=bool)
        rep = stratified_confusion(values, truth, g0d0, 0.4)
        assert rep.total.fdr == rep.g0d0.fdr
        assert rep.rest.tp + rep.rest.fp == 0


class TestCurve:
    def test_perfect_separation_passes_0_1(self):
        scores = np.array([0.9, 0.8, 0.7, 0.2, 0.1])
        truth = np.array([True, True, True, False, False])
        df = curve(scores, truth)
        hit = df[(df["true_fdr"] == 0.0) & (df["sensitivity"] == 1.0)]
        assert len(hit) == 1

    def test_sensitivity_monotone(self, rng):
        scores = rng.random(500)
        truth = rng.random(500) < 0.5
        df = curve(scores, truth)
        assert np.all(np.diff(df["sensitivity"].to_numpy()) >= 0)

    def test_random_scores_sensitivity_tracks_selection(self, rng):
        scores = rng.random(5000)
        truth = rng.random(5000) < 0.5
        df = curve(scores, truth)
        sel_frac = np.linspace(1 / len(df), 1.0, len(df))
        # random ranking: sensitivity ~ selected fraction
        assert np.max(np.abs(df["sensitivity"].to_numpy() - sel_frac)) < 0.05

    def test_one_point_per_distinct_score(self):
        scores = np.array([0.5, 0.5, 0.4, 0.3, 0.3])
        truth = np.array([True, False, True, False, True])
        df = curve(scores, truth)
        assert len(df) == 3
        assert df["cut"].tolist() == [0.5, 0.4, 0.3]

    def test_ties_never_split(self):
        scores = np.array([0.5, 0.5, 0.1])
        truth = np.array([True, False, True])
        df = curve(scores, truth)
        row = df[df["cut"] == 0.5].iloc[0]
        assert row["true_fdr"] == pytest.approx(0.5)


class TestCalibration:
    def test_oracle_estimator_on_diagonal(self, rng):
        scores = rng.random(300)
        truth = rng.random(300) < 0.4
        base = curve(scores, truth)
        # estimated = true at each prefix, mapped back to gene order
        order = np.argsort(-scores, kind="stable")
        fp = np.cumsum(~truth[order])
        est_sorted = fp / np.arange(1, 301)
        est = np.empty(300)
        est[order] = est_sorted
        df = calibration_curve(est, scores, truth)
        np.testing.assert_allclose(df["estimated_fdr"], df["true_fdr"], atol=1e-12)
        assert len(df) == len(base)

    def test_underestimation_shows_below_diagonal(self, rng):
        scores = rng.random(200)
        truth = rng.random(200) < 0.4
        order = np.argsort(-scores, kind="stable")
        fp = np.cumsum(~truth[order])
        est = np.empty(200)
        est[order] = 0.5 * fp / np.arange(1, 201)
        df = calibration_curve(est, scores, truth)
        sel = df["true_fdr"] > 0
        assert np.all(df.loc[sel, "estimated_fdr"] < df.loc[sel, "true_fdr"] + 1e-12)


class TestTrueFdrCount:
    def test_matches_prefix_scan(self, rng):
        scores = rng.random(100)
        truth = rng.random(100) < 0.5
        order = np.argsort(-scores)
        best = 0
        fp = 0
        for m, idx in enumerate(order, start=1):
            fp += not truth[idx]
            if fp / m <= 0.25:
                best = m
        assert true_fdr_count(scores, truth, 0.25, descending=True) == best


class TestAverageCurves:
    def test_identical_replicates_average_to_themselves(self, rng):
        scores = rng.random(50)
        truth = rng.random(50) < 0.5
        df = curve(scores, truth)
        avg = average_curves([df, df], ("true_fdr", "sensitivity"), n_points=10)
        assert len(avg) == 10
        single = average_curves([df], ("true_fdr", "sensitivity"), n_points=10)
        np.testing.assert_allclose(avg["sensitivity"], single["sensitivity"])
