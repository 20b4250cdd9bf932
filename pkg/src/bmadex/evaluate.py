"""Scoring rankings against simulation truth.

Everything here is plain counting: empirical FDR and sensitivity at a cut,
sensitivity-vs-FDR curves over all cuts, calibration of estimated against
true FDR, and the stratified benchmark tables. Selection rules: p-values
select at or below the cut, scores select at or above it. The FDR of an
empty selection is 0 (keeps curves plottable).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd


@dataclass
class ConfusionAtCut:
    cut: float
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def fdr(self) -> float:
        sel = self.tp + self.fp
        return self.fp / sel if sel else 0.0

    @property
    def sensitivity(self) -> float:
        pos = self.tp + self.fn
        return self.tp / pos if pos else 0.0

    @classmethod
    def from_selection(cls, selected: np.ndarray, truth: np.ndarray,
                       cut: float) -> "ConfusionAtCut":
        selected = np.asarray(selected, dtype=bool)
        truth = np.asarray(truth, dtype=bool)
        return cls(cut=cut,
                   tp=int(np.sum(selected & truth)),
                   fp=int(np.sum(selected & ~truth)),
                   tn=int(np.sum(~selected & ~truth)),
                   fn=int(np.sum(~selected & truth)))


@dataclass
class StratifiedReport:
    """Confusions for the g0d0 stratum, the rest, and their union."""

    g0d0: ConfusionAtCut
    rest: ConfusionAtCut
    total: ConfusionAtCut

    def row(self) -> dict:
        return {"fdr_g0d0": self.g0d0.fdr, "fdr_total": self.total.fdr,
                "sens_g0d0": self.g0d0.sensitivity,
                "sens_total": self.total.sensitivity}


def confusion_at(values: np.ndarray, truth: np.ndarray, cut: float,
                 kind: str = "pvalue") -> ConfusionAtCut:
    """Counts under the selection rule implied by ``kind``."""
    values = np.asarray(values, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    if values.shape != truth.shape:
        raise ValueError("values and truth must align")
    if kind == "pvalue":
        selected = values <= cut
    elif kind == "score":
        selected = values >= cut
    else:
        raise ValueError(f"kind must be 'pvalue' or 'score', got {kind!r}")
    return ConfusionAtCut.from_selection(selected, truth, cut)


def stratified_confusion(values: np.ndarray, truth: np.ndarray,
                         g0d0: np.ndarray, cut: float,
                         kind: str = "pvalue") -> StratifiedReport:
    values = np.asarray(values, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    g0d0 = np.asarray(g0d0, dtype=bool)
    total = confusion_at(values, truth, cut, kind)
    sub = confusion_at(values[g0d0], truth[g0d0], cut, kind)
    rest = confusion_at(values[~g0d0], truth[~g0d0], cut, kind)
    return StratifiedReport(g0d0=sub, rest=rest, total=total)


def _prefix_counts(scores: np.ndarray, truth: np.ndarray, descending: bool):
    """Cumulative TP/FP along the ranking, one row per distinct score."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    order = np.argsort(-scores if descending else scores, kind="stable")
    sorted_scores = scores[order]
    tp = np.cumsum(truth[order])
    fp = np.cumsum(~truth[order])
    # keep the last row of each tied block so a cut never splits ties
    keep = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    return sorted_scores[keep], tp[keep], fp[keep], order


def curve(scores: np.ndarray, truth: np.ndarray,
          descending: bool = True) -> pd.DataFrame:
    """Sensitivity vs true FDR, one point per distinct score."""
    cut_scores, tp, fp, _ = _prefix_counts(scores, truth, descending)
    pos = int(np.sum(np.asarray(truth, dtype=bool)))
    sel = tp + fp
    fdr = np.where(sel > 0, fp / sel, 0.0)
    sens = tp / pos if pos else np.zeros_like(fdr)
    return pd.DataFrame({"cut": cut_scores, "true_fdr": fdr, "sensitivity": sens})


def calibration_curve(estimated_fdr: np.ndarray, scores: np.ndarray,
                      truth: np.ndarray, descending: bool = True) -> pd.DataFrame:
    """Pairs (true FDR, estimated FDR) over all cuts.

    ``estimated_fdr`` holds, per gene, the estimate attached to the list cut
    at that gene (its q-value, or the running peFDR at its rank).
    """
    estimated_fdr = np.asarray(estimated_fdr, dtype=float)
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    cut_scores, tp, fp, order = _prefix_counts(scores, truth, descending)
    sorted_scores = scores[order]
    keep = np.r_[sorted_scores[1:] != sorted_scores[:-1], True]
    est = estimated_fdr[order][keep]
    sel = tp + fp
    fdr = np.where(sel > 0, fp / sel, 0.0)
    return pd.DataFrame({"cut": cut_scores, "true_fdr": fdr, "estimated_fdr": est})


def true_fdr_count(scores: np.ndarray, truth: np.ndarray, target_fdr: float,
                   descending: bool = True) -> int:
    """Largest list size whose true FDR stays at or below the target."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    order = np.argsort(-scores if descending else scores, kind="stable")
    fp = np.cumsum(~truth[order])
    m = np.arange(1, scores.size + 1)
    ok = np.nonzero(fp / m <= target_fdr)[0]
    return int(ok[-1] + 1) if ok.size else 0


def average_curves(per_replicate: list[pd.DataFrame], columns: tuple[str, str],
                   n_points: int = 200) -> pd.DataFrame:
    """Average replicate curves parametrically along the list-length axis.

    Each curve is interpolated at ``n_points`` evenly spaced list fractions,
    then both coordinates are averaged across replicates.
    """
    fracs = np.linspace(0.0, 1.0, n_points + 1)[1:]
    xs, ys = [], []
    for df in per_replicate:
        npts = len(df)
        pos = fracs * (npts - 1)
        xs.append(np.interp(pos, np.arange(npts), df[columns[0]].to_numpy()))
        ys.append(np.interp(pos, np.arange(npts), df[columns[1]].to_numpy()))
    return pd.DataFrame({"list_fraction": fracs,
                         columns[0]: np.mean(xs, axis=0),
                         columns[1]: np.mean(ys, axis=0)})
