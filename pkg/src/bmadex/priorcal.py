"""Empirical prior model probabilities.

Two steps: estimate the per-model proportion of genes best described by each
non-null model (a gene counts toward a model when that model attains the
gene's maximal null-based Bayes factor and the factor exceeds the cutoff c),
then iterate the prior so the posterior-implied model distribution matches
those counts. Genes failing the cutoff are attributed to the null model, so
the numerator mass always totals the number of genes.

All accumulation happens in log space; Bayes factors for large n * r2
overflow any linear-scale representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from bmadex.bayesfactor import ScoreMatrix

PRIOR_FLOOR = 1e-12


@dataclass
class PriorCalibration:
    """Converged empirical prior over a model space."""

    omega: np.ndarray  # per-model proportions; null entry 0 by convention
    prior: np.ndarray
    c: float
    iterations_run: int
    max_change_final: float
    degenerate: bool = False  # no gene cleared the cutoff
    sum_history: list[float] = field(default_factory=list)
    change_history: list[float] = field(default_factory=list)


def _winner_counts(scores: ScoreMatrix, c: float) -> np.ndarray:
    """Number of genes won by each non-null model at cutoff c.

    The argmax runs over non-null models only and resolves ties toward the
    earlier model in the canonical ordering (fewer covariates first). The
    cutoff indicator is strict (BF > c).
    """
    if c < 1.0:
        raise ValueError("cutoff c must be >= 1")
    J, M = scores.log_bf.shape
    counts = np.zeros(M)
    nonnull = [m for m in range(M) if m != scores.null_index]
    sub = scores.log_bf[:, nonnull]
    if np.any(np.all(np.isneginf(scores.log_bf), axis=1)):
        raise ValueError("a gene has no fittable model")
    best_pos = np.argmax(sub, axis=1)
    best_val = sub[np.arange(J), best_pos]
    cleared = best_val > np.log(c)
    for pos, ok in zip(best_pos, cleared):
        if ok:
            counts[nonnull[pos]] += 1.0
    return counts


def estimate_omega(scores: ScoreMatrix, c: float = 1.0) -> np.ndarray:
    """Per-model proportion of genes whose best model (by BF, above c) it is."""
    return _winner_counts(scores, c) / scores.n_genes


def iterate_prior(scores: ScoreMatrix, omega: np.ndarray, c: float = 1.0,
                  max_iter: int = 30, tol: float = 1e-8,
                  init: np.ndarray | None = None) -> PriorCalibration:
    """Fixed-point iteration for the prior model probabilities.

    Each step divides the per-model winner counts by the summed posterior
    weight the current prior implies, then renormalizes to a probability
    vector. Zero-count models are floored at 1e-12 (an exact zero would make
    their posterior identically zero regardless of data). Stops after
    ``max_iter`` steps or when the largest absolute change drops below
    ``tol``. Starts from the omega estimate unless ``init`` is given.
    """
    J, M = scores.log_bf.shape
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (M,):
        raise ValueError("omega does not match the model space")
    counts = omega * J
    counts[scores.null_index] = 0.0
    numer = counts.copy()
    numer[scores.null_index] = J - counts.sum()
    degenerate = counts.sum() == 0.0

    if init is not None:
        prior = np.asarray(init, dtype=float).copy()
    else:
        prior = np.maximum(numer / J, PRIOR_FLOOR)
    prior /= prior.sum()

    log_bf = scores.log_bf
    sum_history: list[float] = []
    change_history: list[float] = []
    iterations = 0
    max_change = np.inf
    for iterations in range(1, max_iter + 1):
        with np.errstate(divide="ignore"):
            log_weighted = log_bf + np.log(prior)[None, :]
        log_denom_gene = logsumexp(log_weighted, axis=1)
        # sum over genes of BF / (sum_g' BF * prior), per model
        ratios = np.exp(log_bf - log_denom_gene[:, None])
        denom = ratios.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            new_prior = np.where(denom > 0, numer / denom, 0.0)
        new_prior = np.maximum(new_prior, PRIOR_FLOOR)
        new_prior /= new_prior.sum()
        max_change = float(np.max(np.abs(new_prior - prior)))
        prior = new_prior
        sum_history.append(float(prior.sum()))
        change_history.append(max_change)
        if max_change < tol:
            break

    return PriorCalibration(omega=omega, prior=prior, c=c,
                            iterations_run=iterations,
                            max_change_final=max_change,
                            degenerate=degenerate,
                            sum_history=sum_history,
                            change_history=change_history)


def calibrate(scores: ScoreMatrix, c: float = 1.0, max_iter: int = 30,
              tol: float = 1e-8) -> PriorCalibration:
    """estimate_omega followed by iterate_prior with the same cutoff."""
    omega = estimate_omega(scores, c)
    return iterate_prior(scores, omega, c, max_iter=max_iter, tol=tol)


def uniform_prior(n_models: int) -> np.ndarray:
    return np.full(n_models, 1.0 / n_models)


def oracle_prior(true_model_indices: np.ndarray, n_models: int) -> np.ndarray:
    """Prior set to the true proportion of genes generated by each model
    (simulation-only comparator)."""
    counts = np.bincount(np.asarray(true_model_indices), minlength=n_models)
    prior = np.maximum(counts / counts.sum(), PRIOR_FLOOR)
    return prior / prior.sum()
