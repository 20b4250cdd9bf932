"""Frequentist comparators: single-model t-test scans, the oracle multi-model
scan (simulation only), and Storey FDR / q-values.

Scan results are returned as DataFrames with one row per gene and columns
gene_id, method, t, p_value (q_value appended by ``attach_q_values``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.linalg import solve_triangular

from bmadex.ingest import Dataset
from bmadex.ols import _qr_checked, t_sf_two_sided


@dataclass
class Pi0Estimate:
    lambda_: float
    pi0: float


def _scan_with_design(Y: np.ndarray, design: np.ndarray, target_col: int):
    """t statistic and two-sided p for one design column, all genes at once."""
    Q, R = _qr_checked(design)
    n, p = design.shape
    coef = solve_triangular(R, Q.T @ Y.T)
    resid = Y.T - design @ coef
    rss = np.einsum("ij,ij->j", resid, resid)
    dof = n - p
    sigma2 = rss / dof
    Rinv = solve_triangular(R, np.eye(p))
    unscaled = np.sum(Rinv * Rinv, axis=1)[target_col]
    se = np.sqrt(unscaled * sigma2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, coef[target_col] / se, 0.0)
    pvals = t_sf_two_sided(t, dof)
    return t, pvals


def single_model_scan(dataset: Dataset, target: str,
                      adjust: tuple[str, ...] = (),
                      method: str | None = None) -> pd.DataFrame:
    """Fit one fixed model per gene and test the target covariate.

    An empty adjustment set is the unadjusted scan (SM1); adjusting for the
    remaining covariates gives the fully adjusted scan (SM2).
    """
    if method is None:
        method = "SM1" if not adjust else "SM2"
    cov = dataset.covariates
    cols = [target, *adjust]
    X = cov.matrix(cols)
    n = X.shape[0]
    design = np.hstack([np.ones((n, 1)), X])
    t, p = _scan_with_design(dataset.expression.values, design, target_col=1)
    return pd.DataFrame({"gene_id": dataset.expression.gene_ids,
                         "method": method, "t": t, "p_value": p})


def multi_model_scan(dataset: Dataset, target: str,
                     truth_sets: list[frozenset[str]],
                     method: str = "MM") -> pd.DataFrame:
    """Fit each gene with its true covariate set plus the target covariate.

    ``truth_sets`` gives, per gene, the names of the covariates that truly
    affect it (simulation only). Genes sharing a model are fit together.
    """
    J = len(dataset.expression.gene_ids)
    if len(truth_sets) != J:
        raise ValueError("truth must cover every gene")
    Y = dataset.expression.values
    t = np.empty(J)
    p = np.empty(J)
    groups: dict[tuple[str, ...], list[int]] = {}
    for j, s in enumerate(truth_sets):
        names = tuple(sorted(s | {target}))
        groups.setdefault(names, []).append(j)
    cov = dataset.covariates
    for names, idx in groups.items():
        ordered = [target] + [nm for nm in names if nm != target]
        X = cov.matrix(ordered)
        design = np.hstack([np.ones((X.shape[0], 1)), X])
        tg, pg = _scan_with_design(Y[idx], design, target_col=1)
        t[idx] = tg
        p[idx] = pg
    return pd.DataFrame({"gene_id": dataset.expression.gene_ids,
                         "method": method, "t": t, "p_value": p})


def storey_fdr(p_values: np.ndarray, lam: float = 0.5):
    """Storey pi0 estimate and step-up q-values.

    pi0 = #{p >= lambda} / ((1 - lambda) J), clamped to [0, 1]; q-values are
    the running minima of pi0 * J * p_(i) / i from the largest p downward.
    """
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        raise ValueError("empty p-value vector")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    J = p.size
    pi0 = np.count_nonzero(p >= lam) / ((1.0 - lam) * J)
    pi0 = min(max(pi0, 0.0), 1.0)
    order = np.argsort(p, kind="stable")
    raw = pi0 * J * p[order] / np.arange(1, J + 1)
    stepped = np.minimum.accumulate(raw[::-1])[::-1]
    q = np.empty(J)
    q[order] = stepped
    return Pi0Estimate(lambda_=lam, pi0=pi0), q


def attach_q_values(scan: pd.DataFrame, lam: float = 0.5) -> pd.DataFrame:
    out = scan.copy()
    _, q = storey_fdr(out["p_value"].to_numpy(), lam=lam)
    out["q_value"] = q
    return out


def count_discoveries_at_true_fdr(stat: np.ndarray, truth: np.ndarray,
                                  target_fdr: float,
                                  descending: bool = False) -> int:
    """Length of the largest head of the sorted list whose empirical FDR
    (known truth) stays at or below ``target_fdr``.

    ``stat`` is sorted ascending (p-values) or descending (scores).
    """
    stat = np.asarray(stat, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    order = np.argsort(-stat if descending else stat, kind="stable")
    false_sel = np.cumsum(~truth[order])
    m = np.arange(1, stat.size + 1)
    fdr = false_sel / m
    ok = np.nonzero(fdr <= target_fdr)[0]
    return int(ok[-1] + 1) if ok.size else 0
