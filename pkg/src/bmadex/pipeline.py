"""End-to-end analysis and benchmark orchestration.

``analyze_dataset`` runs scoring -> prior calibration -> posteriors ->
rankings for one dataset. ``benchmark_run`` produces, per method, the
per-gene ranking statistic and the method's own FDR estimate at each cut;
the table builders turn those into the benchmark report frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from bmadex.baselines import (attach_q_values, multi_model_scan,
                              single_model_scan)
from bmadex.bayesfactor import BfConfig, ScoreMatrix, score_matrix
from bmadex.errors import BmadexError
from bmadex.evaluate import (calibration_curve, curve, stratified_confusion,
                             true_fdr_count)
from bmadex.ingest import Dataset
from bmadex.modelspace import (CovariateInvolvement, ModelSpace,
                               enumerate_subsets, enumerate_two_factor_patterns,
                               involvement)
from bmadex.posterior import (RankingTable, cumulative_pe_fdr,
                              joint_inclusion_probability, posterior_matrix,
                              rank_genes)
from bmadex.priorcal import (PriorCalibration, calibrate, oracle_prior,
                             uniform_prior)
from bmadex.simulate import TruthTable

KNOWN_METHODS = ("sm1", "sm2", "mm", "bma-empirical", "bma-uniform", "bma-oracle")


@dataclass
class Target:
    """One ranking target: a named posterior mass over models."""

    label: str
    mask_names: list[str]
    mode: str  # "all" | "any" | "main"

    def mask(self, inv: CovariateInvolvement) -> np.ndarray:
        if self.mode == "main":
            # involvement through a main effect only (no interaction pattern)
            return inv.column(self.mask_names[0]) & ~inv.interaction
        cols = np.stack([inv.column(nm) for nm in self.mask_names], axis=1)
        return cols.all(axis=1) if self.mode == "all" else cols.any(axis=1)

    @property
    def file_label(self) -> str:
        return self.label.replace(":", "x").replace("|", "_or_")


@dataclass
class AnalysisResult:
    space: ModelSpace
    inv: CovariateInvolvement
    scores: ScoreMatrix
    prior: np.ndarray
    calibration: PriorCalibration | None
    posteriors: np.ndarray
    targets: list[Target]
    inclusion: pd.DataFrame
    rankings: dict[str, RankingTable] = field(default_factory=dict)

    def prior_report(self) -> pd.DataFrame:
        omega = (self.calibration.omega if self.calibration is not None
                 else np.full(len(self.space), np.nan))
        return pd.DataFrame({"model_index": range(len(self.space)),
                             "label": [m.label() for m in self.space.models],
                             "omega": omega, "prior": self.prior})


def _parse_interaction(name: str, covariate_names: list[str]) -> tuple[int, int]:
    parts = name.split(":")
    if len(parts) != 2:
        raise BmadexError(f"interaction {name!r} must be 'parent:parent'")
    for p in parts:
        if p not in covariate_names:
            raise BmadexError(f"interaction parent {p!r} is not a covariate")
    return covariate_names.index(parts[0]), covariate_names.index(parts[1])


def build_space(dataset: Dataset, covariates: list[str],
                interactions: list[str] | None = None,
                hierarchy: bool = False,
                pattern: tuple[str, str] | None = None):
    """Model space plus the design-ready covariate matrix for the dataset."""
    if pattern is not None:
        if interactions:
            raise BmadexError("pattern mode already models the interaction")
        X = dataset.covariates.matrix(list(pattern))
        if not np.isin(X, (0.0, 1.0)).all():
            raise BmadexError("pattern mode needs two 0/1-coded binary factors")
        space = enumerate_two_factor_patterns(tuple(pattern))
        return space, X
    X = dataset.covariates.matrix(covariates)
    names = list(covariates)
    hier = {}
    for inter in interactions or []:
        ia, ib = _parse_interaction(inter, covariates)
        X = np.hstack([X, (X[:, ia] * X[:, ib])[:, None]])
        if hierarchy:
            hier[len(names)] = (ia, ib)
        names.append(inter)
    space = enumerate_subsets(len(names), hierarchy=hier or None,
                              covariate_names=names)
    return space, X


def default_targets(space: ModelSpace) -> list[Target]:
    """One ranking target per covariate; pattern spaces get the four
    benchmark columns (main effects, interaction, main-or-interaction)."""
    inv = involvement(space)
    if space.kind == "subset":
        return [Target(label=nm, mask_names=[nm], mode="all") for nm in inv.names]
    a, b = space.covariate_names
    inter = f"{a}:{b}"
    return [Target(label=f"{a}_main", mask_names=[a], mode="main"),
            Target(label=f"{b}_main", mask_names=[b], mode="main"),
            Target(label=inter, mask_names=[inter], mode="all"),
            Target(label=f"{a}|{inter}", mask_names=[a, inter], mode="any")]


def resolve_prior(scores: ScoreMatrix, prior, c: float) -> tuple[np.ndarray, PriorCalibration | None]:
    if isinstance(prior, str):
        if prior == "empirical":
            cal = calibrate(scores, c=c)
            return cal.prior, cal
        if prior == "uniform":
            return uniform_prior(scores.log_bf.shape[1]), None
        raise BmadexError(f"unknown prior {prior!r}")
    arr = np.asarray(prior, dtype=float)
    if arr.shape != (scores.log_bf.shape[1],):
        raise BmadexError("prior vector does not match the model space")
    if np.any(arr < 0) or abs(arr.sum() - 1.0) > 1e-6:
        raise BmadexError("prior must be a probability vector")
    return arr / arr.sum(), None


def analyze_dataset(dataset: Dataset, covariates: list[str],
                    interactions: list[str] | None = None,
                    hierarchy: bool = False,
                    pattern: tuple[str, str] | None = None,
                    prior="empirical", c: float = 1.0,
                    cfg: BfConfig | None = None, threads: int = 1,
                    target_pe_fdr: float | None = None,
                    joint: list[tuple[list[str], str, str]] | None = None) -> AnalysisResult:
    """Full analysis of one dataset.

    ``joint`` adds extra ranking targets as (names, mode, label) triples.
    """
    cfg = cfg or BfConfig()
    space, X = build_space(dataset, covariates, interactions, hierarchy, pattern)
    inv = involvement(space)
    designs = space.designs(X)
    scores = score_matrix(dataset.expression.values, space, designs, cfg=cfg,
                          gene_ids=dataset.expression.gene_ids, threads=threads)
    prior_vec, calibration = resolve_prior(scores, prior, c)
    posteriors = posterior_matrix(scores.log_bf, prior_vec)

    targets = default_targets(space)
    for names, mode, label in joint or []:
        targets.append(Target(label=label, mask_names=names, mode=mode))

    inclusion = pd.DataFrame({"gene_id": scores.gene_ids})
    rankings: dict[str, RankingTable] = {}
    for tg in targets:
        probs = posteriors[:, tg.mask(inv)].sum(axis=1)
        inclusion[f"P_{tg.label}"] = probs
        rankings[tg.label] = rank_genes(scores.gene_ids, probs,
                                        target_pe_fdr=target_pe_fdr)
    return AnalysisResult(space=space, inv=inv, scores=scores, prior=prior_vec,
                          calibration=calibration, posteriors=posteriors,
                          targets=targets, inclusion=inclusion, rankings=rankings)


@dataclass
class RankedStat:
    """Per-gene ranking statistic for one method, with the method's own
    estimate of the FDR of the list cut at each gene."""

    method: str
    kind: str  # "pvalue" | "score"
    values: np.ndarray
    estimated_fdr: np.ndarray

    @property
    def descending(self) -> bool:
        return self.kind == "score"


def _pe_fdr_per_gene(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(-scores, kind="stable")
    pe = cumulative_pe_fdr(scores[order])
    out = np.empty_like(pe)
    out[order] = pe
    return out


def benchmark_run(dataset: Dataset, truth: TruthTable | None, methods: list[str],
                  c: float = 1.0, cfg: BfConfig | None = None,
                  threads: int = 1) -> dict[str, RankedStat]:
    """Ranking statistics for the requested methods on one dataset.

    The smoking covariate "s" is the benchmark target throughout. Bayes
    factors are computed once and shared by every BMA variant.
    """
    for m in methods:
        if m not in KNOWN_METHODS:
            raise BmadexError(f"unknown method {m!r}; known: {KNOWN_METHODS}")
    truth_needed = {"mm", "bma-oracle"} & set(methods)
    if truth_needed and truth is None:
        raise BmadexError(f"methods {sorted(truth_needed)} need truth labels")

    out: dict[str, RankedStat] = {}
    if "sm1" in methods:
        scan = attach_q_values(single_model_scan(dataset, "s"))
        out["sm1"] = RankedStat("sm1", "pvalue", scan["p_value"].to_numpy(),
                                scan["q_value"].to_numpy())
    if "sm2" in methods:
        scan = attach_q_values(single_model_scan(dataset, "s", adjust=("g", "d")))
        out["sm2"] = RankedStat("sm2", "pvalue", scan["p_value"].to_numpy(),
                                scan["q_value"].to_numpy())
    if "mm" in methods:
        scan = attach_q_values(multi_model_scan(dataset, "s",
                                                truth.covariate_sets()))
        out["mm"] = RankedStat("mm", "pvalue", scan["p_value"].to_numpy(),
                               scan["q_value"].to_numpy())

    bma = [m for m in methods if m.startswith("bma-")]
    if bma:
        space, X = build_space(dataset, ["s", "g", "d"])
        inv = involvement(space)
        designs = space.designs(X)
        scores = score_matrix(dataset.expression.values, space, designs,
                              cfg=cfg or BfConfig(),
                              gene_ids=dataset.expression.gene_ids,
                              threads=threads)
        s_mask = inv.column("s")
        for m in bma:
            if m == "bma-empirical":
                prior_vec, _ = resolve_prior(scores, "empirical", c)
            elif m == "bma-uniform":
                prior_vec, _ = resolve_prior(scores, "uniform", c)
            else:
                gammas = truth.true_model_gammas()
                index_of = {mm_.gamma: i for i, mm_ in enumerate(space.models)}
                true_idx = np.array([index_of[tuple(g)] for g in gammas])
                prior_vec = oracle_prior(true_idx, len(space))
            posteriors = posterior_matrix(scores.log_bf, prior_vec)
            probs = posteriors[:, s_mask].sum(axis=1)
            out[m] = RankedStat(m, "score", probs, _pe_fdr_per_gene(probs))
    return out


def table1_frame(stats: dict[str, RankedStat], truth: TruthTable,
                 pcut: float) -> pd.DataFrame:
    """Table-1-shaped report: FDR/sensitivity at a p-value cutoff, total and
    from the g0d0 stratum. Only p-value-ranked methods qualify."""
    rows = []
    for name, st in stats.items():
        if st.kind != "pvalue":
            continue
        rep = stratified_confusion(st.values, truth.s_de, truth.g0d0, pcut,
                                   kind="pvalue")
        rows.append({"method": name, **rep.row()})
    return pd.DataFrame(rows)


def table2_frame(stats: dict[str, RankedStat], truth: TruthTable,
                 fdr_target: float) -> pd.DataFrame:
    """Table-2-shaped report: list size at the true-FDR-constrained cut."""
    rows = []
    for name, st in stats.items():
        count = true_fdr_count(st.values, truth.s_de, fdr_target,
                               descending=st.descending)
        rows.append({"method": name, "discoveries": count})
    return pd.DataFrame(rows)


def method_curves(stats: dict[str, RankedStat], truth: TruthTable):
    """Per method: the sensitivity-vs-FDR curve and the FDR calibration
    curve (estimated against true)."""
    sens, calib = {}, {}
    for name, st in stats.items():
        vals = st.values if st.descending else 1.0 - st.values
        sens[name] = curve(vals, truth.s_de, descending=True)
        calib[name] = calibration_curve(st.estimated_fdr, vals, truth.s_de,
                                        descending=True)
    return sens, calib
