"""Seeded synthetic microarray data with three correlated binary covariates.

Subjects carry smoking (s), gender (g, 1 = male) and heavy-drinking (d)
status. All three are marginally Bernoulli(1/2) and mutually correlated:
males make up 75% of smokers and 25% of nonsmokers; 80% of smokers and 20%
of nonsmokers drink heavily; 75% of males and 25% of females drink heavily.
Those conditionals leave one degree of freedom in the drinking probabilities
per (s, g) cell; the cell table used here fixes q(s=1, male) = 0.9, giving

    q(1, male) = 0.9,  q(1, female) = 0.5,
    q(0, male) = 0.3,  q(0, female) = 1/6,

which satisfies every constraint above exactly (checked in the test suite
with rational arithmetic).

Gene effects are spike-and-slab: each coefficient is zero with probability
1 - f and otherwise normal with standard deviation effect_sd_scale * sigma_j,
where sigma_j^2 is a scaled inverse chi-square draw
(variance_scale * variance_df / chisq(variance_df)).

All randomness flows through counter-based Philox streams derived from
(seed, replicate, gene index), so per-gene generation is reproducible and
parallel-safe by construction.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from bmadex.ingest import (CovariateTable, Dataset, ExpressionMatrix,
                           format_float, write_covariates, write_expression)

# P(d = 1 | s, g), keyed by (s, g)
D_GIVEN_SG = {(1, 1): 0.9, (1, 0): 0.5, (0, 1): 0.3, (0, 0): 1.0 / 6.0}
P_MALE_GIVEN_S = {1: 0.75, 0: 0.25}

COVARIATE_NAMES = ("s", "g", "d")


@dataclass
class SimConfig:
    n: int = 80
    genes: int = 10000
    f_s: float = 0.10
    f_g: float = 0.05
    f_d: float = 0.0
    seed: int = 0
    replicates: int = 10
    effect_sd_scale: float = 1.0
    variance_df: float = 4.0
    variance_scale: float = 0.05

    def __post_init__(self):
        if self.n < 8:
            raise ValueError("need at least 8 samples")
        for name in ("f_s", "f_g", "f_d"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.genes < 1 or self.replicates < 1:
            raise ValueError("genes and replicates must be positive")
        if self.effect_sd_scale <= 0 or self.variance_scale <= 0 or self.variance_df <= 0:
            raise ValueError("effect/variance hyperparameters must be positive")


@dataclass
class TruthTable:
    """True per-gene coefficients, residual scales, and membership flags."""

    beta_s: np.ndarray
    beta_g: np.ndarray
    beta_d: np.ndarray
    sigma: np.ndarray

    @property
    def s_de(self) -> np.ndarray:
        return self.beta_s != 0

    @property
    def g_de(self) -> np.ndarray:
        return self.beta_g != 0

    @property
    def d_de(self) -> np.ndarray:
        return self.beta_d != 0

    @property
    def g0d0(self) -> np.ndarray:
        return ~self.g_de & ~self.d_de

    def covariate_sets(self) -> list[frozenset[str]]:
        """Per gene, the names of covariates with nonzero true effect."""
        out = []
        for j in range(len(self.sigma)):
            s = set()
            if self.beta_s[j] != 0:
                s.add("s")
            if self.beta_g[j] != 0:
                s.add("g")
            if self.beta_d[j] != 0:
                s.add("d")
            out.append(frozenset(s))
        return out

    def true_model_gammas(self) -> np.ndarray:
        """Per gene, the true inclusion vector as (s, g, d) bits."""
        return np.stack([self.s_de, self.g_de, self.d_de], axis=1).astype(int)

    def frame(self, gene_ids: list[str]) -> pd.DataFrame:
        return pd.DataFrame({"gene_id": gene_ids,
                             "beta_s": self.beta_s, "beta_g": self.beta_g,
                             "beta_d": self.beta_d, "sigma": self.sigma,
                             "s_de": self.s_de.astype(int),
                             "g_de": self.g_de.astype(int),
                             "d_de": self.d_de.astype(int),
                             "g0d0": self.g0d0.astype(int)})


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))))


def sample_covariates(n: int, rng: np.random.Generator) -> np.ndarray:
    """n x 3 matrix of (s, g, d) draws from the correlated joint."""
    if n < 1:
        raise ValueError("n must be positive")
    s = (rng.random(n) < 0.5).astype(int)
    pg = np.where(s == 1, P_MALE_GIVEN_S[1], P_MALE_GIVEN_S[0])
    g = (rng.random(n) < pg).astype(int)
    pd_ = np.empty(n)
    for (sv, gv), q in D_GIVEN_SG.items():
        pd_[(s == sv) & (g == gv)] = q
    d = (rng.random(n) < pd_).astype(int)
    return np.column_stack([s, g, d])


def _draw_sigma(rng: np.random.Generator, cfg: SimConfig) -> float:
    chi2 = 2.0 * rng.standard_gamma(cfg.variance_df / 2.0)
    return float(np.sqrt(cfg.variance_scale * cfg.variance_df / chi2))


def _draw_effects(rng: np.random.Generator, cfg: SimConfig, sigma: float) -> tuple[float, float, float]:
    betas = []
    for f in (cfg.f_s, cfg.f_g, cfg.f_d):
        nonzero = rng.random() < f
        draw = rng.normal(0.0, cfg.effect_sd_scale * sigma)
        betas.append(draw if nonzero else 0.0)
    return tuple(betas)


def sample_gene_effects(J: int, f_s: float, f_g: float, f_d: float,
                        hyper: SimConfig, rng: np.random.Generator) -> TruthTable:
    """Draw J genes' variances and spike-and-slab effects from one stream."""
    cfg = SimConfig(n=hyper.n, genes=J, f_s=f_s, f_g=f_g, f_d=f_d,
                    seed=hyper.seed, effect_sd_scale=hyper.effect_sd_scale,
                    variance_df=hyper.variance_df, variance_scale=hyper.variance_scale)
    sigma = np.empty(J)
    beta = np.empty((J, 3))
    for j in range(J):
        sigma[j] = _draw_sigma(rng, cfg)
        beta[j] = _draw_effects(rng, cfg, sigma[j])
    return TruthTable(beta_s=beta[:, 0], beta_g=beta[:, 1], beta_d=beta[:, 2],
                      sigma=sigma)


def gene_ids_for(J: int) -> list[str]:
    width = len(str(J))
    return [f"g{j + 1:0{width}d}" for j in range(J)]


def sample_ids_for(n: int) -> list[str]:
    width = len(str(n))
    return [f"S{i + 1:0{width}d}" for i in range(n)]


def generate_dataset(cfg: SimConfig, replicate: int = 0) -> tuple[Dataset, TruthTable]:
    """One replicate: covariates, truth, and the expression matrix.

    Deterministic in (cfg.seed, replicate); every gene draws its variance,
    effects, and noise from its own Philox substream.
    """
    n, J = cfg.n, cfg.genes
    covars = sample_covariates(n, _stream(cfg.seed, replicate, 0))
    sigma = np.empty(J)
    beta = np.empty((J, 3))
    Y = np.empty((J, n))
    for j in range(J):
        rng = _stream(cfg.seed, replicate, 1 + j)
        sigma[j] = _draw_sigma(rng, cfg)
        beta[j] = _draw_effects(rng, cfg, sigma[j])
        Y[j] = covars @ beta[j] + rng.normal(0.0, sigma[j], size=n)
    truth = TruthTable(beta_s=beta[:, 0], beta_g=beta[:, 1], beta_d=beta[:, 2],
                       sigma=sigma)
    expression = ExpressionMatrix(gene_ids=gene_ids_for(J),
                                  sample_ids=sample_ids_for(n), values=Y)
    covariates = CovariateTable(sample_ids=sample_ids_for(n),
                                covariate_names=list(COVARIATE_NAMES),
                                values=covars.astype(float))
    return Dataset(expression=expression, covariates=covariates), truth


def write_replicate(outdir, cfg: SimConfig, replicate: int,
                    dataset: Dataset, truth: TruthTable) -> Path:
    """Write one replicate's expression/covariate/truth files."""
    rep_dir = Path(outdir) / f"rep{replicate + 1:02d}"
    rep_dir.mkdir(parents=True, exist_ok=True)
    write_expression(rep_dir / "expression.tsv", dataset.expression)
    write_covariates(rep_dir / "covariates.tsv", dataset.covariates)
    frame = truth.frame(dataset.expression.gene_ids)
    float_cols = ["beta_s", "beta_g", "beta_d", "sigma"]
    frame[float_cols] = frame[float_cols].map(format_float)
    frame.to_csv(rep_dir / "truth.csv", index=False)
    return rep_dir


def write_config_echo(outdir, cfg: SimConfig):
    path = Path(outdir) / "sim_config.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_truth(path) -> TruthTable:
    df = pd.read_csv(path)
    return TruthTable(beta_s=df["beta_s"].to_numpy(float),
                      beta_g=df["beta_g"].to_numpy(float),
                      beta_d=df["beta_d"].to_numpy(float),
                      sigma=df["sigma"].to_numpy(float))
