"""Null-based Bayes factors under the Zellner-Siow prior.

The Bayes factor of a model with rho covariates and coefficient of
determination r2 against the intercept-only model is the one-dimensional
integral over g > 0 of

    (1+g)^((n-1-rho)/2) * (1 + (1-r2) g)^(-(n-1)/2) * pi(g),

where pi(g) is the inverse-gamma(1/2, n/2) density. Everything is computed
in log space: the integrand can span hundreds of orders of magnitude once
n * r2 is large, so the maximum of the log integrand is factored out before
quadrature. The integral is mapped to (0, 1) by g = t / (1 - t) and handled
by adaptive Gauss-Kronrod subdivision. A Laplace approximation (expansion in
log g, with the standard fourth-order correction factor) is available for
large n, where the integrand is sharply peaked and quadrature buys nothing.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.optimize import brentq

from bmadex.errors import SaturatedFitError
from bmadex.modelspace import ModelSpace
from bmadex.ols import RANK_TOL, fit_matrix

R2_CAP = 1.0 - 1e-12
NEG_INF = float("-inf")

# Genes are scored in fixed-size chunks so results do not depend on the
# thread count (the adaptive subdivision is shared within a chunk).
CHUNK = 512

_MODE_GRID = np.linspace(1e-9, 1.0 - 1e-9, 513)


@dataclass
class BfConfig:
    """Bayes factor evaluation settings.

    ``method`` is "quadrature", "laplace", or "auto" (quadrature for
    n <= 500, Laplace above).
    """

    method: str = "auto"
    rel_tolerance: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if self.method not in ("auto", "quadrature", "laplace"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 < self.rel_tolerance <= 1e-4:
            raise ValueError("rel_tolerance must be in (0, 1e-4]")
        if self.max_subdivisions < 10:
            raise ValueError("max_subdivisions must be at least 10")

    def resolve_method(self, n: int) -> str:
        if self.method != "auto":
            return self.method
        return "quadrature" if n <= 500 else "laplace"


@dataclass
class GeneScore:
    """Per-gene log Bayes factors over a model space (null entry is 0)."""

    gene_id: str
    log_bf: np.ndarray
    r_squared: np.ndarray
    rho: np.ndarray
    saturated: np.ndarray  # True where r2 was capped at R2_CAP


@dataclass
class ScoreMatrix:
    """Scores for all genes against one shared model space."""

    gene_ids: list[str]
    log_bf: np.ndarray  # J x M
    r_squared: np.ndarray  # J x M
    rho: np.ndarray  # M
    saturated: np.ndarray  # J x M bool
    null_index: int

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    def gene(self, j: int) -> GeneScore:
        return GeneScore(gene_id=self.gene_ids[j], log_bf=self.log_bf[j],
                         r_squared=self.r_squared[j], rho=self.rho,
                         saturated=self.saturated[j])

    @classmethod
    def from_gene_scores(cls, scores: list[GeneScore], null_index: int) -> "ScoreMatrix":
        rho0 = scores[0].rho
        for s in scores[1:]:
            if len(s.log_bf) != len(scores[0].log_bf) or not np.array_equal(s.rho, rho0):
                raise ValueError("gene scores cover inconsistent model spaces")
        return cls(gene_ids=[s.gene_id for s in scores],
                   log_bf=np.vstack([s.log_bf for s in scores]),
                   r_squared=np.vstack([s.r_squared for s in scores]),
                   rho=np.asarray(rho0), null_index=null_index,
                   saturated=np.vstack([s.saturated for s in scores]))


def _check_args(r2: float, rho: int, n: int):
    if rho < 0:
        raise ValueError("rho must be non-negative")
    if n < rho + 3:
        raise ValueError(f"n={n} too small for rho={rho} (need n >= rho + 3)")
    if not 0.0 <= r2 < R2_CAP:
        raise SaturatedFitError(f"r2={r2} outside [0, 1 - 1e-12)")


def _log_integrand_t(t, r2, rho: int, n: int):
    """Log integrand after g = t/(1-t), including the Jacobian.

    Vectorized in ``t`` for scalar ``r2``, or in ``r2`` for scalar ``t``.
    """
    g = t / (1.0 - t)
    a = 0.5 * (n - 1 - rho)
    b = 0.5 * (n - 1)
    s = 1.0 - r2
    return (a * np.log1p(g) - b * np.log1p(s * g)
            + 0.5 * np.log(n / (2.0 * np.pi))
            - 1.5 * np.log(g) - 0.5 * n / g
            - 2.0 * np.log1p(-t))


def _bracket(grid_vals: np.ndarray) -> tuple[float, float]:
    """Sub-interval of (0, 1) holding all integrand mass.

    Cells where the (enveloped) log integrand sits more than 80 nats below
    its grid maximum contribute nothing at working precision; one extra grid
    cell on each side covers peaks lying between grid points.
    """
    above = np.nonzero(grid_vals >= grid_vals.max() - 80.0)[0]
    lo = max(above[0] - 1, 0)
    hi = min(above[-1] + 1, len(_MODE_GRID) - 1)
    return (0.0 if lo == 0 else float(_MODE_GRID[lo]),
            1.0 if hi == len(_MODE_GRID) - 1 else float(_MODE_GRID[hi]))


def zellner_siow_log_bf(r2: float, rho: int, n: int, cfg: BfConfig | None = None) -> float:
    """Log Bayes factor against the null model for one (r2, rho, n)."""
    cfg = cfg or BfConfig()
    if rho == 0:
        return 0.0
    _check_args(r2, rho, n)
    if cfg.resolve_method(n) == "laplace":
        return laplace_log_bf(r2, rho, n)
    grid = _log_integrand_t(_MODE_GRID, r2, rho, n)
    shift = float(grid.max())
    lo, hi = _bracket(grid)
    val, _ = quad(lambda t: math.exp(_log_integrand_t(t, r2, rho, n) - shift),
                  lo, hi, epsabs=0.0, epsrel=cfg.rel_tolerance,
                  limit=cfg.max_subdivisions)
    return shift + math.log(val)


def _quadrature_chunk(r2c: np.ndarray, rho: int, n: int, cfg: BfConfig) -> np.ndarray:
    """Log BFs for one chunk of r2 values sharing (rho, n), via one adaptive
    vector quadrature (the chunk shares its subdivision)."""
    grid = np.stack([_log_integrand_t(t, r2c, rho, n) for t in _MODE_GRID])
    shift = grid.max(axis=0)
    lo, hi = _bracket((grid - shift).max(axis=1))
    val, _ = quad_vec(lambda t: np.exp(_log_integrand_t(t, r2c, rho, n) - shift),
                      lo, hi, epsabs=1e-14, epsrel=cfg.rel_tolerance,
                      norm="max", limit=2 * cfg.max_subdivisions)
    return shift + np.log(val)


def _batch_quadrature(r2: np.ndarray, rho: int, n: int, cfg: BfConfig) -> np.ndarray:
    """Vector of log BFs for many r2 values sharing (rho, n).

    Values are sorted so nearby peaks share subdivisions, then cut into
    fixed-size chunks. Chunk boundaries are independent of the thread count,
    keeping results bit-stable under parallel scoring.
    """
    out = np.empty_like(r2)
    order = np.argsort(r2, kind="stable")
    for lo in range(0, len(order), CHUNK):
        idx = order[lo:lo + CHUNK]
        out[idx] = _quadrature_chunk(r2[idx], rho, n, cfg)
    return out


def laplace_log_bf(r2: float, rho: int, n: int) -> float:
    """Laplace approximation of the log Bayes factor.

    The log integrand is expanded in u = log g (the g-space integrand has
    polynomial tails that a Gaussian matches poorly; in u the tails decay
    exponentially). The returned value is the mode plus
    0.5*log(2*pi) - 0.5*log|second derivative|, times the standard
    higher-order correction from the third and fourth derivatives.
    """
    if rho == 0:
        return 0.0
    _check_args(r2, rho, n)
    a = 0.5 * (n - 1 - rho)
    b = 0.5 * (n - 1)
    s = 1.0 - r2

    def hp(u: float) -> float:
        eu = math.exp(u)
        s1 = eu / (1.0 + eu)
        s2 = s * eu / (1.0 + s * eu)
        return a * s1 - b * s2 - 0.5 + 0.5 * n * math.exp(-u)

    lo, hi = -5.0, 5.0
    while hp(lo) < 0.0 and lo > -700.0:
        lo -= 5.0
    while hp(hi) > 0.0 and hi < 700.0:
        hi += 5.0
    if hp(lo) < 0.0 or hp(hi) > 0.0:
        warnings.warn("no interior mode for Laplace approximation; "
                      "falling back to quadrature", RuntimeWarning)
        return zellner_siow_log_bf(r2, rho, n, BfConfig(method="quadrature"))
    ustar = brentq(hp, lo, hi, xtol=1e-13)

    eu = math.exp(ustar)
    s1 = eu / (1.0 + eu)
    s2 = s * eu / (1.0 + s * eu)
    e = 0.5 * n * math.exp(-ustar)
    h2 = a * s1 * (1 - s1) - b * s2 * (1 - s2) - e
    h3 = a * s1 * (1 - s1) * (1 - 2 * s1) - b * s2 * (1 - s2) * (1 - 2 * s2) + e
    h4 = (a * s1 * (1 - s1) * (1 - 6 * s1 + 6 * s1 * s1)
          - b * s2 * (1 - s2) * (1 - 6 * s2 + 6 * s2 * s2) - e)
    hval = (a * math.log1p(eu) - b * math.log1p(s * eu)
            + 0.5 * math.log(n / (2.0 * math.pi))
            - 0.5 * ustar - 0.5 * n * math.exp(-ustar))
    c2 = -h2
    correction = 1.0 + h4 / (8.0 * c2 * c2) + 5.0 * h3 * h3 / (24.0 * c2 ** 3)
    return (hval + 0.5 * math.log(2.0 * math.pi) - 0.5 * math.log(c2)
            + math.log(correction))


def _log_bf_column(r2: np.ndarray, rho: int, n: int, cfg: BfConfig) -> np.ndarray:
    if rho == 0:
        return np.zeros_like(r2)
    if cfg.resolve_method(n) == "laplace":
        return np.array([laplace_log_bf(v, rho, n) for v in r2])
    return _batch_quadrature(r2, rho, n, cfg)


def _design_usable(design: np.ndarray, n: int) -> bool:
    p = design.shape[1]
    if n <= p or n < p - 1 + 3:
        return False
    norms = np.linalg.norm(design, axis=0)
    norms[norms == 0] = 1.0
    R = np.linalg.qr(design, mode="r")
    return bool(np.all(np.abs(np.diag(R)) >= RANK_TOL * norms))


def score_gene(y: np.ndarray, space: ModelSpace, designs: list[np.ndarray],
               cfg: BfConfig | None = None, gene_id: str = "") -> GeneScore:
    """Log Bayes factor of every model in ``space`` for one response vector.

    Models whose design is rank deficient (or too large for n) get a -inf
    sentinel and are excluded from downstream sums.
    """
    y = np.asarray(y, dtype=float)
    sm = score_matrix(y[None, :], space, designs, cfg=cfg,
                      gene_ids=[gene_id or "gene"])
    return sm.gene(0)


def score_matrix(Y: np.ndarray, space: ModelSpace, designs: list[np.ndarray],
                 cfg: BfConfig | None = None, gene_ids: list[str] | None = None,
                 threads: int = 1) -> ScoreMatrix:
    """Score all genes (rows of ``Y``) against every model in ``space``.

    Per-gene results are independent of ``threads``: the work is cut into
    fixed chunks and reassembled in model order.
    """
    cfg = cfg or BfConfig()
    Y = np.asarray(Y, dtype=float)
    J, n = Y.shape
    M = len(space.models)
    if gene_ids is None:
        gene_ids = [f"g{j}" for j in range(J)]
    rho = space.rho
    log_bf = np.full((J, M), NEG_INF)
    r_squared = np.full((J, M), np.nan)
    saturated = np.zeros((J, M), dtype=bool)

    usable = []
    for m, design in enumerate(designs):
        if m == space.null_index:
            log_bf[:, m] = 0.0
            r_squared[:, m] = 0.0
            continue
        if not _design_usable(design, n):
            continue
        _, _, r2, _ = fit_matrix(Y, design)
        saturated[:, m] = r2 > R2_CAP
        r_squared[:, m] = np.minimum(r2, R2_CAP)
        usable.append(m)

    quad_models = [m for m in usable
                   if rho[m] > 0 and cfg.resolve_method(n) == "quadrature"]
    other_models = [m for m in usable if m not in quad_models]
    if threads > 1 and quad_models:
        tasks = []  # (model, gene indices, r2 chunk), fixed regardless of threads
        for m in quad_models:
            col = r_squared[:, m]
            order = np.argsort(col, kind="stable")
            for lo in range(0, J, CHUNK):
                idx = order[lo:lo + CHUNK]
                tasks.append((m, idx, col[idx]))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_quadrature_chunk, r2c, int(rho[m]), n, cfg)
                       for m, _, r2c in tasks]
            for (m, idx, _), fut in zip(tasks, futures):
                log_bf[idx, m] = fut.result()
    else:
        for m in quad_models:
            log_bf[:, m] = _batch_quadrature(r_squared[:, m], int(rho[m]), n, cfg)
    for m in other_models:
        log_bf[:, m] = _log_bf_column(r_squared[:, m], int(rho[m]), n, cfg)

    return ScoreMatrix(gene_ids=list(gene_ids), log_bf=log_bf, r_squared=r_squared,
                       rho=rho, saturated=saturated, null_index=space.null_index)
