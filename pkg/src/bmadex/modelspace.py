"""Candidate model spaces.

Two kinds of space are supported:

* subset spaces: all subsets of K covariate columns (optionally filtered by
  hierarchy constraints for declared interaction columns), and
* the 16-model cell-mean pattern space for two binary factors, consisting of
  the null pattern, the two single-factor splits, the additive model, and the
  12 remaining partitions of the four cells (the interaction patterns).

Models are ordered deterministically: subsets by (number of covariates,
integer value of gamma with covariate 1 as the least significant bit);
patterns as null, factor-A split, factor-B split, additive, then interaction
partitions by (block count, canonical block string). The null model is always
first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

# Cells of the 2x2 factor layout in canonical order.
CELLS = ((0, 0), (0, 1), (1, 0), (1, 1))

_NULL_PATTERN = (0, 0, 0, 0)
_A_SPLIT = (0, 0, 1, 1)  # cells with factor A = 1 form the second block
_B_SPLIT = (0, 1, 0, 1)
_MAIN_PATTERNS = {_NULL_PATTERN, _A_SPLIT, _B_SPLIT}

MAX_SUBSET_COVARIATES = 20


@dataclass(frozen=True)
class ModelIndex:
    """One candidate model: a covariate-inclusion vector or a cell pattern.

    Exactly one of ``gamma`` / ``pattern`` is set. ``pattern`` is a partition
    of the four cells given as a block id per cell in canonical cell order
    (restricted-growth form: block ids appear in first-use order). The
    ``additive`` flag marks the two-main-effects model, whose pattern slot
    holds the full split (all cells distinct) since its cell means are
    unconstrained up to the additivity restriction carried by the flag.
    """

    gamma: tuple[int, ...] | None = None
    pattern: tuple[int, ...] | None = None
    additive: bool = False

    def __post_init__(self):
        if (self.gamma is None) == (self.pattern is None):
            raise ValueError("exactly one of gamma/pattern must be set")
        if self.gamma is not None:
            if self.additive:
                raise ValueError("additive flag applies to pattern models only")
            if any(g not in (0, 1) for g in self.gamma):
                raise ValueError(f"gamma must be binary, got {self.gamma}")
        else:
            if len(self.pattern) != 4:
                raise ValueError("pattern must assign a block to each of 4 cells")
            if self.pattern != _canonical_pattern(self.pattern):
                raise ValueError(f"pattern {self.pattern} is not in canonical form")

    @property
    def is_null(self) -> bool:
        if self.gamma is not None:
            return not any(self.gamma)
        return self.pattern == _NULL_PATTERN and not self.additive

    @property
    def n_parameters(self) -> int:
        """Number of non-intercept design columns."""
        if self.gamma is not None:
            return sum(self.gamma)
        if self.additive:
            return 2
        return len(set(self.pattern)) - 1

    def label(self) -> str:
        if self.gamma is not None:
            return "".join(str(g) for g in self.gamma)
        if self.additive:
            return "additive"
        blocks = {}
        for cell, blk in enumerate(self.pattern):
            blocks.setdefault(blk, []).append(cell)
        return "|".join("".join(str(c) for c in blocks[b]) for b in sorted(blocks))


def _canonical_pattern(pattern) -> tuple[int, ...]:
    """Relabel block ids into first-use order (restricted growth form)."""
    seen: dict[int, int] = {}
    out = []
    for blk in pattern:
        if blk not in seen:
            seen[blk] = len(seen)
        out.append(seen[blk])
    return tuple(out)


def _all_partitions() -> list[tuple[int, ...]]:
    """All 15 partitions of the 4 cells as restricted growth strings."""
    parts = [(0,)]
    for _ in range(3):
        grown = []
        for p in parts:
            for blk in range(max(p) + 2):
                grown.append(p + (blk,))
        parts = grown
    return parts


@dataclass
class ModelSpace:
    """An ordered, duplicate-free collection of candidate models.

    ``covariate_names`` are the design columns selectable by subset models,
    or the two factor names for a pattern space. ``interactions`` maps a
    declared interaction column index to its parent column indices (subset
    spaces only).
    """

    models: list[ModelIndex]
    covariate_names: list[str]
    kind: str  # "subset" | "pattern"
    interactions: dict[int, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("subset", "pattern"):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if len(set(self.models)) != len(self.models):
            raise ValueError("duplicate models in space")
        nulls = [i for i, m in enumerate(self.models) if m.is_null]
        if len(nulls) != 1:
            raise ValueError("model space must contain exactly one null model")
        self._null_index = nulls[0]

    @property
    def null_index(self) -> int:
        return self._null_index

    def __len__(self) -> int:
        return len(self.models)

    @property
    def rho(self) -> np.ndarray:
        """Non-intercept parameter count per model."""
        return np.array([m.n_parameters for m in self.models], dtype=int)

    def build_design(self, model: ModelIndex, covariates: np.ndarray) -> np.ndarray:
        """Design matrix (with intercept) for ``model``.

        ``covariates`` is the n x K numeric covariate matrix for subset
        spaces, or the n x 2 binary factor matrix for pattern spaces.
        """
        covariates = np.asarray(covariates, dtype=float)
        n = covariates.shape[0]
        ones = np.ones((n, 1))
        if model.gamma is not None:
            cols = [i for i, g in enumerate(model.gamma) if g]
            return np.hstack([ones, covariates[:, cols]]) if cols else ones
        if model.additive:
            return np.hstack([ones, covariates])
        cell = (2 * covariates[:, 0] + covariates[:, 1]).astype(int)
        block = np.asarray(model.pattern)[cell]
        nblocks = len(set(model.pattern))
        if nblocks == 1:
            return ones
        indicators = [(block == b).astype(float)[:, None] for b in range(1, nblocks)]
        return np.hstack([ones] + indicators)

    def designs(self, covariates: np.ndarray) -> list[np.ndarray]:
        return [self.build_design(m, covariates) for m in self.models]

    def describe(self) -> pd.DataFrame:
        """One row per model: index, label, involvement flags."""
        inv = involvement(self)
        df = pd.DataFrame({"model_index": range(len(self.models)),
                           "label": [m.label() for m in self.models]})
        for j, name in enumerate(inv.names):
            df[f"involves_{name}"] = inv.flags[:, j].astype(int)
        return df


@dataclass
class CovariateInvolvement:
    """Per-model involvement flags, one column per queryable covariate.

    For pattern spaces the last name is the interaction label "<A>:<B>".
    ``interaction`` flags models that are interaction patterns (pattern
    spaces) or include a declared interaction column (subset spaces).
    """

    names: list[str]
    flags: np.ndarray  # bool, n_models x len(names)
    interaction: np.ndarray  # bool, n_models

    def column(self, name: str) -> np.ndarray:
        if name not in self.names:
            raise KeyError(f"unknown covariate {name!r}; have {self.names}")
        return self.flags[:, self.names.index(name)]


def enumerate_subsets(K: int,
                      hierarchy: dict[int, tuple[int, int]] | None = None,
                      covariate_names: list[str] | None = None) -> ModelSpace:
    """All-subsets model space over K covariate columns.

    ``hierarchy`` maps an interaction column index to its two parent column
    indices; every model including the interaction column must then include
    both parents. Without constraints the space has exactly 2**K models.
    """
    if not 1 <= K <= MAX_SUBSET_COVARIATES:
        raise ValueError(f"K must be in [1, {MAX_SUBSET_COVARIATES}], got {K}")
    hierarchy = dict(hierarchy or {})
    for child, parents in hierarchy.items():
        if len(parents) != 2:
            raise ValueError(f"interaction column {child} needs exactly 2 parents")
        for p in (child, *parents):
            if not 0 <= p < K:
                raise ValueError(f"hierarchy references unknown column {p}")
    if covariate_names is None:
        covariate_names = [f"x{i + 1}" for i in range(K)]
    if len(covariate_names) != K:
        raise ValueError("covariate_names length must equal K")

    models = []
    for bits in range(2 ** K):
        gamma = tuple((bits >> i) & 1 for i in range(K))
        ok = all(gamma[pa] and gamma[pb]
                 for child, (pa, pb) in hierarchy.items() if gamma[child])
        if ok:
            models.append(ModelIndex(gamma=gamma))
    models.sort(key=lambda m: (sum(m.gamma),
                               sum(g << i for i, g in enumerate(m.gamma))))
    return ModelSpace(models=models, covariate_names=list(covariate_names),
                      kind="subset", interactions=hierarchy)


def enumerate_two_factor_patterns(factor_names: tuple[str, str] = ("a", "b")) -> ModelSpace:
    """The 16-model cell-mean pattern space for two binary factors."""
    if len(factor_names) != 2:
        raise ValueError("exactly two binary factors must be designated")
    partitions = sorted(set(_all_partitions()))
    interaction = sorted((p for p in partitions if p not in _MAIN_PATTERNS),
                         key=lambda p: (max(p) + 1, p))
    models = [ModelIndex(pattern=_NULL_PATTERN),
              ModelIndex(pattern=_A_SPLIT),
              ModelIndex(pattern=_B_SPLIT),
              ModelIndex(pattern=(0, 1, 2, 3), additive=True)]
    models += [ModelIndex(pattern=p) for p in interaction]
    return ModelSpace(models=models, covariate_names=list(factor_names),
                      kind="pattern")


def _pattern_involves_factor(model: ModelIndex, factor: int) -> bool:
    """True when some pair of cells differing only in ``factor`` is split."""
    if model.additive:
        return True
    for i, ci in enumerate(CELLS):
        for j, cj in enumerate(CELLS):
            if i < j and ci[factor] != cj[factor] and ci[1 - factor] == cj[1 - factor]:
                if model.pattern[i] != model.pattern[j]:
                    return True
    return False


def involvement(space: ModelSpace) -> CovariateInvolvement:
    """Involvement flags for every model in ``space``.

    Subset spaces: a covariate is involved iff its gamma bit is set; the
    interaction flag is set iff any declared interaction column is included.
    Pattern spaces: a factor is involved iff the model separates some pair of
    cells differing only in that factor (the additive model involves both);
    the interaction flag marks the 12 partition models that are neither the
    null, a single-factor split, nor additive.
    """
    M = len(space.models)
    if space.kind == "subset":
        names = list(space.covariate_names)
        flags = np.zeros((M, len(names)), dtype=bool)
        inter = np.zeros(M, dtype=bool)
        for i, m in enumerate(space.models):
            flags[i] = np.array(m.gamma, dtype=bool)
            inter[i] = any(m.gamma[c] for c in space.interactions)
        return CovariateInvolvement(names=names, flags=flags, interaction=inter)

    a, b = space.covariate_names
    names = [a, b, f"{a}:{b}"]
    flags = np.zeros((M, 3), dtype=bool)
    inter = np.zeros(M, dtype=bool)
    for i, m in enumerate(space.models):
        inter[i] = (not m.additive) and (m.pattern not in _MAIN_PATTERNS)
        flags[i, 0] = _pattern_involves_factor(m, 0)
        flags[i, 1] = _pattern_involves_factor(m, 1)
        flags[i, 2] = inter[i]
    return CovariateInvolvement(names=names, flags=flags, interaction=inter)
