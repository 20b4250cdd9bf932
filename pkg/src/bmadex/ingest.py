"""Loading, validation, and alignment of expression and covariate tables.

Expression files have genes as rows and samples as columns (first column is
the gene identifier); covariate files have samples as rows (first column is
the sample identifier). Both comma- and tab-separated files are accepted;
the delimiter is sniffed from the header line, preferring tab when both
occur. "NA", "NaN" and empty cells are treated as missing and rejected:
every downstream number assumes complete data, so imputation is never
silent.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import pandas as pd

from bmadex.errors import (DuplicateIdError, NonFiniteError, ParseError,
                           SampleMismatchError)

MISSING_TOKENS = ["NA", "NaN", "nan", ""]


@dataclass
class ExpressionMatrix:
    """Genes x samples log-scale expression values."""

    gene_ids: list[str]
    sample_ids: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        J, n = self.values.shape
        if J != len(self.gene_ids) or n != len(self.sample_ids):
            raise ValueError("expression shape does not match identifiers")
        _check_unique(self.gene_ids, "gene")
        _check_unique(self.sample_ids, "sample")
        if not np.all(np.isfinite(self.values)):
            j, i = np.argwhere(~np.isfinite(self.values))[0]
            raise NonFiniteError(f"non-finite expression for gene "
                                 f"{self.gene_ids[j]!r}, sample {self.sample_ids[i]!r}")


@dataclass
class CovariateTable:
    """Samples x covariates table.

    Values are floats once standardized; freshly parsed tables may hold
    string levels (object dtype) until ``standardize_factors`` recodes them.
    """

    sample_ids: list[str]
    covariate_names: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        n, K = self.values.shape
        if n != len(self.sample_ids) or K != len(self.covariate_names):
            raise ValueError("covariate shape does not match identifiers")
        _check_unique(self.sample_ids, "sample")
        _check_unique(self.covariate_names, "covariate")
        for k, name in enumerate(self.covariate_names):
            col = self.values[:, k]
            if col.dtype.kind == "f" and not np.all(np.isfinite(col.astype(float))):
                i = int(np.argwhere(~np.isfinite(col.astype(float)))[0])
                raise NonFiniteError(f"missing value for covariate {name!r}, "
                                     f"sample {self.sample_ids[i]!r}")
            if len(set(col.tolist())) < 2:
                raise ValueError(f"covariate {name!r} has fewer than two distinct values")

    @property
    def is_numeric(self) -> bool:
        return self.values.dtype.kind == "f"

    def matrix(self, names: list[str] | None = None) -> np.ndarray:
        """Float matrix of the named columns (all columns by default)."""
        if not self.is_numeric:
            raise ValueError("covariates contain unstandardized string levels")
        if names is None:
            return self.values.astype(float)
        idx = []
        for nm in names:
            if nm not in self.covariate_names:
                raise KeyError(f"unknown covariate {nm!r}; have {self.covariate_names}")
            idx.append(self.covariate_names.index(nm))
        return self.values[:, idx].astype(float)

    def reordered(self, sample_ids: list[str]) -> "CovariateTable":
        pos = {s: i for i, s in enumerate(self.sample_ids)}
        perm = [pos[s] for s in sample_ids]
        return CovariateTable(sample_ids=list(sample_ids),
                              covariate_names=list(self.covariate_names),
                              values=self.values[perm])


@dataclass
class Dataset:
    """Expression matrix plus covariates aligned to the same sample order."""

    expression: ExpressionMatrix
    covariates: CovariateTable

    def __post_init__(self):
        if self.expression.sample_ids != self.covariates.sample_ids:
            raise SampleMismatchError("expression and covariate samples are not aligned")
        if not self.covariates.is_numeric:
            raise ValueError("covariates must be numeric; standardize factors first")

    @property
    def n_genes(self) -> int:
        return len(self.expression.gene_ids)

    @property
    def n_samples(self) -> int:
        return len(self.expression.sample_ids)


def _check_unique(ids, what: str):
    seen = set()
    for x in ids:
        if x in seen:
            raise DuplicateIdError(f"duplicate {what} identifier {x!r}")
        seen.add(x)


def _sniff_header(path) -> tuple[str, list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
    if not header.strip():
        raise ParseError(f"{path}: empty file")
    # tab wins when both delimiters appear in the header
    sep = "\t" if "\t" in header else ","
    return sep, header.rstrip("\r\n").split(sep)


def _read_table(path) -> pd.DataFrame:
    sep, header = _sniff_header(path)
    if len(header) < 2:
        raise ParseError(f"{path}: expected an identifier column plus data columns")
    _check_unique(header[1:], "column")
    try:
        df = pd.read_csv(path, sep=sep, header=0, dtype={header[0]: str},
                         na_values=MISSING_TOKENS, keep_default_na=False)
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if df.iloc[:, 0].isna().any():
        raise ParseError(f"{path}: missing identifier in first column")
    return df


def load_expression(path) -> ExpressionMatrix:
    df = _read_table(path)
    gene_ids = df.iloc[:, 0].astype(str).tolist()
    sample_ids = [str(c) for c in df.columns[1:]]
    _check_unique(gene_ids, "gene")
    body = df.iloc[:, 1:].copy()
    for col in body.columns:
        if body[col].dtype.kind == "O":
            bad = body[col][pd.to_numeric(body[col], errors="coerce").isna()
                            & body[col].notna()]
            if len(bad):
                j = bad.index[0]
                raise ParseError(f"{path}: non-numeric expression value "
                                 f"{bad.iloc[0]!r} for gene {gene_ids[j]!r}, "
                                 f"sample {col!r}")
            body[col] = pd.to_numeric(body[col], errors="coerce")
    values = body.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        j, i = np.argwhere(~np.isfinite(values))[0]
        raise NonFiniteError(f"{path}: missing or non-finite value for gene "
                             f"{gene_ids[j]!r}, sample {sample_ids[i]!r}")
    return ExpressionMatrix(gene_ids=gene_ids, sample_ids=sample_ids, values=values)


def load_covariates(path) -> CovariateTable:
    df = _read_table(path)
    sample_ids = df.iloc[:, 0].astype(str).tolist()
    names = [str(c) for c in df.columns[1:]]
    body = df.iloc[:, 1:]
    columns = []
    for k, col in enumerate(body.columns):
        series = body[col]
        if series.isna().any():
            i = int(np.argwhere(series.isna().to_numpy())[0])
            raise NonFiniteError(f"{path}: missing value for covariate "
                                 f"{names[k]!r}, sample {sample_ids[i]!r}")
        if series.dtype.kind == "O":
            as_num = pd.to_numeric(series, errors="coerce")
            columns.append(as_num.to_numpy() if as_num.notna().all()
                           else series.astype(str).to_numpy(dtype=object))
        else:
            columns.append(series.to_numpy(dtype=float))
    all_numeric = all(c.dtype.kind == "f" for c in columns)
    values = (np.column_stack(columns) if all_numeric
              else np.column_stack([c.astype(object) for c in columns]))
    if all_numeric and not np.all(np.isfinite(values.astype(float))):
        i, k = np.argwhere(~np.isfinite(values.astype(float)))[0]
        raise NonFiniteError(f"{path}: non-finite value for covariate "
                             f"{names[k]!r}, sample {sample_ids[i]!r}")
    return CovariateTable(sample_ids=sample_ids, covariate_names=names, values=values)


def standardize_factors(table: CovariateTable, names: list[str]) -> CovariateTable:
    """Recode the named two-level columns to 0/1.

    String levels are ordered lexicographically (smaller level becomes 0);
    numeric two-level columns map their smaller value to 0. Columns already
    coded 0/1 pass through unchanged.
    """
    values = table.values.astype(object).copy()
    for nm in names:
        if nm not in table.covariate_names:
            raise KeyError(f"unknown covariate {nm!r}")
        k = table.covariate_names.index(nm)
        col = values[:, k]
        levels = sorted(set(col.tolist()), key=str)
        if len(levels) != 2:
            raise ValueError(f"covariate {nm!r} has {len(levels)} distinct values; "
                             "binary factors must have exactly 2")
        if all(isinstance(v, (int, float, np.floating, np.integer)) for v in levels):
            levels = sorted(levels)
        mapping = {levels[0]: 0.0, levels[1]: 1.0}
        values[:, k] = np.array([mapping[v] for v in col], dtype=object)
    try:
        values = values.astype(float)
    except (TypeError, ValueError):
        pass
    return CovariateTable(sample_ids=list(table.sample_ids),
                          covariate_names=list(table.covariate_names),
                          values=values)


def load_dataset(expr_path, covar_path) -> Dataset:
    """Load, validate, and align an expression/covariate file pair.

    Samples are reordered so the covariate rows follow the expression column
    order. Non-numeric covariate columns with exactly two levels are
    recoded 0/1 automatically.
    """
    expr = load_expression(expr_path)
    covar = load_covariates(covar_path)
    missing = set(expr.sample_ids) - set(covar.sample_ids)
    extra = set(covar.sample_ids) - set(expr.sample_ids)
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"samples missing from covariates: {sorted(missing)}")
        if extra:
            parts.append(f"samples missing from expression: {sorted(extra)}")
        raise SampleMismatchError("; ".join(parts))
    covar = covar.reordered(expr.sample_ids)
    if not covar.is_numeric:
        string_cols = [nm for k, nm in enumerate(covar.covariate_names)
                       if any(isinstance(v, str) for v in covar.values[:, k])]
        covar = standardize_factors(covar, string_cols)
        if not covar.is_numeric:
            raise ParseError(f"{covar_path}: could not standardize covariates")
    return Dataset(expression=expr, covariates=covar)


def format_float(x: float) -> str:
    return f"{x:.10g}"


def write_expression(path, em: ExpressionMatrix, sep: str = "\t"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(sep.join(["gene_id", *em.sample_ids]) + "\n")
        for j, gid in enumerate(em.gene_ids):
            row = sep.join(format_float(v) for v in em.values[j])
            fh.write(f"{gid}{sep}{row}\n")


def write_covariates(path, ct: CovariateTable, sep: str = "\t"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(sep.join(["sample_id", *ct.covariate_names]) + "\n")
        for i, sid in enumerate(ct.sample_ids):
            cells = [format_float(v) if isinstance(v, (float, np.floating)) else str(v)
                     for v in ct.values[i]]
            fh.write(sep.join([sid, *cells]) + "\n")
