"""Variables-by-samples data container with centering, standardization and splits.

The in-memory layout is variable-major (one row per variable), so all
per-variable statistics are contiguous scans.  The covariance convention is
divide-by-T throughout: Sigma = (1/T) X X^T, and standardization divides by
sqrt((1/T) sum x^2) so that standardized data has unit diagonal covariance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError

__all__ = ["DataMatrix", "load_csv", "write_csv", "center", "standardize", "split"]

_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class DataMatrix:
    """Immutable N x T matrix (variables as rows) plus centering metadata.

    ``mean`` is present iff the rows have been centered; ``zero_variance``
    lists rows that could not be standardized because their sample variance
    is zero.
    """

    values: np.ndarray
    mean: np.ndarray | None = None
    standardized: bool = False
    variable_names: tuple[str, ...] | None = None
    zero_variance: tuple[int, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError("values must be a 2-d matrix with at least one row and column",
                            shape=tuple(np.shape(self.values)))
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError("non-finite value in data", row=int(bad[0]), col=int(bad[1]))
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.mean is not None:
            mean = np.asarray(self.mean, dtype=np.float64)
            if mean.shape != (values.shape[0],):
                raise DataError("mean length must equal the number of variables",
                                expected=values.shape[0], got=mean.shape)
            row_sums = np.abs(values.sum(axis=1))
            tol = 1e-9 * values.shape[1] * (np.abs(values).max(axis=1) + 1.0)
            if np.any(row_sums > tol):
                raise DataError("centered rows must sum to zero",
                                worst_row=int(np.argmax(row_sums - tol)))
            mean = mean.copy()
            mean.setflags(write=False)
            object.__setattr__(self, "mean", mean)
        if self.variable_names is not None:
            names = tuple(self.variable_names)
            if len(names) != values.shape[0]:
                raise DataError("variable_names length must equal the number of variables",
                                expected=values.shape[0], got=len(names))
            object.__setattr__(self, "variable_names", names)
        if self.standardized:
            var = (values ** 2).sum(axis=1) / values.shape[1]
            exempt = np.zeros(values.shape[0], dtype=bool)
            exempt[list(self.zero_variance)] = True
            if np.any(np.abs(var[~exempt] - 1.0) > 1e-6):
                raise DataError("standardized rows must have unit sample variance")

    @property
    def n_vars(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.values.shape[1]


def load_csv(path, delimiter: str = ",", has_header: bool = False,
             orientation: str = "variables-as-rows") -> DataMatrix:
    """Read a rectangular numeric CSV/TSV into a variable-major DataMatrix.

    ``orientation`` selects whether file rows are variables or samples; the
    result is always variable-major.  With ``samples-as-rows`` a header row
    supplies the variable names.
    """
    if orientation not in ("variables-as-rows", "samples-as-rows"):
        raise UsageError("unknown orientation", orientation=orientation)
    rows = []
    names = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for i, record in enumerate(reader):
            if i == 0 and has_header:
                if orientation == "samples-as-rows":
                    names = tuple(record)
                continue
            parsed = []
            for j, cell in enumerate(record):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError("cell does not parse as a number",
                                    row=i, col=j, cell=cell) from None
                if not np.isfinite(v):
                    raise DataError("non-finite value in data", row=i, col=j, cell=cell)
                parsed.append(v)
            rows.append(parsed)
    if not rows:
        raise DataError("empty file", path=str(path))
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DataError("ragged row", row=i + int(has_header),
                            expected=width, got=len(r))
    mat = np.array(rows, dtype=np.float64)
    if orientation == "samples-as-rows":
        mat = mat.T
    return DataMatrix(values=mat, variable_names=names)


def write_csv(data: DataMatrix, path, delimiter: str = ",",
              orientation: str = "variables-as-rows") -> None:
    """Write values with 17-significant-digit decimals for round-trip fidelity."""
    if orientation not in ("variables-as-rows", "samples-as-rows"):
        raise UsageError("unknown orientation", orientation=orientation)
    mat = data.values if orientation == "variables-as-rows" else data.values.T
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        if orientation == "samples-as-rows" and data.variable_names is not None:
            writer.writerow(data.variable_names)
        for row in mat:
            writer.writerow([_FLOAT_FMT % v for v in row])


def center(data: DataMatrix) -> DataMatrix:
    """Subtract each variable's empirical mean; the mean is kept on the result."""
    mu = data.values.mean(axis=1)
    return DataMatrix(values=data.values - mu[:, None],
                      mean=mu,
                      standardized=data.standardized,
                      variable_names=data.variable_names,
                      zero_variance=data.zero_variance)


def standardize(data: DataMatrix) -> DataMatrix:
    """Scale centered rows to unit variance (divide-by-T convention).

    Zero-variance rows are left unscaled and reported in ``zero_variance``.
    """
    if data.mean is None:
        raise UsageError("standardize requires centered data")
    var = (data.values ** 2).sum(axis=1) / data.n_samples
    flagged = tuple(int(i) for i in np.flatnonzero(var == 0.0))
    scale = np.where(var > 0.0, np.sqrt(var), 1.0)
    return DataMatrix(values=data.values / scale[:, None],
                      mean=data.mean,
                      standardized=True,
                      variable_names=data.variable_names,
                      zero_variance=flagged)


def split(data: DataMatrix, fractions: tuple[float, float, float],
          seed: int) -> tuple[DataMatrix, DataMatrix, DataMatrix]:
    """Seeded column split into train/val/test.

    Sizes are floors of the fractions; leftover columns go to train, then val.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise UsageError("fractions must be three positive numbers", fractions=fractions)
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise UsageError("fractions must sum to 1", total=sum(fractions))
    t = data.n_samples
    if t < 3:
        raise UsageError("need at least 3 samples to split", n_samples=t)
    sizes = [int(np.floor(f * t)) for f in fractions]
    leftover = t - sum(sizes)
    for i in range(leftover):
        sizes[i % 2] += 1  # train first, then val
    if any(s == 0 for s in sizes):
        raise UsageError("too few samples for a non-empty split",
                         sizes=tuple(sizes), n_samples=t)
    perm = np.random.default_rng(seed).permutation(t)
    parts = []
    start = 0
    for s in sizes:
        cols = np.sort(perm[start:start + s])
        parts.append(DataMatrix(values=data.values[:, cols],
                                mean=None,
                                standardized=False,
                                variable_names=data.variable_names))
        start += s
    return tuple(parts)
