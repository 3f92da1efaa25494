"""Third-order cumulant estimation from raw samples.

Everything downstream (federation, source identification) consumes the
per-dataset summary built here: the skewness vector C3 and the two joint
cumulant grids C12/C21 between every ordered variable pair, optionally
replicated over bootstrap resamples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def _as_float_matrix(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D sample matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """An n x d block of observations with named columns.

    Rows are samples, columns are variables. Values must be finite and
    there must be at least two rows (cumulants of a single point are
    meaningless).
    """

    values: np.ndarray
    variable_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", _as_float_matrix(self.values))
        object.__setattr__(
            self, "variable_ids", tuple(str(v) for v in self.variable_ids)
        )
        n, d = self.values.shape
        if n < 2:
            raise ValueError(f"need at least 2 samples, got {n}")
        if d < 1:
            raise ValueError("need at least 1 variable")
        if len(self.variable_ids) != d:
            raise ValueError(
                f"{len(self.variable_ids)} variable ids for {d} columns"
            )
        if len(set(self.variable_ids)) != d:
            raise ValueError("variable ids must be unique")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sample values must be finite")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, variable_id: str) -> np.ndarray:
        return self.values[:, self.variable_ids.index(variable_id)]


@dataclass(frozen=True, eq=False)
class CumulantTable:
    """Third-order cumulant summary of d variables.

    c3[i] is Cum(x_i, x_i, x_i). For i != j, c12[i, j] is
    Cum(x_i, x_j, x_j) and c21[i, j] is Cum(x_i, x_i, x_j). The two grids
    store the same set of joint cumulants mirrored, c21[i, j] == c12[j, i]
    exactly, and their diagonals are unused (kept at zero).
    """

    variable_ids: tuple[str, ...]
    c3: np.ndarray
    c12: np.ndarray
    c21: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "variable_ids", tuple(str(v) for v in self.variable_ids)
        )
        c3 = np.asarray(self.c3, dtype=np.float64)
        c12 = np.asarray(self.c12, dtype=np.float64)
        c21 = np.asarray(self.c21, dtype=np.float64)
        object.__setattr__(self, "c3", c3)
        object.__setattr__(self, "c12", c12)
        object.__setattr__(self, "c21", c21)
        d = len(self.variable_ids)
        if c3.shape != (d,) or c12.shape != (d, d) or c21.shape != (d, d):
            raise ValueError("cumulant array shapes do not match variable count")
        if not (
            np.all(np.isfinite(c3))
            and np.all(np.isfinite(c12))
            and np.all(np.isfinite(c21))
        ):
            raise ValueError("cumulant entries must be finite")
        if not np.array_equal(c21, c12.T):
            raise ValueError("mirror violated: c21 must equal c12 transposed")

    @classmethod
    def from_c21(
        cls, variable_ids: Sequence[str], c3, c21
    ) -> "CumulantTable":
        """Build a table from the C21 grid alone, mirroring it into C12."""
        c21 = np.array(c21, dtype=np.float64)
        np.fill_diagonal(c21, 0.0)
        return cls(
            variable_ids=tuple(variable_ids),
            c3=np.asarray(c3, dtype=np.float64),
            c12=c21.T.copy(),
            c21=c21,
        )

    @property
    def d(self) -> int:
        return len(self.variable_ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CumulantTable):
            return NotImplemented
        return (
            self.variable_ids == other.variable_ids
            and np.array_equal(self.c3, other.c3)
            and np.array_equal(self.c12, other.c12)
            and np.array_equal(self.c21, other.c21)
        )


@dataclass(frozen=True, eq=False)
class ReplicateSet:
    """Bootstrap replicate tables plus the full-sample table they resample."""

    replicates: tuple[CumulantTable, ...]
    base: CumulantTable
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "replicates", tuple(self.replicates))
        if len(self.replicates) < 1:
            raise ValueError("need at least one replicate")
        for rep in self.replicates:
            if rep.variable_ids != self.base.variable_ids:
                raise ValueError("replicate variable ids differ from base")

    @property
    def b(self) -> int:
        return len(self.replicates)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReplicateSet):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.base == other.base
            and self.replicates == other.replicates
        )


def joint_cumulant(m: int, n: int, xi, xj) -> float:
    """Sample third-order joint cumulant with xi repeated m times, xj n times.

    Both vectors are centered by their own means, so the estimate is the
    centered cross-moment mean(xi_c**m * xj_c**n). Only total order
    m + n == 3 is supported; that is the entire pipeline's need, and at
    third order the central cross-moment equals the cumulant.
    """
    if m + n != 3:
        raise ValueError(f"only third-order cumulants supported, got m+n={m + n}")
    if m < 0 or n < 0:
        raise ValueError("repetition counts must be nonnegative")
    xi = np.asarray(xi, dtype=np.float64)
    xj = np.asarray(xj, dtype=np.float64)
    if xi.ndim != 1 or xj.ndim != 1:
        raise ValueError("inputs must be 1-D sample vectors")
    if xi.shape[0] != xj.shape[0]:
        raise ValueError(f"length mismatch: {xi.shape[0]} vs {xj.shape[0]}")
    if xi.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    xic = xi - xi.mean()
    xjc = xj - xj.mean()
    return float(np.mean(xic**m * xjc**n))


def estimate_cumulant_table(samples: SampleMatrix) -> CumulantTable:
    """Estimate all third-order cumulants between every variable pair.

    Columns are centered locally, so the table is invariant to per-column
    shifts. Each mirrored pair of cells is computed once: c21[i, j] holds
    Cum(x_i, x_i, x_j) and c12[j, i] is the same number.
    """
    xc = samples.values - samples.values.mean(axis=0)
    n = samples.n
    sq = xc * xc
    c3 = np.mean(sq * xc, axis=0)
    # c21[i, j] = mean(xc_i^2 * xc_j)
    c21 = sq.T @ xc / n
    return CumulantTable.from_c21(samples.variable_ids, c3, c21)


def bootstrap_tables(samples: SampleMatrix, b: int, seed: int) -> ReplicateSet:
    """Estimate b cumulant tables on row resamples drawn with replacement.

    Each replicate resamples the full n rows. The same seed yields an
    identical ReplicateSet. The base table is always the full-sample
    estimate.
    """
    if b < 1:
        raise ValueError(f"replicate count must be >= 1, got {b}")
    seed = int(seed)
    rng = np.random.default_rng(seed)
    n = samples.n
    replicates = []
    for _ in range(b):
        idx = rng.integers(0, n, size=n)
        resampled = SampleMatrix(samples.values[idx], samples.variable_ids)
        replicates.append(estimate_cumulant_table(resampled))
    base = estimate_cumulant_table(samples)
    return ReplicateSet(replicates=tuple(replicates), base=base, seed=seed)


def second_moment_matrix(samples: SampleMatrix) -> np.ndarray:
    """Pearson correlation grid of the columns; symmetric with unit diagonal.

    Feeds the partial-correlation route used when the data turn out to be
    Gaussian and the skew-based pipeline cannot run.
    """
    xc = samples.values - samples.values.mean(axis=0)
    std = xc.std(axis=0)
    zero = np.flatnonzero(std == 0.0)
    if zero.size:
        raise ValueError(
            f"zero-variance column: {samples.variable_ids[zero[0]]}"
        )
    cov = xc.T @ xc / samples.n
    corr = cov / np.outer(std, std)
    corr = (corr + corr.T) / 2.0
    np.fill_diagonal(corr, 1.0)
    return corr
