"""Column-wise streaming moments (mean, variance, skewness, excess kurtosis).

Chunks are reduced to central power sums and folded into the running totals
with the pairwise update of Chan et al. / Pébay, so the result does not depend
on how the data was chunked beyond floating point rounding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ColumnMoments:
    count: int
    mean: np.ndarray
    variance: np.ndarray  # unbiased, n - 1 denominator
    skewness: np.ndarray  # g1 = m3 / m2**1.5; NaN where degenerate
    kurtosis: np.ndarray  # g2 = m4 / m2**2 - 3; NaN where degenerate
    degenerate: np.ndarray  # True where the column is constant


class RunningMoments:
    """Accumulate moments of each column of a stream of ``(rows, cols)`` chunks."""

    def __init__(self, ncols: int):
        self.n = 0
        self.mean = np.zeros(ncols)
        self.m2 = np.zeros(ncols)
        self.m3 = np.zeros(ncols)
        self.m4 = np.zeros(ncols)
        self.lo = np.full(ncols, np.inf)
        self.hi = np.full(ncols, -np.inf)

    def push(self, chunk) -> "RunningMoments":
        x = np.asarray(chunk, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[1] != self.mean.shape[0]:
            raise ValueError(f"chunk has {x.shape[1]} columns, expected {self.mean.shape[0]}")
        nb = x.shape[0]
        if nb == 0:
            return self
        mean_b = x.mean(axis=0)
        d = x - mean_b
        d2 = d * d
        other = RunningMoments.__new__(RunningMoments)
        other.n = nb
        other.mean = mean_b
        other.m2 = d2.sum(axis=0)
        other.m3 = (d2 * d).sum(axis=0)
        other.m4 = (d2 * d2).sum(axis=0)
        other.lo = x.min(axis=0)
        other.hi = x.max(axis=0)
        return self.merge(other)

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        na, nb = self.n, other.n
        if nb == 0:
            return self
        if na == 0:
            self.n, self.mean = nb, other.mean.copy()
            self.m2, self.m3, self.m4 = other.m2.copy(), other.m3.copy(), other.m4.copy()
            self.lo, self.hi = other.lo.copy(), other.hi.copy()
            return self
        n = na + nb
        delta = other.mean - self.mean
        d2 = delta * delta
        m2 = self.m2 + other.m2 + d2 * na * nb / n
        m3 = (
            self.m3
            + other.m3
            + d2 * delta * na * nb * (na - nb) / n**2
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n
        )
        m4 = (
            self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / n**3
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / n**2
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n
        )
        self.mean = self.mean + delta * nb / n
        self.m2, self.m3, self.m4 = m2, m3, m4
        self.n = n
        self.lo = np.minimum(self.lo, other.lo)
        self.hi = np.maximum(self.hi, other.hi)
        return self

    def result(self) -> ColumnMoments:
        if self.n < 2:
            raise ValueError(f"moments need at least 2 samples, have {self.n}")
        n = self.n
        constant = self.lo == self.hi
        mean = np.where(constant, self.lo, self.mean)
        m2 = np.where(constant, 0.0, self.m2)
        with np.errstate(divide="ignore", invalid="ignore"):
            skew = np.sqrt(n) * self.m3 / m2**1.5
            kurt = n * self.m4 / (m2 * m2) - 3.0
        degenerate = constant | (m2 == 0)
        skew = np.where(degenerate, np.nan, skew)
        kurt = np.where(degenerate, np.nan, kurt)
        return ColumnMoments(
            count=n,
            mean=mean,
            variance=m2 / (n - 1),
            skewness=skew,
            kurtosis=kurt,
            degenerate=degenerate,
        )


def column_moments(matrix, chunk_rows: int = 4096) -> ColumnMoments:
    """Moments of every column of ``matrix``, streamed in row chunks."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.size == 0:
        raise ValueError("expected a non-empty 2-D matrix")
    acc = RunningMoments(x.shape[1])
    for start in range(0, x.shape[0], chunk_rows):
        acc.push(x[start : start + chunk_rows])
    return acc.result()
