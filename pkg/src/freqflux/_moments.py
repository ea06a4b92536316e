"""Mergeable central-moment accumulator (Pebay's pairwise update formulas)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHUNK = 1 << 16


@dataclass(frozen=True)
class Moments:
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    @classmethod
    def of(cls, x):
        """Moments of ``x``, accumulated chunk-wise and merged as a pairwise tree."""
        x = np.asarray(x, dtype=float).ravel()
        if x.size <= CHUNK:
            return cls._direct(x)
        parts = [cls._direct(x[i : i + CHUNK]) for i in range(0, x.size, CHUNK)]
        return tree_merge(parts)

    @classmethod
    def _direct(cls, x):
        if x.size == 0:
            return cls()
        mu = float(x.mean())
        d = x - mu
        d2 = d * d
        return cls(x.size, mu, float(d2.sum()), float((d2 * d).sum()), float((d2 * d2).sum()))

    def merge(self, other: "Moments") -> "Moments":
        na, nb = self.n, other.n
        if na == 0:
            return other
        if nb == 0:
            return self
        n = na + nb
        delta = other.mean - self.mean
        d_n = delta / n
        mean = self.mean + d_n * nb
        m2 = self.m2 + other.m2 + delta * d_n * na * nb
        m3 = (
            self.m3
            + other.m3
            + delta * d_n * d_n * na * nb * (na - nb)
            + 3.0 * d_n * (na * other.m2 - nb * self.m2)
        )
        m4 = (
            self.m4
            + other.m4
            + delta * d_n**3 * na * nb * (na * na - na * nb + nb * nb)
            + 6.0 * d_n * d_n * (na * na * other.m2 + nb * nb * self.m2)
            + 4.0 * d_n * (na * other.m3 - nb * self.m3)
        )
        return Moments(n, mean, m2, m3, m4)

    @property
    def variance(self):
        """Unbiased sample variance."""
        return self.m2 / (self.n - 1) if self.n > 1 else np.nan

    @property
    def skewness(self):
        if self.m2 == 0.0:
            return np.nan
        return np.sqrt(self.n) * self.m3 / self.m2**1.5

    @property
    def excess_kurtosis(self):
        if self.m2 == 0.0:
            return np.nan
        return self.n * self.m4 / self.m2**2 - 3.0


def tree_merge(parts):
    """Deterministic pairwise-tree reduction of a sequence of :class:`Moments`."""
    parts = list(parts)
    if not parts:
        return Moments()
    while len(parts) > 1:
        nxt = [parts[i].merge(parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]
