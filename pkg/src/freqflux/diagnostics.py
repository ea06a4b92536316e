"""Normality diagnostics, Lindeberg ratio and weight-dominance analysis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from ._moments import Moments
from .errors import DegenerateSample, InsufficientSources, MissingDistribution, TooFewSamples

LINDEBERG_THRESHOLD = 0.01
MIN_SAMPLES = 20
MAX_QQ = 10_000


@dataclass(frozen=True)
class WeightedSource:
    """One term ``xi = weight * (X - E X)`` of a weighted sum.

    Give either an empirical ``sample`` of ``X`` or set ``gaussian`` to use
    the closed-form tail moment with the stated ``variance``.
    """

    label: str
    weight: float
    variance: float | None = None
    sample: np.ndarray | None = None
    gaussian: bool = False

    def var(self):
        if self.variance is not None:
            return float(self.variance)
        if self.sample is not None:
            return float(np.var(self.sample))
        raise MissingDistribution(f"source {self.label!r} has neither variance nor sample")


def gaussian_tail_moment(sd, t):
    """``E[X^2 1{|X| > t}]`` for ``X ~ N(0, sd^2)``."""
    if sd == 0.0:
        return 0.0
    a = t / sd
    return sd * sd * 2.0 * (a * stats.norm.pdf(a) + special.ndtr(-a))


@dataclass(frozen=True)
class LindebergResult:
    ratio: float
    passed: bool
    epsilon: float
    threshold: float
    varsigma: float
    contributions: np.ndarray = field(repr=False)


def _lindeberg_result(tail, total_var, epsilon, threshold):
    tail = np.asarray(tail, dtype=float)
    if total_var == 0.0:
        return LindebergResult(0.0, True, epsilon, threshold, 0.0, np.zeros_like(tail))
    contrib = tail / total_var
    ratio = float(contrib.sum())
    return LindebergResult(ratio, ratio < threshold, epsilon, threshold, float(np.sqrt(total_var)), contrib)


def lindeberg_ratio(sources, epsilon=0.1, threshold=LINDEBERG_THRESHOLD) -> LindebergResult:
    """Finite-N Lindeberg ratio ``sum_i E[xi_i^2 1{|xi_i| > eps s}] / s^2``.

    ``s^2 = sum_i w_i^2 var_i``. Tail moments come from the sample by
    direct summation when there is one, otherwise from the Gaussian closed
    form. ``passed`` means ``ratio < threshold``; it is a heuristic
    reading of an asymptotic condition, not a test.
    """
    sources = list(sources)
    if len(sources) < 2:
        raise InsufficientSources("the Lindeberg ratio needs at least two sources")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    variances = np.array([s.var() for s in sources])
    w = np.array([s.weight for s in sources], dtype=float)
    total = float(np.sum(w**2 * variances))
    t = epsilon * np.sqrt(total)
    tail = np.empty(len(sources))
    for i, s in enumerate(sources):
        if s.sample is not None:
            xi = w[i] * (np.asarray(s.sample, dtype=float) - np.mean(s.sample))
            tail[i] = np.mean(np.where(np.abs(xi) > t, xi * xi, 0.0))
        elif s.gaussian:
            tail[i] = gaussian_tail_moment(abs(w[i]) * np.sqrt(variances[i]), t)
        else:
            raise MissingDistribution(f"source {s.label!r}: no sample and no closed form")
    return _lindeberg_result(tail, total, epsilon, threshold)


@dataclass(frozen=True)
class StatsReport:
    n: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    jb_stat: float
    jb_pvalue: float
    ks_stat: float
    ks_pvalue: float
    qq_theoretical: np.ndarray = field(repr=False)
    qq_empirical: np.ndarray = field(repr=False)
    hist_edges: np.ndarray = field(repr=False)
    hist_counts: np.ndarray = field(repr=False)

    def rejects_normality(self, alpha=0.01):
        return self.jb_pvalue < alpha

    def as_rows(self):
        return [
            ("n", self.n),
            ("mean", self.mean),
            ("variance", self.variance),
            ("skewness", self.skewness),
            ("excess_kurtosis", self.excess_kurtosis),
            ("jarque_bera", self.jb_stat),
            ("jarque_bera_p", self.jb_pvalue),
            ("ks", self.ks_stat),
            ("ks_p", self.ks_pvalue),
        ]


def jarque_bera(skewness, excess_kurtosis, n):
    """JB statistic and its asymptotic chi-square(2) p-value."""
    jb = n / 6.0 * (skewness**2 + 0.25 * excess_kurtosis**2)
    return float(jb), float(stats.chi2.sf(jb, 2))


def qq_points(sample, max_points=MAX_QQ):
    """Standard-normal quantiles at ``(i - 0.5)/n`` against the sorted sample.

    Large samples are thinned to ``max_points`` evenly spaced order
    statistics (both coordinates stay monotone).
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    idx = np.arange(n)
    if max_points and n > max_points:
        idx = np.unique(np.round(np.linspace(0, n - 1, max_points)).astype(int))
    theo = special.ndtri((idx + 0.5) / n)
    return theo, x[idx]


def normality_report(sample, bins=50, max_qq=MAX_QQ) -> StatsReport:
    """Moments, Jarque-Bera, Kolmogorov-Smirnov (normal fitted by sample mean
    and standard deviation, asymptotic p-value), Q-Q points and histogram."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    mom = Moments.of(x)
    if mom.m2 <= 0.0 or not np.isfinite(mom.m2):
        raise DegenerateSample("sample has zero variance")
    skew, kurt = mom.skewness, mom.excess_kurtosis
    jb, jb_p = jarque_bera(skew, kurt, mom.n)
    sd = np.sqrt(mom.variance)
    ks = stats.kstest(x, "norm", args=(mom.mean, sd), method="asymp")
    theo, emp = qq_points(x, max_qq)
    counts, edges = np.histogram(x, bins=bins)
    return StatsReport(
        mom.n,
        mom.mean,
        mom.variance,
        skew,
        kurt,
        jb,
        jb_p,
        float(ks.statistic),
        float(ks.pvalue),
        theo,
        emp,
        edges,
        counts,
    )


@dataclass(frozen=True)
class DominanceRow:
    label: str
    bus: int
    component: str
    weight: float
    variance: float
    share: float
    skew_sign: int


def dominance_analysis(pmap, noise, variances=None, dt=0.0):
    """Rank noisy injections by their share of the CoI variance.

    ``variances`` (one per source column, in ``noise`` order with ``p``
    before ``q``) default to the stationary marginal variance of each
    model. Returns rows sorted by descending share; ``skew_sign`` is the
    sign the source imprints on the CoI deviation.
    """
    rows = []
    i = 0
    for model in noise:
        for comp in model.components:
            w = float(pmap.weight(model.bus, comp))
            var = model.level_variance(dt) if variances is None else float(variances[i])
            sk = np.sign(model.marginal_skewness()) * np.sign(w)
            rows.append([f"bus{model.bus}:{comp}", model.bus, comp, w, var, w * w * var, int(sk)])
            i += 1
    total = sum(r[5] for r in rows)
    out = [
        DominanceRow(r[0], r[1], r[2], r[3], r[4], r[5] / total if total > 0 else 0.0, r[6])
        for r in rows
    ]
    return sorted(out, key=lambda r: -r.share)
