"""Small statistics toolkit: KS test, variance standard errors, variance decompositions."""

import math

import numpy as np

MIN_KS_SAMPLES = 50


def normal_cdf(x, scale=1.0):
    x = np.asarray(x, dtype=float) / scale
    return 0.5 * (1.0 + _erf(x / math.sqrt(2.0)))


_erf = np.vectorize(math.erf, otypes=[float])


def kolmogorov_sf(x, tol=1e-12):
    """``P(K > x)`` for the limiting Kolmogorov distribution."""
    if x <= 0:
        return 1.0
    if x < 0.2:
        # the alternating series is useless here and the mass above x is 1 to double precision
        return 1.0
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * x * x)
        total += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_statistic(samples, target_cdf):
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    F = np.asarray(target_cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_test(samples, target_cdf=normal_cdf):
    """Two-sided one-sample KS test with the asymptotic p-value."""
    n = np.size(samples)
    if n < MIN_KS_SAMPLES:
        raise ValueError(f"KS test needs at least {MIN_KS_SAMPLES} samples, got {n}")
    d = ks_statistic(samples, target_cdf)
    return d, kolmogorov_sf(math.sqrt(n) * d)


def continuize(x, step, rng):
    """Spread lattice-valued samples uniformly over their cell of width ``step``.

    Adds ``step**2 / 12`` to the variance; removes the jumps that the KS
    statistic would otherwise pick up at large sample sizes.
    """
    x = np.asarray(x, dtype=float)
    return x + step * (rng.random(x.shape) - 0.5)


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def variance_se(x, center=None):
    """Sample variance and its standard error ``sqrt((m4 - m2^2)/n)``.

    With ``center`` given the variance is the mean squared deviation about it.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if center is None:
        d = x - x.mean()
        var = float(d @ d / (n - 1))
    else:
        d = x - center
        var = float(d @ d / n)
    m2 = float(np.mean(d * d))
    m4 = float(np.mean(d**4))
    return var, math.sqrt(max(m4 - m2 * m2, 0.0) / n)


def clustered_variance(groups, center):
    """Pooled mean squared deviation about ``center`` and its cluster-robust SE.

    ``groups`` has shape ``(R, M)``; rows are independent clusters.
    """
    g = np.asarray(groups, dtype=float)
    per = np.mean((g - center) ** 2, axis=1)
    return float(per.mean()), float(per.std(ddof=1) / math.sqrt(per.size))


def total_variance(groups):
    """Pooled variance two ways on the same ``(R, M)`` data.

    Returns ``(direct, decomposed)`` where the decomposition is the mean of the
    within-group variances plus the variance of the group means (population
    normalizations throughout, so the identity is exact).
    """
    g = np.asarray(groups, dtype=float)
    direct = float(np.mean((g - g.mean()) ** 2))
    within = float(np.mean(g.var(axis=1)))
    between = float(g.mean(axis=1).var())
    return direct, within + between


def mixture_variance(means, variances):
    """Variance of an equal-weight mixture from its component moments."""
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    return float(variances.mean() + means.var())


def mixture_variance_raw(means, variances):
    """Same quantity from raw second moments ``E[X^2] - E[X]^2``."""
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    second = float(np.mean(variances + means**2))
    return second - float(means.mean()) ** 2


def histogram(x, bins=40):
    counts, edges = np.histogram(np.asarray(x, dtype=float), bins=bins)
    return {"edges": edges.tolist(), "counts": counts.tolist()}


def rule_of_three(hits, n):
    """Point estimate of a probability, or the 95% upper bound ``3/n`` when nothing was hit."""
    if hits == 0:
        return 3.0 / n, True
    return hits / n, False
