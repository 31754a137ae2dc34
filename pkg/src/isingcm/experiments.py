"""Statistical checks of the limit theorems at finite N.

Every replica ``i`` draws its graph from ``stream(seed, GRAPH, i)`` and its
spins from ``stream(seed, SPINS, i)``, so reports do not depend on the number
of worker threads.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import graphgen, limits, mcmc, stats
from .ising1d import IsingParams
from .observables import ConfigurationSampler, line_counts, quenched_observables
from .rng import stream

SCHEMA_VERSION = 1
MODELS = ("cm2", "cm12", "custom")
GRAPH, SPINS, JITTER = 0, 1, 2


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    N: int
    params: IsingParams
    R: int = 1
    M: int = 1000
    seed: int = 0
    T: int | None = None
    level: float = 0.01
    p: float | None = None
    pmf: dict | None = None
    var_tol: float = 0.05
    threads: int = 1

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.N < 100:
            raise ValueError("N must be >= 100")
        if self.R < 1 or self.M < 1:
            raise ValueError("R and M must be >= 1")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if self.model == "cm12" and (self.p is None or not 0.0 <= self.p <= 1.0):
            raise ValueError("cm12 needs p in [0, 1]")
        if self.model == "custom" and not self.pmf:
            raise ValueError("custom model needs a degree pmf")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def as_dict(self):
        d = asdict(self)
        d["params"] = {"beta": self.params.beta, "B": self.params.B}
        if self.pmf is not None:
            d["pmf"] = {str(k): v for k, v in self.pmf.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["params"] = IsingParams(**d["params"])
        if d.get("pmf") is not None:
            d["pmf"] = {int(k): v for k, v in d["pmf"].items()}
        return cls(**d)


@dataclass
class Criterion:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass
class ExperimentReport:
    name: str
    config: dict
    metrics: dict
    criteria: list = field(default_factory=list)
    histogram: dict | None = None
    runtime: float = 0.0
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self):
        return all(c.passed for c in self.criteria)

    def add(self, name, value, threshold, passed, detail=""):
        self.criteria.append(Criterion(name, float(value), float(threshold), bool(passed), detail))

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d.pop("passed", None)
        d["criteria"] = [Criterion(**c) for c in d["criteria"]]
        return cls(**d)

    def csv_rows(self):
        """Flat ``(key, value)`` summary."""
        rows = [("experiment", self.name), ("passed", self.passed), ("runtime", self.runtime)]
        rows += [(k, v) for k, v in self.metrics.items() if not isinstance(v, (list, dict))]
        rows += [(f"criterion:{c.name}", c.passed) for c in self.criteria]
        return rows


# --- shared plumbing -----------------------------------------------------------------


def make_graph(config, i, N=None):
    N = config.N if N is None else N
    rng = stream(config.seed, GRAPH, i)
    if config.model == "cm2":
        return graphgen.cm2(N, rng=rng)
    if config.model == "cm12":
        return graphgen.cm12(N, config.p, rng=rng)
    return graphgen.pair_half_edges(graphgen.degrees_from_pmf(config.pmf, N), rng=rng)


def is_decomposable(config):
    if config.model != "custom":
        return True
    return max(k for k, v in config.pmf.items() if v > 0) <= 2


def _map(config, fn, items):
    if config.threads == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(config.threads) as ex:
        return list(ex.map(fn, items))


def limit_chi(config):
    if config.model == "cm2":
        return limits.chi_cm2(config.params)
    if config.model == "cm12":
        return limits.chi_cm12(config.params, config.p, config.T)
    return math.nan


def limit_magnetization(config):
    if config.model == "cm2":
        return limits.magnetization_cm2(config.params)
    if config.model == "cm12":
        return limits.magnetization_cm12(config.params, config.p, config.T)
    return math.nan


def _rel_close(x, target, tol):
    return abs(x - target) <= tol * abs(target)


def _ks_lattice(config, V, variance):
    """KS test of sums on the ``2/sqrt(N)`` lattice after continuization."""
    step = 2.0 / math.sqrt(config.N)
    W = stats.continuize(V, step, stream(config.seed, JITTER))
    return stats.ks_test(W / math.sqrt(variance + step * step / 12.0))


def _replica_draws(config, i, M=None, N=None):
    """Exact moments and ``M`` exact spin-sum draws on replica ``i``."""
    g = make_graph(config, i, N)
    d = graphgen.decompose(g)
    obs = quenched_observables(config.params, d)
    S = ConfigurationSampler(config.params, d).sample_sums(config.M if M is None else M, stream(config.seed, SPINS, i))
    return obs, S


# --- random quenched CLT ---------------------------------------------------------------


def rq_clt_experiment(config):
    t0 = time.perf_counter()
    N = config.N
    rep = ExperimentReport("rq_clt", config.as_dict(), {})
    chi_lim = limit_chi(config)
    if is_decomposable(config):
        obs, S = _replica_draws(config, 0)
        chi_N = obs.chi_N
        V = (S - obs.mean_S) / math.sqrt(N)
        var, var_se = stats.variance_se(V, center=0.0)
        rep.metrics.update(mean_S_exact=obs.mean_S, chi_N=chi_N, sampler="exact")
    else:
        g = make_graph(config, 0)
        S = mcmc.sample_sums(g, config.params, config.M, thin=10, burn_in=10 * N, rng=stream(config.seed, SPINS, 0))
        V = (S - S.mean()) / math.sqrt(N)
        var, var_se = stats.variance_se(V)
        chi_N = var
        rep.metrics.update(sampler="mcmc")
    mean, mean_se = stats.mean_se(V)
    if rep.metrics["sampler"] == "exact":
        ks_d, ks_p = _ks_lattice(config, V, chi_N)
    else:
        ks_d, ks_p = stats.ks_test(V / math.sqrt(chi_N))
    rep.metrics.update(
        mean=mean, mean_se=mean_se, variance=var, variance_se=var_se,
        target_variance=chi_N, chi_limit=chi_lim, ks_statistic=ks_d, ks_p_value=ks_p,
    )
    if not math.isnan(chi_lim):
        rep.metrics["z_vs_limit"] = (var - chi_lim) / var_se
    rep.add("ks_normality", ks_p, config.level, ks_p > config.level)
    if rep.metrics["sampler"] == "exact":
        rep.add("variance_vs_chi_N", abs(var / chi_N - 1), config.var_tol, _rel_close(var, chi_N, config.var_tol))
    rep.histogram = stats.histogram(V)
    rep.runtime = time.perf_counter() - t0
    return rep


# --- averaged quenched CLT ------------------------------------------------------------


def aq_clt_experiment(config):
    if config.model not in ("cm2", "cm12"):
        raise ValueError("the averaged-quenched experiment needs cm2 or cm12")
    t0 = time.perf_counter()
    N = config.N
    rep = ExperimentReport("aq_clt", config.as_dict(), {})
    draws = _map(config, lambda i: _replica_draws(config, i), range(config.R))
    mean_S = np.array([o.mean_S for o, _ in draws])
    chi_N = np.array([o.chi_N for o, _ in draws])
    S = np.stack([s for _, s in draws]).astype(float)
    grand = float(mean_S.mean())
    V = (S - grand) / math.sqrt(N)
    pooled, pooled_se = stats.clustered_variance(V, 0.0)

    # exact conditional form: E[pooled | graphs] = mean chi_N + spread of the exact means
    contrib = chi_N + (mean_S - grand) ** 2 / N
    rb, rb_se = float(contrib.mean()), float(contrib.std(ddof=1) / math.sqrt(config.R))

    direct, decomposed = stats.total_variance(S / math.sqrt(N))
    mix_raw = stats.mixture_variance_raw(mean_S / math.sqrt(N), chi_N)
    mix_dec = stats.mixture_variance(mean_S / math.sqrt(N), chi_N)

    chi_lim = limit_chi(config)
    if config.model == "cm2":
        target, sg2 = chi_lim, 0.0
    else:
        sg2 = limits.sigma_G2(config.params, config.p, config.T) if 0 < config.p < 1 else 0.0
        target = chi_lim + sg2
    ks_d, ks_p = _ks_lattice(config, V.ravel(), target)
    rep.metrics.update(
        variance=pooled, variance_se=pooled_se, rb_variance=rb, rb_variance_se=rb_se,
        mean_chi_N=float(chi_N.mean()), var_graph_means=float(np.var(mean_S / math.sqrt(N))),
        grand_mean_S=grand, target_variance=target, chi_limit=chi_lim, sigma_G2=sg2,
        ks_statistic=ks_d, ks_p_value=ks_p,
        total_variance_direct=direct, total_variance_decomposed=decomposed,
        mixture_variance_raw=mix_raw, mixture_variance_decomposed=mix_dec,
        excess_z_sampled=(pooled - chi_lim) / pooled_se,
        excess_z_rb=(rb - chi_lim) / rb_se,
    )
    rep.add("ks_normality", ks_p, config.level, ks_p > config.level)
    rep.add("variance_vs_target", abs(pooled / target - 1), config.var_tol, _rel_close(pooled, target, config.var_tol))
    scale = max(abs(direct), 1.0)
    rep.add("total_variance_identity", abs(direct - decomposed) / scale, 1e-9, abs(direct - decomposed) <= 1e-9 * scale)
    if config.model == "cm12" and sg2 > 0:
        z = rep.metrics["excess_z_rb"]
        rep.add(
            "exceeds_chi", z, 3.0, z > 3.0,
            "Rao-Blackwellized pooled variance minus chi, in standard errors",
        )
    rep.histogram = stats.histogram(V.ravel())
    rep.runtime = time.perf_counter() - t0
    return rep


# --- graph fluctuations -------------------------------------------------------------------


def graph_fluctuation_experiment(config):
    if config.model != "cm12":
        raise ValueError("the graph-fluctuation experiment needs cm12")
    t0 = time.perf_counter()
    N, p, params = config.N, config.p, config.params
    T = config.T if config.T is not None else limits.choose_truncation(params, p)
    rep = ExperimentReport("graph_fluctuation", config.as_dict(), {"T": T})

    def counts(i):
        g = make_graph(config, i)
        return line_counts(graphgen.decompose(g), T)

    C = np.stack(_map(config, counts, range(config.R))).astype(float)
    n1, n2 = graphgen.cm12_degree_counts(N, p)
    ell = n1 + 2 * n2
    gam = limits.gamma_l(params, np.arange(2, T + 1))
    X = math.sqrt(N) * ((C / N - (C / N).mean(axis=0)) @ gam)
    var_x, var_x_se = stats.variance_se(X)
    sg2 = limits.sigma_G2(params, p, T) if 0 < p < 1 else 0.0
    sg2_printed = limits.sigma_G2_printed(params, p, T) if 0 < p < 1 else 0.0

    exp_l2 = 0.5 * n1 * (n1 - 1) / (ell - 1)
    lam2 = (C[:, 0] - exp_l2) / math.sqrt(n1 / 2)
    var_l2, var_l2_se = stats.variance_se(lam2, center=0.0)
    H22 = limits.covariance_H(limits.alpha_of(p), 2, 2) if 0 < p < 1 else 0.0
    rep.metrics.update(
        variance_X=var_x, variance_X_se=var_x_se, sigma_G2=sg2, sigma_G2_printed=sg2_printed,
        z_X=(var_x - sg2) / var_x_se if var_x_se > 0 else 0.0,
        z_X_printed=(var_x - sg2_printed) / var_x_se if var_x_se > 0 else 0.0,
        variance_lambda2=var_l2, variance_lambda2_se=var_l2_se, H22=H22,
        z_lambda2=(var_l2 - H22) / var_l2_se,
        mean_p2=float(C[:, 0].mean() / N), mean_p2_se=float(C[:, 0].std(ddof=1) / N / math.sqrt(config.R)),
        mean_p3=float(C[:, 1].mean() / N) if T >= 3 else math.nan,
        mean_p3_se=float(C[:, 1].std(ddof=1) / N / math.sqrt(config.R)) if T >= 3 else math.nan,
        tail_bound=limits.cm12_limits(params, p, T).tail_bound,
    )
    if sg2 > 0:
        rep.add("variance_X_vs_sigma_G2", abs(rep.metrics["z_X"]), 3.0, abs(rep.metrics["z_X"]) <= 3.0)
        ks_d, ks_p = stats.ks_test(X / math.sqrt(sg2))
        rep.metrics.update(ks_statistic=ks_d, ks_p_value=ks_p)
        rep.add("ks_normality", ks_p, config.level, ks_p > config.level)
        rep.histogram = stats.histogram(X)
    else:
        rep.add("X_vanishes", float(np.max(np.abs(X))), 1e-12, bool(np.max(np.abs(X)) <= 1e-12))
    rep.add("variance_lambda2_vs_H22", abs(rep.metrics["z_lambda2"]), 3.0, abs(rep.metrics["z_lambda2"]) <= 3.0)
    rep.runtime = time.perf_counter() - t0
    return rep


# --- laws of large numbers -------------------------------------------------------------------


def binomial_exceedance(N, B, epsilon):
    """Exact ``P(|S_N/N - tanh B| > epsilon)`` for independent spins."""
    q = (1.0 + math.tanh(B)) / 2.0
    m = math.tanh(B)
    k = np.arange(N + 1)
    logpmf = (
        np.array([math.lgamma(N + 1) - math.lgamma(i + 1) - math.lgamma(N - i + 1) for i in k])
        + k * math.log(q) + (N - k) * math.log1p(-q)
    )
    far = np.abs((2 * k - N) / N - m) > epsilon
    if not far.any():
        return 0.0
    lp = logpmf[far]
    top = lp.max()
    return float(math.exp(top) * np.exp(lp - top).sum())


def lln_experiment(config, epsilon, N_grid):
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    grid = [int(n) for n in N_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("N_grid must be increasing")
    t0 = time.perf_counter()
    mag = limit_magnetization(config)
    rep = ExperimentReport("lln", config.as_dict(), {"epsilon": epsilon, "magnetization": mag, "N_grid": grid})
    trivial = epsilon > 1.0 + abs(mag)
    cells = {"rq": [], "aq": []}
    for j, N in enumerate(grid):
        # random quenched: one graph, M draws; averaged quenched: R graphs sharing the M draws
        _, S = _replica_draws(config, j, N=N)
        cells["rq"].append(_cell(S, N, mag, epsilon, trivial, config.M))
        R = config.R
        per = max(1, config.M // R)
        S_aq = np.concatenate([_replica_draws(config, 10**6 + j * R + i, M=per, N=N)[1] for i in range(R)])
        cells["aq"].append(_cell(S_aq, N, mag, epsilon, trivial, S_aq.size))
        if config.params.beta == 0.0:
            exact = binomial_exceedance(N, config.params.B, epsilon)
            cells["rq"][-1]["exact"] = exact
            cells["aq"][-1]["exact"] = exact
    for mode in ("rq", "aq"):
        rep.metrics[f"{mode}_cells"] = cells[mode]
        rep.metrics[f"{mode}_slope"] = _slope(grid, cells[mode])
    rq = cells["rq"]
    if trivial:
        rep.add("trivially_zero", max(c["probability"] for c in rq), 0.0, all(c["probability"] == 0 for c in rq))
    else:
        ok = all(b["probability"] <= a["probability"] for a, b in zip(rq, rq[1:]))
        rep.add("decreasing_in_N", float(ok), 1.0, ok, "estimates, or rule-of-three bounds for zero-hit cells")
        slope = rep.metrics["rq_slope"]
        if not math.isnan(slope):
            rep.add("negative_slope", slope, 0.0, slope < 0)
    if config.params.beta == 0.0:
        worst = 0.0
        for c in rq + cells["aq"]:
            se = math.sqrt(max(c["exact"] * (1 - c["exact"]), 1e-300) / c["samples"])
            worst = max(worst, abs(c["estimate"] - c["exact"]) / se if c["hits"] else 0.0)
            if c["hits"] == 0 and c["exact"] > 3.0 / c["samples"]:
                worst = max(worst, math.inf)
        rep.add("binomial_oracle", worst, 4.0, worst <= 4.0, "max |estimate - exact| in binomial SE")
    rep.runtime = time.perf_counter() - t0
    return rep


def _cell(S, N, mag, epsilon, trivial, n):
    hits = int(np.count_nonzero(np.abs(S / N - mag) > epsilon))
    if trivial:
        return {"N": N, "samples": n, "hits": hits, "estimate": 0.0, "probability": 0.0, "upper_bound": False}
    prob, bound = stats.rule_of_three(hits, n)
    return {"N": N, "samples": n, "hits": hits, "estimate": hits / n, "probability": prob, "upper_bound": bound}


def _slope(grid, cells):
    """Least-squares slope of log P against N over cells with hits."""
    pts = [(c["N"], math.log(c["probability"])) for c in cells if c["hits"] > 0 and not c["upper_bound"]]
    if len(pts) < 2:
        return math.nan
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


ks_test = stats.ks_test
