"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the terminal summary by conftest.py.
"""

import itertools
import math

import mpmath as mp
import numpy as np
import pytest
from scipy.stats import chi2

import conftest
import oracles
from isingcm import graphgen as G
from isingcm import limits, mcmc, stats
from isingcm.experiments import (
    ExperimentConfig,
    aq_clt_experiment,
    graph_fluctuation_experiment,
    rq_clt_experiment,
)
from isingcm.ising1d import (
    CYCLE,
    LINE,
    IsingParams,
    boundary_weight_jets,
    brute_force_probabilities,
    d_logZ_dB,
    printed_susceptibility_1d,
    sample_component,
    sampler_tables,
    susceptibility_1d,
    transfer_jets,
)
from isingcm.observables import (
    brute_force_log_partition_graph,
    line_counts,
    log_partition_graph,
    quenched_observables,
)
from isingcm.rng import stream

P = IsingParams(0.5, 0.2)


def record(k, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def aq_cm12():
    cfg = ExperimentConfig("cm12", 10**4, P, R=2000, M=50, seed=7, p=0.5, threads=4)
    return aq_clt_experiment(cfg)


# 1 ------------------------------------------------------------------------------------


def test_criterion_1_brute_force():
    rng = stream(101)
    worst, n = 0.0, 500
    grid = [IsingParams(b, h) for b in (0.0, 0.5, 1.0) for h in (0.0, 0.3)]
    for i in range(n):
        N = int(rng.integers(2, 13))
        if i % 2 == 0:
            g = G.cm2(N, rng=stream(101, i))
        else:
            g = G.cm12(N, float(rng.uniform(0.05, 0.95)), rng=stream(101, i))
        d = G.decompose(g)
        for Q in grid:
            ref = brute_force_log_partition_graph(Q, g)
            worst = max(worst, abs(log_partition_graph(Q, d) / ref - 1))
    record(1, worst <= 1e-10, f"max relative error {worst:.2e} over {n} graphs x {len(grid)} parameters (tol 1e-10)")


# 2 ------------------------------------------------------------------------------------


def _rel_err(got, ref, floor=1e-13):
    return abs(got - ref) / max(abs(ref), floor / 1e-8)


def test_criterion_2_derivatives():
    worst, where = 0.0, None
    for beta, B in itertools.product((0.1, 0.3, 0.6, 1.0, 1.5), (-0.5, -0.1, 0.0, 0.2, 0.7)):
        Q = IsingParams(beta, B)
        tj = transfer_jets(Q)
        A_p, A_m = boundary_weight_jets(Q)
        checks = [
            (tj.log_lambda_plus, lambda b: mp.log(oracles.eigen(beta, b)[0]), "log lambda+"),
            (A_p, lambda b: oracles.eigen(beta, b)[2], "A+"),
            (A_m, lambda b: oracles.eigen(beta, b)[3], "A-"),
        ]
        for jet, f, name in checks:
            for order, got in ((1, jet.d1), (2, jet.d2)):
                e = _rel_err(float(got), float(oracles.richardson(f, B, order)))
                if e > worst:
                    worst, where = e, (name, order, beta, B)
        for kind, L in [(LINE, 2), (LINE, 5), (CYCLE, 1), (CYCLE, 3), (CYCLE, 8)]:
            f = lambda b: oracles.log_z(beta, b, L, kind)  # noqa: E731
            for order in (1, 2):
                e = _rel_err(d_logZ_dB(Q, L, kind, order), float(oracles.richardson(f, B, order)))
                if e > worst:
                    worst, where = e, (f"log Z {kind} {L}", order, beta, B)
    record(2, worst <= 1e-8, f"max relative error {worst:.2e} at {where} on a 5x5 grid (tol 1e-8)")


# 3 ------------------------------------------------------------------------------------


def test_criterion_3_sampler():
    Q = IsingParams(0.6, 0.2)
    n = 10**5
    tables = sampler_tables(Q, 4, 4)
    stat, dof, pvals = 0.0, 0, []
    for kind, L in [(LINE, 2), (LINE, 3), (LINE, 4), (CYCLE, 1), (CYCLE, 2), (CYCLE, 3), (CYCLE, 4)]:
        conf, prob = brute_force_probabilities(Q, L, kind)
        codes = {tuple(c): i for i, c in enumerate(conf)}
        rng = stream(303, L, kind == CYCLE)
        counts = np.zeros(len(conf))
        for _ in range(n):
            counts[codes[tuple(sample_component(Q, L, kind, rng, tables))]] += 1
        x = float(((counts - n * prob) ** 2 / (n * prob)).sum())
        stat += x
        dof += len(conf) - 1
        pvals.append(float(chi2.sf(x, len(conf) - 1)))
    p = float(chi2.sf(stat, dof))
    record(3, p > 0.01, f"pooled chi-square p={p:.3f} (dof {dof}); per-component min p={min(pvals):.3f}")


# 4 ------------------------------------------------------------------------------------


def test_criterion_4_tori_law():
    N, n = 1000, 10**4
    K = np.array([G.decompose(G.cm2(N, rng=stream(404, i))).n_tori for i in range(n)], dtype=float)
    mean, mean_se = stats.mean_se(K)
    var, var_se = stats.variance_se(K)
    zm = (mean - G.expected_tori(N)) / mean_se
    zv = (var - G.tori_variance(N)) / var_se
    record(4, abs(zm) < 4 and abs(zv) < 4, f"mean z={zm:.2f}, variance z={zv:.2f} (|z| < 4)")


# 5 ------------------------------------------------------------------------------------


def test_criterion_5_line_densities():
    N, R = 10**5, 200
    C = np.array([line_counts(G.decompose(G.cm12(N, 0.5, rng=stream(505, i))), 3) for i in range(R)]) / N
    z = []
    for j, l in enumerate((2, 3)):
        m, se = stats.mean_se(C[:, j])
        z.append((m - float(limits.p_star(0.5, l))) / se)
    ok = all(abs(v) < 3 for v in z)
    record(5, ok, f"p_2 z={z[0]:.2f}, p_3 z={z[1]:.2f} (|z| < 3; p_2* = 1/12)")


# 6 ------------------------------------------------------------------------------------


def test_criterion_6_cm2_clt():
    N = 10**4
    rq = rq_clt_experiment(ExperimentConfig("cm2", N, P, M=20000, seed=606))
    aq = aq_clt_experiment(ExperimentConfig("cm2", N, P, R=200, M=50, seed=607, threads=4))
    chi = limits.chi_cm2(P)
    r, a = rq.metrics, aq.metrics
    dev_rq, dev_aq = abs(r["variance"] / chi - 1), abs(a["variance"] / chi - 1)
    z_joint = (r["variance"] - a["variance"]) / math.hypot(r["variance_se"], a["variance_se"])
    ok = (
        r["ks_p_value"] > 0.01 and a["ks_p_value"] > 0.01
        and dev_rq < 0.05 and dev_aq < 0.05 and abs(z_joint) < 3
    )
    record(
        6, ok,
        f"KS p rq={r['ks_p_value']:.3f} aq={a['ks_p_value']:.3f}; variance/chi-1 rq={dev_rq:.2%} aq={dev_aq:.2%}; "
        f"rq-aq joint z={z_joint:.2f}",
    )


# 7 ------------------------------------------------------------------------------------


def test_criterion_7_cm12_aq(aq_cm12):
    m = aq_cm12.metrics
    lim = limits.cm12_limits(P, 0.5)
    dev = abs(m["variance"] / lim.sigma_aq2 - 1)
    ok = dev < 0.05 and m["excess_z_rb"] > 3
    record(
        7, ok,
        f"pooled variance {m['variance']:.4f} vs sigma_aq2 {lim.sigma_aq2:.4f} ({dev:.2%}); "
        f"excess over chi z={m['excess_z_rb']:.2f} (conditional-mean estimator), sampled z={m['excess_z_sampled']:.2f}",
    )


# 8 ------------------------------------------------------------------------------------


def test_criterion_8_graph_fluctuations():
    cfg = ExperimentConfig("cm12", 10**5, P, R=2000, seed=808, p=0.5, T=60, threads=4)
    m = graph_fluctuation_experiment(cfg).metrics
    ok = abs(m["z_X"]) < 3 and abs(m["z_lambda2"]) < 3
    record(
        8, ok,
        f"Var(X) z={m['z_X']:.2f} vs full form (printed-diagonal variant z={m['z_X_printed']:.1f}); "
        f"Var(Lambda2) {m['variance_lambda2']:.4f} vs 4/27 z={m['z_lambda2']:.2f}",
    )


# 9 ------------------------------------------------------------------------------------


def test_criterion_9_total_variance(aq_cm12):
    m = aq_cm12.metrics
    e1 = abs(m["total_variance_direct"] / m["total_variance_decomposed"] - 1)
    e2 = abs(m["mixture_variance_raw"] / m["mixture_variance_decomposed"] - 1)
    record(9, max(e1, e2) <= 1e-9, f"relative gaps {e1:.1e} (sums) and {e2:.1e} (exact moments), tol 1e-9")


# 10 -----------------------------------------------------------------------------------


def test_criterion_10_mcmc():
    g = G.cm2(512, rng=stream(1010))
    obs = quenched_observables(P, G.decompose(g))
    est = mcmc.estimate_moments(g, P, 60000, 5120, rng=stream(1011))
    zm = (est.mean_S - obs.mean_S) / est.mean_S_se
    zv = (est.var_S - obs.var_S) / est.var_S_se

    tri = G.MultiGraph(3, np.array([[0, 1], [1, 2], [2, 0]]), G.DegreeSequence(np.array([2, 2, 2])))
    Q = IsingParams(0.7, 0.3)
    conf = np.array([mcmc.state_spins(c, 3) for c in range(8)])
    e = Q.beta * (conf[:, 0] * conf[:, 1] + conf[:, 1] * conf[:, 2] + conf[:, 2] * conf[:, 0]) + Q.B * conf.sum(1)
    gibbs = np.exp(e) / np.exp(e).sum()
    codes = {tuple(c): i for i, c in enumerate(conf)}
    rng = stream(1012)
    _, state = mcmc.run_chain(tri, Q, 200, rng=rng)
    n = 20000
    counts = np.zeros(8)
    for _ in range(n):
        _, state = mcmc.run_chain(tri, Q, 20, rng=rng, state=state)
        counts[codes[tuple(state.spins)]] += 1
    x = float(((counts - n * gibbs) ** 2 / (n * gibbs)).sum())
    p = float(chi2.sf(x, 7))
    ok = abs(zm) < 4 and abs(zv) < 4 and p > 0.01
    record(10, ok, f"cm2 N=512 mean z={zm:.2f}, variance z={zv:.2f}; triangle chi-square p={p:.3f}")


# 11 -----------------------------------------------------------------------------------


def test_criterion_11_chi_zero_field():
    worst = 0.0
    for beta in (0.0, 0.1, 0.5, 1.0, 2.0):
        Q = IsingParams(beta, 0.0)
        ref = math.exp(2 * beta)
        worst = max(worst, abs(susceptibility_1d(Q) / ref - 1), abs(printed_susceptibility_1d(Q) / ref - 1))
    Q = IsingParams(0.5, 0.3)
    dev = printed_susceptibility_1d(Q) / susceptibility_1d(Q) - 1
    record(
        11, worst <= 1e-10,
        f"B=0 max relative error {worst:.1e} (tol 1e-10); recorded B=0.3 printed/analytic - 1 = {dev:+.3f}",
    )
