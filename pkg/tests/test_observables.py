import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isingcm import graphgen as G
from isingcm import observables as O
from isingcm.ising1d import IsingParams
from isingcm.rng import stream


@settings(max_examples=40, deadline=None)
@given(
    st.integers(2, 11),
    st.floats(0.0, 1.0),
    st.sampled_from([0.0, 0.5, 1.0]),
    st.sampled_from([0.0, 0.3]),
    st.integers(0, 2**32),
)
def test_graph_partition_matches_enumeration(N, p, beta, B, seed):
    P = IsingParams(beta, B)
    g = G.cm12(N, p, rng=stream(seed))
    exact = O.log_partition_graph(P, G.decompose(g))
    assert exact == pytest.approx(O.brute_force_log_partition_graph(P, g), rel=1e-10)


def test_brute_force_limit():
    with pytest.raises(ValueError):
        O.brute_force_log_partition_graph(IsingParams(0.1, 0.0), G.cm2(21, rng=stream(0)))


def test_quenched_observables_consistent():
    P = IsingParams(0.5, 0.2)
    d = G.decompose(G.cm12(5000, 0.5, rng=stream(1)))
    obs = O.quenched_observables(P, d)
    m, v = O.spin_moments(P, d)
    assert obs.mean_S == m and obs.var_S == v
    assert obs.chi_N == pytest.approx(v / 5000)
    assert obs.pressure == pytest.approx(obs.log_Z / 5000)
    assert obs.magnetization == pytest.approx(m / 5000)


def test_scgf_derivative_is_magnetization():
    P = IsingParams(0.7, -0.1)
    d = G.decompose(G.cm12(400, 0.3, rng=stream(2)))
    h = 1e-5
    fd = (O.scgf(P, d, h) - O.scgf(P, d, -h)) / (2 * h)
    assert fd == pytest.approx(O.quenched_observables(P, d).magnetization, rel=1e-7)
    assert O.scgf(P, d, 0.0) == 0.0


def test_line_counts_and_density():
    d = G.ComponentDecomposition([2, 2, 3, 5], [1, 4], 17)
    assert O.line_counts(d, 4).tolist() == [2, 1, 0]
    dens = O.line_empirical_density(d)
    assert dens == pytest.approx({2: 2 / 17, 3: 1 / 17, 5: 1 / 17})
    assert O.line_empirical_density(G.ComponentDecomposition([], [3], 3)) == {}


def test_sampler_matches_vertex_marginals():
    # exact per-vertex magnetizations by enumeration on a small graph
    P = IsingParams(0.6, 0.25)
    g = G.cm12(8, 0.5, rng=stream(4))
    d = G.decompose(g)
    s = np.array([[1 if (c >> i) & 1 else -1 for i in range(8)] for c in range(256)])
    e = P.beta * (s[:, g.edges[:, 0]] * s[:, g.edges[:, 1]]).sum(axis=1) + P.B * s.sum(axis=1)
    w = np.exp(e - e.max())
    w /= w.sum()
    exact = w @ s
    sampler = O.ConfigurationSampler(P, d)
    rng = stream(5)
    n = 40000
    acc = np.zeros(8)
    for _ in range(n):
        spins, S = sampler.sample(rng)
        assert S == spins.sum()
        acc += spins
    se = np.sqrt((1 - exact**2) / n)
    assert np.all(np.abs(acc / n - exact) < 4.5 * se)


def test_sample_sums_moments():
    P = IsingParams(0.5, 0.2)
    d = G.decompose(G.cm12(2000, 0.5, rng=stream(6)))
    obs = O.quenched_observables(P, d)
    S = O.ConfigurationSampler(P, d).sample_sums(20000, stream(7), chunk_sites=1 << 16)
    assert abs(S.mean() - obs.mean_S) < 4 * math.sqrt(obs.var_S / S.size)
    assert abs(S.var() / obs.var_S - 1) < 4 * math.sqrt(2 / S.size) * 1.2
    assert np.all((S - 2000) % 2 == 0)


def test_sample_sums_deterministic():
    P = IsingParams(0.5, 0.2)
    d = G.decompose(G.cm2(500, rng=stream(8)))
    s = O.ConfigurationSampler(P, d)
    assert np.array_equal(s.sample_sums(100, stream(9)), s.sample_sums(100, stream(9)))


def test_observables_csv():
    P = IsingParams(0.5, 0.2)
    obs = O.quenched_observables(P, G.decompose(G.cm2(100, rng=stream(1))))
    buf = io.StringIO()
    O.write_observables_csv([O.observable_row(0, P, obs)], buf)
    head, row = buf.getvalue().strip().splitlines()
    assert head.split(",") == list(O.OBSERVABLE_COLUMNS)
    assert float(row.split(",")[4]) == obs.log_Z
