"""Exact quenched observables of one graph realization.

The partition function of a degree-{1,2} graph factorizes over its lines and
tori, so every quantity here is a sum over components, grouped by length:
the cost is O(number of distinct lengths) once the graph is decomposed.
"""

import csv
import math
from dataclasses import dataclass

import numba
import numpy as np

from .ising1d import (
    CYCLE,
    LINE,
    _sample_components,
    cycle_first_spin_prob,
    log_partition_jet,
    sampler_tables,
    transfer_jets,
)
from .jets import Jet
from .rng import as_generator

OBSERVABLE_COLUMNS = ("replica", "N", "beta", "B", "logZ", "meanS", "varS", "chiN")


@dataclass(frozen=True)
class QuenchedObservables:
    N: int
    log_Z: float
    pressure: float
    mean_S: float
    var_S: float
    chi_N: float

    @property
    def magnetization(self):
        return self.mean_S / self.N


def graph_log_partition_jet(params, decomp):
    """Field-jet of ``log Z_G`` summed over the components of ``decomp``."""
    tj = transfer_jets(params)
    total = Jet(0.0, 0.0, 0.0)
    for lengths, kind in ((decomp.line_lengths, LINE), (decomp.torus_lengths, CYCLE)):
        if lengths.size == 0:
            continue
        uniq, counts = np.unique(lengths, return_counts=True)
        j = log_partition_jet(params, uniq, kind, tj)
        total = total + Jet(
            float(np.dot(counts, j.v)),
            float(np.dot(counts, j.d1)),
            float(np.dot(counts, j.d2)),
        )
    return total


def log_partition_graph(params, decomp):
    return graph_log_partition_jet(params, decomp).v


def spin_moments(params, decomp):
    """``(E[S_N], Var(S_N))`` under the Gibbs measure of the graph."""
    j = graph_log_partition_jet(params, decomp)
    return j.d1, j.d2


def quenched_observables(params, decomp):
    j = graph_log_partition_jet(params, decomp)
    N = decomp.N
    return QuenchedObservables(N, j.v, j.v / N, j.d1, j.d2, j.d2 / N)


def scgf(params, decomp, t):
    """Scaled cumulant generating function ``(1/N) log E[exp(t S_N)]``."""
    if t == 0:
        return 0.0
    shifted = log_partition_graph(params.with_field(params.B + t), decomp)
    return (shifted - log_partition_graph(params, decomp)) / decomp.N


def line_empirical_density(decomp):
    """``{l: (number of lines with l vertices) / N}``."""
    if decomp.line_lengths.size == 0:
        return {}
    uniq, counts = np.unique(decomp.line_lengths, return_counts=True)
    return {int(l): c / decomp.N for l, c in zip(uniq, counts)}


def line_counts(decomp, T):
    """Counts of lines with ``l = 2..T`` vertices (index ``l - 2``)."""
    c = np.bincount(decomp.line_lengths, minlength=T + 1)
    return c[2 : T + 1].astype(np.int64)


# --- exact sampling -------------------------------------------------------------


class ConfigurationSampler:
    """Exact i.i.d. draws of the spins of one decomposed graph.

    Components are independent under the Gibbs measure, so each one is
    sampled on its own by forward messages and backward sampling, one uniform
    variate per site.
    """

    def __init__(self, params, decomp):
        self.params = params
        self.decomp = decomp
        self.lengths = np.concatenate([decomp.line_lengths, decomp.torus_lengths]).astype(np.int64)
        self.is_cycle = np.concatenate(
            [np.zeros(decomp.n_lines, dtype=np.bool_), np.ones(decomp.n_tori, dtype=np.bool_)]
        )
        max_line = int(decomp.line_lengths.max()) if decomp.n_lines else 2
        max_cycle = int(decomp.torus_lengths.max()) if decomp.n_tori else 1
        self.tables = sampler_tables(params, max_line, max_cycle)
        self.p_first = np.where(self.is_cycle, cycle_first_spin_prob(self.tables, self.lengths), 0.0)

    def sample(self, rng):
        """One configuration: ``(spins indexed by vertex, S_N)``."""
        N = self.decomp.N
        u = rng.random(N)
        out = np.empty(N, dtype=np.int8)
        _sample_components(
            self.lengths, self.is_cycle, self.p_first, self.tables.line_end,
            self.tables.line_cond, self.tables.cyc_cond, u, out,
        )
        if self.decomp.vertex_order is not None:
            spins = np.empty_like(out)
            spins[self.decomp.vertex_order] = out
        else:
            spins = out
        return spins, int(out.sum(dtype=np.int64))

    def sample_sums(self, M, rng, chunk_sites=1 << 22):
        """``M`` independent draws of the total spin ``S_N``."""
        N = self.decomp.N
        out = np.empty(M, dtype=np.int64)
        per = max(1, chunk_sites // N)
        done = 0
        while done < M:
            k = min(per, M - done)
            u = rng.random((k, N))
            _sample_sums_kernel(
                self.lengths, self.is_cycle, self.p_first, self.tables.line_end,
                self.tables.line_cond, self.tables.cyc_cond, u, out[done : done + k],
            )
            done += k
        return out


@numba.njit(cache=True, nogil=True)
def _sample_sums_kernel(lengths, is_cycle, p_first, line_end, line_cond, cyc_cond, u, out):
    N = u.shape[1]
    buf = np.empty(N, dtype=np.int8)
    for m in range(u.shape[0]):
        _sample_components(lengths, is_cycle, p_first, line_end, line_cond, cyc_cond, u[m], buf)
        s = 0
        for i in range(N):
            s += buf[i]
        out[m] = s


def sample_configuration(params, decomp, rng=None):
    return ConfigurationSampler(params, decomp).sample(as_generator(rng))


# --- oracle -----------------------------------------------------------------------


def brute_force_log_partition_graph(params, g):
    """``log Z_G`` by enumerating all 2**N spin configurations of the multigraph.

    Each edge contributes ``beta s_u s_v`` with multiplicity; a self-loop
    therefore contributes the constant ``beta``.
    """
    N = g.N
    if N > 20:
        raise ValueError("brute-force enumeration limited to N <= 20")
    codes = np.arange(2**N, dtype=np.int64)[:, None]
    s = (2 * ((codes >> np.arange(N, dtype=np.int64)) & 1) - 1).astype(float)
    u, v = g.edges[:, 0], g.edges[:, 1]
    e = params.beta * (s[:, u] * s[:, v]).sum(axis=1) + params.B * s.sum(axis=1)
    m = e.max()
    return float(m + math.log(np.exp(e - m).sum()))


def write_observables_csv(rows, fp):
    """Rows are mappings (or QuenchedObservables plus replica/beta/B) in the fixed column order."""
    close = False
    if not hasattr(fp, "write"):
        fp = open(fp, "w", newline="")
        close = True
    try:
        w = csv.writer(fp)
        w.writerow(OBSERVABLE_COLUMNS)
        for r in rows:
            w.writerow([r[c] for c in OBSERVABLE_COLUMNS])
    finally:
        if close:
            fp.close()


def observable_row(replica, params, obs):
    return {
        "replica": replica,
        "N": obs.N,
        "beta": params.beta,
        "B": params.B,
        "logZ": repr(obs.log_Z),
        "meanS": repr(obs.mean_S),
        "varS": repr(obs.var_S),
        "chiN": repr(obs.chi_N),
    }

