"""Random-scan heat-bath (Glauber) dynamics for Ising on arbitrary multigraphs.

Self-loops add the spin-independent constant ``beta`` to the energy and are
left out of the local fields; parallel edges count with multiplicity.
"""

import csv
import math
from dataclasses import dataclass

import numba
import numpy as np

from .rng import as_generator

MIN_BATCHES = 20
_CHUNK_UPDATES = 1 << 22


def neighbor_lists(graph):
    """CSR adjacency ``(indptr, indices)`` with multiplicity and without self-loops."""
    e = graph.edges
    e = e[e[:, 0] != e[:, 1]]
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    order = np.argsort(src, kind="stable")
    indptr = np.zeros(graph.N + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=graph.N), out=indptr[1:])
    return indptr, dst[order].astype(np.int64)


class SpinState:
    """Spins, cached local fields and the running total ``S_N``."""

    def __init__(self, graph, spins=None, rng=None):
        self.graph = graph
        self.indptr, self.indices = neighbor_lists(graph)
        if spins is None:
            spins = np.where(as_generator(rng).random(graph.N) < 0.5, 1, -1)
        self.spins = np.asarray(spins, dtype=np.int8).copy()
        if self.spins.shape != (graph.N,) or not np.all(np.abs(self.spins) == 1):
            raise ValueError("spins must be a length-N vector of +-1")
        self.fields = self.recompute_fields()
        self.S = int(self.spins.sum(dtype=np.int64))

    def recompute_fields(self):
        owner = np.repeat(np.arange(self.graph.N), np.diff(self.indptr))
        w = self.spins[self.indices].astype(float)
        return np.bincount(owner, weights=w, minlength=self.graph.N).astype(np.int64)

    def check(self):
        """Raise if the cached fields or total disagree with a recomputation."""
        if not np.array_equal(self.fields, self.recompute_fields()):
            raise ValueError("cached local fields are inconsistent with the spins")
        if self.S != int(self.spins.sum(dtype=np.int64)):
            raise ValueError("cached S_N is inconsistent with the spins")


def heat_bath_probability(beta, B, m):
    """Probability that the updated spin is +1 given the neighbor sum ``m``."""
    return 1.0 / (1.0 + np.exp(-2.0 * (beta * np.asarray(m) + B)))


@numba.njit(cache=True, nogil=True)
def _updates(spins, fields, indptr, indices, S, beta, B, sites, u, N, trace, t0):
    # runs len(sites) single-site updates; records S after each completed sweep
    for k in range(sites.shape[0]):
        i = sites[k]
        h = beta * fields[i] + B
        new = 1 if u[k] * (1.0 + math.exp(-2.0 * h)) < 1.0 else -1
        old = spins[i]
        if new != old:
            spins[i] = new
            d = 2 * new
            for a in range(indptr[i], indptr[i + 1]):
                fields[indices[a]] += d
            S += d
        done = t0 + k + 1
        if done % N == 0 and trace.shape[0] > 0:
            trace[done // N - 1] = S
    return S


def _run(state, params, n_sweeps, rng, trace=None):
    N = state.graph.N
    total = n_sweeps * N
    rec = trace if trace is not None else np.empty(0, dtype=np.int64)
    done = 0
    while done < total:
        k = min(_CHUNK_UPDATES, total - done)
        sites = rng.integers(0, N, size=k)
        u = rng.random(k)
        state.S = _updates(
            state.spins, state.fields, state.indptr, state.indices, state.S,
            params.beta, params.B, sites, u, N, rec, done,
        )
        done += k


def heat_bath_sweep(state, params, graph=None, rng=None, debug=False):
    """``N`` random-site heat-bath updates, in place; returns ``state``."""
    if graph is not None and graph is not state.graph:
        raise ValueError("state was built for a different graph")
    if debug:
        state.check()
    _run(state, params, 1, as_generator(rng))
    if debug:
        state.check()
    return state


@dataclass(frozen=True)
class MomentEstimate:
    mean_S: float
    mean_S_se: float
    var_S: float
    var_S_se: float
    n_batches: int
    sweeps: int
    burn_in: int


def run_chain(graph, params, sweeps, rng=None, state=None):
    """``S_N`` after each of ``sweeps`` sweeps."""
    rng = as_generator(rng)
    if state is None:
        state = SpinState(graph, rng=rng)
    trace = np.empty(sweeps, dtype=np.int64)
    _run(state, params, sweeps, rng, trace)
    return trace, state


def batch_means(trace, n_batches=MIN_BATCHES):
    """Mean and variance of ``trace`` with batch-means standard errors."""
    x = np.asarray(trace, dtype=float)
    if n_batches < MIN_BATCHES:
        raise ValueError(f"need at least {MIN_BATCHES} batches")
    size = x.size // n_batches
    if size < 1:
        raise ValueError("not enough samples for the requested batches")
    x = x[x.size - size * n_batches :]
    mean = x.mean()
    b = x.reshape(n_batches, size)
    bm = b.mean(axis=1)
    bv = np.mean((b - mean) ** 2, axis=1)
    var = float(np.mean((x - mean) ** 2))
    se = lambda v: float(v.std(ddof=1) / math.sqrt(n_batches))  # noqa: E731
    return float(mean), se(bm), var, se(bv)


def estimate_moments(graph, params, sweeps, burn_in, rng=None, n_batches=MIN_BATCHES, trace_out=None):
    """Batch-means estimates of ``E[S_N]`` and ``Var(S_N)`` from one chain.

    ``sweeps`` counts all sweeps including the ``burn_in`` ones, and one
    value of ``S_N`` is recorded per sweep.
    """
    if burn_in < 0 or sweeps <= burn_in:
        raise ValueError("need sweeps > burn_in >= 0")
    if sweeps - burn_in < n_batches:
        raise ValueError(f"need at least {n_batches} recorded sweeps after burn-in")
    trace, _ = run_chain(graph, params, sweeps, rng)
    if trace_out is not None:
        write_trace(trace, trace_out)
    m, mse, v, vse = batch_means(trace[burn_in:], n_batches)
    return MomentEstimate(m, mse, v, vse, n_batches, sweeps, burn_in)


def sample_sums(graph, params, M, thin=10, burn_in=100, rng=None):
    """``M`` thinned chain values of ``S_N`` (correlated, unlike the exact sampler)."""
    trace, _ = run_chain(graph, params, burn_in + M * thin, rng)
    return trace[burn_in + thin - 1 :: thin][:M]


def write_trace(trace, fp):
    close = False
    if not hasattr(fp, "write"):
        fp = open(fp, "w", newline="")
        close = True
    try:
        w = csv.writer(fp)
        w.writerow(["sweep", "S_N"])
        for t, s in enumerate(trace, start=1):
            w.writerow([t, int(s)])
    finally:
        if close:
            fp.close()


# --- small-graph helpers ---------------------------------------------------------


def state_spins(code, N):
    return np.where((int(code) >> np.arange(N)) & 1, 1, -1)


def transition_matrix(graph, params):
    """Random-scan single-update kernel over all ``2**N`` states (small graphs only)."""
    N = graph.N
    if N > 12:
        raise ValueError("transition matrix limited to N <= 12")
    indptr, indices = neighbor_lists(graph)
    n = 2**N
    P = np.zeros((n, n))
    for c in range(n):
        s = state_spins(c, N)
        for i in range(N):
            m = int(s[indices[indptr[i] : indptr[i + 1]]].sum())
            p_up = float(heat_bath_probability(params.beta, params.B, m))
            up = c | (1 << i)
            down = c & ~(1 << i)
            P[c, up] += p_up / N
            P[c, down] += (1 - p_up) / N
    return P
