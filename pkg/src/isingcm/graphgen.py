"""Configuration-model multigraphs and their component structure.

Graphs are built by uniform pairing of half-edges (self-loops and parallel
edges are kept).  For degree sequences in {1, 2} every component is either a
line (a path whose two ends have degree 1) or a torus (a cycle; a self-loop is
a torus of length 1 and a double edge a torus of length 2).
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .rng import as_generator


class ConstructibilityError(ValueError):
    """The degree sequence cannot be realized by a perfect matching of half-edges."""


def _frozen(a, dtype=np.int64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DegreeSequence:
    degrees: np.ndarray

    def __post_init__(self):
        d = _frozen(self.degrees)
        if d.ndim != 1 or d.size == 0:
            raise ValueError("degrees must be a non-empty 1-d sequence")
        if np.any(d < 1):
            raise ValueError("all degrees must be >= 1")
        if int(d.sum()) % 2:
            raise ConstructibilityError(
                f"total degree {int(d.sum())} is odd: half-edges cannot be paired"
            )
        object.__setattr__(self, "degrees", d)

    @property
    def N(self):
        return int(self.degrees.size)

    @property
    def total_degree(self):
        return int(self.degrees.sum())


@dataclass(frozen=True, eq=False)
class MultiGraph:
    """Edge multiset on vertices ``0..N-1``; ``edges`` is an (E, 2) array."""

    N: int
    edges: np.ndarray
    degrees: DegreeSequence
    seed: int | None = None

    def __post_init__(self):
        e = _frozen(self.edges).reshape(-1, 2)
        object.__setattr__(self, "edges", e)
        if 2 * e.shape[0] != self.degrees.total_degree:
            raise ValueError("edge count does not match the degree sequence")

    def __eq__(self, other):
        if not isinstance(other, MultiGraph):
            return NotImplemented
        return (
            self.N == other.N
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.degrees.degrees, other.degrees.degrees)
        )

    def incident_counts(self):
        return np.bincount(self.edges.ravel(), minlength=self.N)


@dataclass(frozen=True, eq=False)
class ComponentDecomposition:
    """Line and torus lengths of a degree-{1,2} multigraph.

    ``vertex_order`` (optional) lists the vertices component by component,
    lines first and then tori, each in walk order; it is what lets sampled
    spins be mapped back onto vertex labels.
    """

    line_lengths: np.ndarray
    torus_lengths: np.ndarray
    N: int
    vertex_order: np.ndarray | None = field(default=None)

    def __post_init__(self):
        ll = _frozen(self.line_lengths)
        tl = _frozen(self.torus_lengths)
        if np.any(ll < 2):
            raise ValueError("line lengths must be >= 2")
        if np.any(tl < 1):
            raise ValueError("torus lengths must be >= 1")
        if int(ll.sum() + tl.sum()) != self.N:
            raise ValueError("component lengths must sum to N")
        object.__setattr__(self, "line_lengths", ll)
        object.__setattr__(self, "torus_lengths", tl)
        if self.vertex_order is not None:
            object.__setattr__(self, "vertex_order", _frozen(self.vertex_order))

    @property
    def n_lines(self):
        return int(self.line_lengths.size)

    @property
    def n_tori(self):
        return int(self.torus_lengths.size)


# --- generation ---------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _pair_kernel(owner, u):
    ell = owner.shape[0]
    pool = np.arange(ell)
    edges = np.empty((ell // 2, 2), dtype=np.int64)
    for k in range(ell // 2):
        i = 2 * k
        m = ell - i - 1
        j = i + 1 + int(u[k] * m)
        if j > ell - 1:
            j = ell - 1
        t = pool[i + 1]
        pool[i + 1] = pool[j]
        pool[j] = t
        edges[k, 0] = owner[pool[i]]
        edges[k, 1] = owner[pool[i + 1]]
    return edges


def pair_half_edges(deg, rng=None, seed=None):
    """Uniform perfect matching of the half-edges of ``deg``.

    Half-edges are laid out vertex by vertex.  At each step the half-edge at
    the front of the unpaired pool is joined to one of the remaining ones,
    chosen uniformly (an in-place partial Fisher-Yates shuffle), which gives
    every matching the same probability 1 / (l_N - 1)!!.
    """
    if not isinstance(deg, DegreeSequence):
        deg = DegreeSequence(deg)
    rng = as_generator(rng)
    owner = np.repeat(np.arange(deg.N, dtype=np.int64), deg.degrees)
    u = rng.random(deg.total_degree // 2)
    return MultiGraph(deg.N, _pair_kernel(owner, u), deg, seed)


configuration_model = pair_half_edges


def cm12_degree_counts(N, p):
    """``(n1, n2)`` for CM(1,2); an odd ``n1`` promotes one degree-1 vertex to degree 2."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    n2 = int(math.floor(p * N))
    n1 = N - n2
    if n1 % 2:
        if n1 == 0:
            raise ConstructibilityError("cannot fix parity of n1")
        n1 -= 1
        n2 += 1
    return n1, n2


def cm2(N, rng=None, seed=None):
    return pair_half_edges(DegreeSequence(np.full(N, 2)), rng, seed)


def cm12(N, p, rng=None, seed=None):
    n1, n2 = cm12_degree_counts(N, p)
    deg = np.concatenate([np.ones(n1, dtype=np.int64), np.full(n2, 2, dtype=np.int64)])
    return pair_half_edges(DegreeSequence(deg), rng, seed)


def degrees_from_pmf(pmf, N):
    """Deterministic degree sequence with counts ``round(p_k N)`` (largest remainders).

    If the total degree comes out odd, one vertex of the smallest odd degree
    present is promoted by one.
    """
    ks = np.array(sorted(pmf), dtype=np.int64)
    ps = np.array([pmf[k] for k in ks], dtype=float)
    raw = ps * N
    counts = np.floor(raw).astype(np.int64)
    short = N - int(counts.sum())
    if short:
        counts[np.argsort(-(raw - counts), kind="stable")[:short]] += 1
    deg = np.repeat(ks, counts)
    if int(deg.sum()) % 2:
        odd = np.flatnonzero(deg % 2)
        deg[odd[0]] += 1
    return DegreeSequence(deg)


# --- components -----------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _incidence(N, edges):
    inc = np.full((N, 2), -1, dtype=np.int64)
    fill = np.zeros(N, dtype=np.int64)
    for e in range(edges.shape[0]):
        for side in range(2):
            v = edges[e, side]
            if fill[v] >= 2:
                return inc, False
            inc[v, fill[v]] = e
            fill[v] += 1
    return inc, True


@numba.njit(cache=True, nogil=True)
def _other_end(edges, e, v):
    return edges[e, 1] if edges[e, 0] == v else edges[e, 0]


@numba.njit(cache=True, nogil=True)
def _walk_components(N, edges, inc):
    visited = np.zeros(N, dtype=np.bool_)
    order = np.empty(N, dtype=np.int64)
    lengths = np.empty(N, dtype=np.int64)
    is_line = np.empty(N, dtype=np.bool_)
    pos = 0
    nc = 0
    # lines: start at every unvisited degree-1 end
    for v0 in range(N):
        if visited[v0] or inc[v0, 1] != -1:
            continue
        start = pos
        v = v0
        e = inc[v0, 0]
        while True:
            visited[v] = True
            order[pos] = v
            pos += 1
            w = _other_end(edges, e, v)
            if inc[w, 1] == -1:
                visited[w] = True
                order[pos] = w
                pos += 1
                break
            e = inc[w, 1] if inc[w, 0] == e else inc[w, 0]
            v = w
        lengths[nc] = pos - start
        is_line[nc] = True
        nc += 1
    # everything left lies on a cycle
    for v0 in range(N):
        if visited[v0]:
            continue
        start = pos
        v = v0
        e = inc[v0, 0]
        while True:
            visited[v] = True
            order[pos] = v
            pos += 1
            w = _other_end(edges, e, v)
            if w == v0:
                break
            e = inc[w, 1] if inc[w, 0] == e else inc[w, 0]
            v = w
        lengths[nc] = pos - start
        is_line[nc] = False
        nc += 1
    return order, lengths[:nc], is_line[:nc]


def decompose(g):
    """Lines and tori of a multigraph whose degrees all lie in {1, 2}."""
    d = g.degrees.degrees
    if np.any((d < 1) | (d > 2)):
        raise ValueError("decompose requires every degree in {1, 2}; use component_sizes")
    inc, ok = _incidence(g.N, g.edges)
    if not ok:
        raise ValueError("edge list inconsistent with degrees in {1, 2}")
    order, lengths, is_line = _walk_components(g.N, g.edges, inc)
    return ComponentDecomposition(lengths[is_line], lengths[~is_line], g.N, order)


@numba.njit(cache=True, nogil=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@numba.njit(cache=True, nogil=True)
def _union_sizes(N, edges):
    parent = np.arange(N)
    for e in range(edges.shape[0]):
        a = _find(parent, edges[e, 0])
        b = _find(parent, edges[e, 1])
        if a != b:
            parent[a] = b
    sizes = np.zeros(N, dtype=np.int64)
    for v in range(N):
        sizes[_find(parent, v)] += 1
    return sizes


def component_sizes(g):
    """Sizes of all connected components, for any degree sequence (descending)."""
    s = _union_sizes(g.N, g.edges)
    return np.sort(s[s > 0])[::-1]


# --- closed-form component laws ---------------------------------------------------


def tori_bernoulli_params(N):
    """``q_j = 1/(2N - 2j + 1)``, j = 1..N: K^t_N of CM(2) is a sum of independent Bernoulli(q_j)."""
    j = np.arange(1, N + 1)
    return 1.0 / (2 * N - 2 * j + 1)


def expected_tori(N):
    if N < 1:
        raise ValueError("N must be >= 1")
    return float(tori_bernoulli_params(N).sum())


def tori_variance(N):
    q = tori_bernoulli_params(N)
    return float((q * (1 - q)).sum())


def line_length_pmf(n1, n2, l):
    """Finite-N probability that the line through a given degree-1 vertex has ``l`` vertices."""
    ell = n1 + 2 * n2
    if l < 2 or n1 < 2 or l - 2 > n2:
        return 0.0
    prob = 1.0
    for i in range(l - 2):
        prob *= (2 * n2 - 2 * i) / (ell - 1 - 2 * i)
    return prob * (n1 - 1) / (ell - 1 - 2 * (l - 2))


def line_length_pmf_conditional(n1, n2, l, j):
    """P(second line has ``j`` vertices | first line has ``l``).

    Removing the first line leaves a configuration model with ``n1 - 2``
    degree-1 and ``n2 - (l - 2)`` degree-2 vertices.
    """
    if l < 2 or l - 2 > n2 or n1 < 4:
        return 0.0
    return line_length_pmf(n1 - 2, n2 - (l - 2), j)


@dataclass(frozen=True)
class DegreeModel:
    """Limiting degree law ``P(D = k) = pmf[k]``."""

    pmf: dict

    def __post_init__(self):
        if not self.pmf:
            raise ValueError("empty pmf")
        if any(int(k) != k or k < 1 for k in self.pmf):
            raise ValueError("degrees must be integers >= 1")
        if any(v < 0 for v in self.pmf.values()):
            raise ValueError("probabilities must be non-negative")
        if abs(sum(self.pmf.values()) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")

    @property
    def mean(self):
        return sum(k * p for k, p in self.pmf.items())

    def size_biased(self):
        m = self.mean
        return {k - 1: k * p / m for k, p in self.pmf.items() if p > 0}

    @property
    def nu(self):
        return sum(k * (k - 1) * p for k, p in self.pmf.items()) / self.mean


@dataclass(frozen=True)
class DegreeModelStats:
    mean: float
    nu: float
    beta_c: float


def degree_model_stats(model):
    if not isinstance(model, DegreeModel):
        model = DegreeModel(dict(model))
    nu = model.nu
    beta_c = math.atanh(1.0 / nu) if nu > 1 else math.inf
    return DegreeModelStats(model.mean, nu, beta_c)


# --- serialization ------------------------------------------------------------------


def write_graph(g, fp):
    """Header ``N l_N seed`` then one ``u v`` edge per line."""
    seed = "none" if g.seed is None else str(g.seed)
    lines = [f"{g.N} {g.degrees.total_degree} {seed}"]
    lines.extend(f"{u} {v}" for u, v in g.edges)
    text = "\n".join(lines) + "\n"
    if hasattr(fp, "write"):
        fp.write(text)
    else:
        with open(fp, "w") as f:
            f.write(text)


def read_graph(fp):
    if hasattr(fp, "read"):
        text = fp.read()
    else:
        with open(fp) as f:
            text = f.read()
    rows = text.strip().splitlines()
    try:
        N_s, ell_s, seed_s = rows[0].split()
        N, ell = int(N_s), int(ell_s)
        seed = None if seed_s == "none" else int(seed_s)
        edges = np.array([[int(x) for x in r.split()] for r in rows[1:]], dtype=np.int64).reshape(-1, 2)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"malformed graph file: {exc}") from None
    if edges.size and (edges.min() < 0 or edges.max() >= N):
        raise ValueError("edge endpoint out of range")
    degrees = np.bincount(edges.ravel(), minlength=N)
    if int(degrees.sum()) != ell:
        raise ValueError("header total degree does not match the edge list")
    return MultiGraph(N, edges, DegreeSequence(degrees), seed)
