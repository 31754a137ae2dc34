"""Exact one-dimensional Ising chains: transfer-matrix spectrum, log-partition
functions for cycles (periodic) and lines (free ends), their field
derivatives, and exact sampling of a single component.

Everything is carried in the log domain.  With ``r = lambda_-/lambda_+`` the
two boundary conditions read

    log Z_cycle(L) = L log lambda_+ + log(1 + r**L)
    log Z_line(L)  = L log lambda_+ + log(A_+ + A_- r**L)

so ``L`` can be of order 1e6 or more without overflow.
"""

import math
from dataclasses import dataclass

import numba
import numpy as np

from . import jets
from .jets import Jet

CYCLE = "cycle"
LINE = "line"
KINDS = (CYCLE, LINE)


@dataclass(frozen=True)
class IsingParams:
    """Inverse temperature ``beta >= 0`` and uniform external field ``B``."""

    beta: float
    B: float

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta!r}")
        if not math.isfinite(self.B):
            raise ValueError(f"B must be finite, got {self.B!r}")

    def with_field(self, B):
        return IsingParams(self.beta, B)


@dataclass(frozen=True)
class Spectrum:
    lambda_plus: float
    lambda_minus: float
    r: float
    A_plus: float
    A_minus: float
    a: float


@dataclass(frozen=True)
class TransferJets:
    """Field-jets (value, d/dB, d2/dB2) of the transfer-matrix building blocks.

    ``w`` is ``c_-/c_+`` where ``c_pm = (v . v_pm)**2``; it satisfies
    ``A_- r**L / A_+ = w r**(L-1)`` and stays finite at ``beta = 0`` where
    ``lambda_-`` vanishes.
    """

    log_lambda_plus: Jet
    r: Jet
    log_A_plus: Jet
    w: Jet


def transfer_jets(params):
    beta = params.beta
    e2 = math.exp(-2.0 * beta)
    e4 = e2 * e2
    one_minus_e4 = -math.expm1(-4.0 * beta)
    one_minus_e2_sq = math.expm1(-2.0 * beta) ** 2

    b = Jet.variable(float(params.B))
    sh = jets.sinh(b)
    ch = jets.cosh(b)
    sh2 = sh * sh
    s = jets.sqrt(sh2 + e4)
    ch_plus_s = ch + s

    log_lam = jets.log(ch_plus_s) + beta
    # lambda_- = e^beta (cosh B - s), rewritten without cancellation
    r = one_minus_e4 / (ch_plus_s * ch_plus_s)
    # c_- = (lambda_+ |v|^2 - v.Dv) / (lambda_+ - lambda_-), cancellation-free form
    g = sh2 * one_minus_e2_sq / (s * ch + sh2 + e2)
    c_minus = g / s
    c_plus = 2.0 * ch - c_minus
    log_A_plus = jets.log(c_plus) - log_lam
    return TransferJets(log_lam, r, log_A_plus, c_minus / c_plus)


def spectrum(params):
    tj = transfer_jets(params)
    lam_p = math.exp(tj.log_lambda_plus.v)
    r = float(tj.r.v)
    lam_m = r * lam_p
    A_p = math.exp(tj.log_A_plus.v)
    # A_- = w A_+ / r; at beta = 0 both w and r vanish and A_- -> 0
    A_m = float(tj.w.v) * A_p / r if r > 0 else 0.0
    return Spectrum(lam_p, lam_m, r, A_p, A_m, A_m / A_p)


def boundary_weight_jets(params):
    """Field-jets of ``(A_+, A_-)``; needs ``beta > 0`` (``A_-`` is ``0/0`` at ``beta = 0``)."""
    if params.beta <= 0:
        raise ValueError("A_- jets need beta > 0")
    tj = transfer_jets(params)
    A_p = jets.exp(tj.log_A_plus)
    return A_p, tj.w * A_p / tj.r


def _check_lengths(L, kind):
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    L = np.asarray(L)
    if not np.issubdtype(L.dtype, np.integer):
        raise TypeError("component lengths must be integers")
    lo = 1 if kind == CYCLE else 2
    if np.any(L < lo):
        raise ValueError(f"{kind} length must be >= {lo}")
    return L


def log_partition_jet(params, L, kind, tj=None):
    """Jet in ``B`` of ``log Z`` for components of length(s) ``L``."""
    L = _check_lengths(L, kind)
    if tj is None:
        tj = transfer_jets(params)
    bulk = tj.log_lambda_plus * L.astype(float)
    if kind == CYCLE:
        return bulk + jets.log1p(tj.r.ipow(L))
    return bulk + tj.log_A_plus + jets.log1p(tj.w * tj.r.ipow(L - 1))


def log_partition_cycle(params, L):
    return float(log_partition_jet(params, int(L), CYCLE).v)


def log_partition_line(params, L):
    return float(log_partition_jet(params, int(L), LINE).v)


def d_logZ_dB(params, L, kind, order):
    """First or second field derivative of ``log Z`` for one component.

    Order 1 is the mean of the component's spin sum, order 2 its variance.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    jet = log_partition_jet(params, int(L), kind)
    return float(jet.d1 if order == 1 else jet.d2)


def pressure_1d(params):
    return float(transfer_jets(params).log_lambda_plus.v)


def magnetization_1d(params):
    return float(transfer_jets(params).log_lambda_plus.d1)


def susceptibility_1d(params):
    return float(transfer_jets(params).log_lambda_plus.d2)


def printed_susceptibility_1d(params):
    """The closed form cosh(B) e^{-4b} / (sinh(B) + e^{-4b})^{3/2} as printed in
    the source derivation.  Agrees with :func:`susceptibility_1d` only at B = 0;
    kept for the discrepancy report, never used as ground truth."""
    e4 = math.exp(-4.0 * params.beta)
    base = math.sinh(params.B) + e4
    if base <= 0:
        return math.nan
    return math.cosh(params.B) * e4 / base**1.5


def _configurations(L):
    codes = np.arange(2**L, dtype=np.int64)[:, None]
    bits = (codes >> np.arange(L, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int8)


def _energies(params, spins, kind):
    s = spins.astype(float)
    bonds = (s[:, :-1] * s[:, 1:]).sum(axis=1)
    if kind == CYCLE:
        bonds = bonds + s[:, -1] * s[:, 0]
    return params.beta * bonds + params.B * s.sum(axis=1)


def brute_force_log_partition(params, L, kind):
    """log Z by summation over all 2**L configurations (oracle, L <= 20)."""
    _check_lengths(int(L), kind)
    if L > 20:
        raise ValueError("brute-force enumeration limited to L <= 20")
    e = _energies(params, _configurations(L), kind)
    m = e.max()
    return float(m + np.log(np.exp(e - m).sum()))


def brute_force_partition(params, L, kind):
    return math.exp(brute_force_log_partition(params, L, kind))


def brute_force_probabilities(params, L, kind):
    """All 2**L configurations (rows of +-1) and their Gibbs probabilities."""
    _check_lengths(int(L), kind)
    if L > 20:
        raise ValueError("brute-force enumeration limited to L <= 20")
    conf = _configurations(L)
    e = _energies(params, conf, kind)
    w = np.exp(e - e.max())
    return conf, w / w.sum()


# --- exact sampling ---------------------------------------------------------


@dataclass(frozen=True)
class SamplerTables:
    """Backward-sampling conditionals shared by all components of one (beta, B).

    ``line_end[i]`` is P(sigma_{i+1} = +1) for the last site of a line with
    ``i+1`` vertices, and ``line_cond[i, k]`` is P(sigma_{i+1} = +1 | next spin
    = +1 (k=0) / -1 (k=1)).  ``cyc_cond[c]`` holds the same conditionals for a
    cycle whose first spin is pinned to +1 (c=0) or -1 (c=1).  ``u`` is the
    squared first coordinate of the leading eigenvector of the transfer matrix.
    """

    beta: float
    B: float
    line_end: np.ndarray
    line_cond: np.ndarray
    cyc_cond: np.ndarray
    r: float
    u: float


@numba.njit(cache=True, nogil=True)
def _forward_messages(beta, B, start_plus, start_minus, n):
    # normalized forward messages: P(+) of the message arriving at each site
    out = np.empty(n)
    ep, em = math.exp(beta), math.exp(-beta)
    hp, hm = math.exp(B), math.exp(-B)
    tot = start_plus + start_minus
    a_p, a_m = start_plus / tot, start_minus / tot
    out[0] = a_p
    for i in range(1, n):
        n_p = hp * (a_p * ep + a_m * em)
        n_m = hm * (a_p * em + a_m * ep)
        tot = n_p + n_m
        a_p, a_m = n_p / tot, n_m / tot
        out[i] = a_p
    return out


def _conditionals(beta, fwd):
    # P(sigma_i = +1 | sigma_{i+1} = s) for s = +1, -1
    ep, em = math.exp(beta), math.exp(-beta)
    out = np.empty((fwd.size, 2))
    out[:, 0] = fwd * ep / (fwd * ep + (1.0 - fwd) * em)
    out[:, 1] = fwd * em / (fwd * em + (1.0 - fwd) * ep)
    return out


def sampler_tables(params, max_line=2, max_cycle=1):
    beta, B = params.beta, params.B
    e2 = math.exp(-2.0 * beta)
    e4 = e2 * e2
    sh = math.sinh(B)
    s = math.sqrt(sh * sh + e4)
    s_minus_sh = e4 / (s + sh) if sh >= 0 else s - sh
    # leading eigenvector of D is proportional to (e^-beta, e^beta (s - sinh B))
    u = e2 / (e2 + math.exp(2.0 * beta) * s_minus_sh**2)
    r = float(transfer_jets(params).r.v)
    line_fwd = _forward_messages(beta, B, math.exp(B), math.exp(-B), max(max_line, 1))
    n = max(max_cycle, 1)
    cyc = np.stack(
        [
            _conditionals(beta, _forward_messages(beta, B, 1.0, 0.0, n)),
            _conditionals(beta, _forward_messages(beta, B, 0.0, 1.0, n)),
        ]
    )
    return SamplerTables(beta, B, line_fwd, _conditionals(beta, line_fwd), cyc, r, u)


@numba.njit(cache=True, nogil=True)
def _sample_line(L, line_end, line_cond, u, out):
    s = 1 if u[L - 1] < line_end[L - 1] else -1
    out[L - 1] = s
    for i in range(L - 2, -1, -1):
        s = 1 if u[i] < line_cond[i, 0 if s == 1 else 1] else -1
        out[i] = s


@numba.njit(cache=True, nogil=True)
def _sample_cycle(L, p_first, cyc_cond, u, out):
    first = 1 if u[0] < p_first else -1
    out[0] = first
    if L == 1:
        return
    c = 0 if first == 1 else 1
    # the last spin closes the loop onto the first
    s = 1 if u[L - 1] < cyc_cond[c, L - 1, c] else -1
    out[L - 1] = s
    for i in range(L - 2, 0, -1):
        s = 1 if u[i] < cyc_cond[c, i, 0 if s == 1 else 1] else -1
        out[i] = s


@numba.njit(cache=True, nogil=True)
def _sample_components(lengths, is_cycle, p_first, line_end, line_cond, cyc_cond, u, out):
    pos = 0
    for k in range(lengths.shape[0]):
        L = lengths[k]
        if is_cycle[k]:
            _sample_cycle(L, p_first[k], cyc_cond, u[pos : pos + L], out[pos : pos + L])
        else:
            _sample_line(L, line_end, line_cond, u[pos : pos + L], out[pos : pos + L])
        pos += L


def cycle_first_spin_prob(tables, L):
    """P(sigma_1 = +1) on a cycle of length L: the normalized diagonal of D**L."""
    L = np.asarray(L)
    with np.errstate(under="ignore"):
        rl = tables.r ** L.astype(float)
    return (tables.u + rl * (1.0 - tables.u)) / (1.0 + rl)


def sample_component(params, L, kind, rng, tables=None):
    """One exact draw of the spins of a single line or cycle of length ``L``."""
    L = int(_check_lengths(int(L), kind))
    if tables is None or tables.line_end.size < L or tables.cyc_cond.shape[1] < L:
        tables = sampler_tables(params, L, L)
    u = rng.random(L)
    out = np.empty(L, dtype=np.int8)
    if kind == LINE:
        _sample_line(L, tables.line_end, tables.line_cond, u, out)
    else:
        p1 = float(cycle_first_spin_prob(tables, L))
        _sample_cycle(L, p1, tables.cyc_cond, u, out)
    return out
