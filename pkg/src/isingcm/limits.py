"""Thermodynamic limits and CLT variances for CM(2) and CM(1,2).

For CM(1,2) with a fraction ``p`` of degree-2 vertices the line lengths have
the limiting density ``p_l* = q**(l-2) (1-q) (1-p)/2`` with ``q = 2p/(1+p)``
and each line of length ``l`` adds ``f_l = log(A_+ + A_- r**l)`` to the
pressure.  Writing ``f_l = log A_+ + log(1 + a r**l)``, the ``log A_+`` part
sums in closed form (``sum_l p_l* = (1-p)/2``) and only the geometrically
decaying correction is truncated at ``l = T``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import jets
from .ising1d import transfer_jets

TAIL_TOL = 1e-10
_MAX_T = 20000


def _check_p(p):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")


def pressure_cm2(params):
    return float(transfer_jets(params).log_lambda_plus.v)


def magnetization_cm2(params):
    return float(transfer_jets(params).log_lambda_plus.d1)


def chi_cm2(params):
    return float(transfer_jets(params).log_lambda_plus.d2)


def alpha_of(p):
    """``alpha = 2 n2 / n1`` in the limit, i.e. ``2p / (1 - p)``."""
    return 2.0 * p / (1.0 - p)


def p_star(p, l):
    """Limiting number of lines with ``l`` vertices per vertex."""
    _check_p(p)
    l = np.asarray(l)
    q = 2.0 * p / (1.0 + p)
    out = q ** (l - 2.0) * ((1.0 - p) / (1.0 + p)) * ((1.0 - p) / 2.0)
    out = np.where(l >= 2, out, 0.0)
    return float(out) if out.ndim == 0 else out


def _line_correction(tj, l):
    """Jet of ``log(1 + a r**l)`` for an array of line lengths."""
    return jets.log1p(tj.w * tj.r.ipow(np.asarray(l) - 1))


def gamma_l(params, l):
    """Field derivative of the per-line correction ``log(1 + a r**l)``."""
    g = _line_correction(transfer_jets(params), l).d1
    return float(g) if np.ndim(g) == 0 else np.asarray(g)


def covariance_H(alpha, r, t):
    """Limit covariance of the standardized counts of components of sizes ``r`` and ``t``."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(r < 2) or np.any(t < 2):
        raise ValueError("sizes must be >= 2")
    q = alpha / (1 + alpha)
    off = -(q ** (r + t - 4)) / (1 + alpha) ** 2 * (
        1 + (r - 2 - alpha) * (t - 2 - alpha) / (alpha * (1 + alpha))
    )
    diag = np.where(r == t, q ** (r - 2) / (1 + alpha), 0.0)
    out = off + diag
    return float(out) if out.ndim == 0 else out


def covariance_matrix(alpha, T):
    """``H(alpha)`` for sizes ``2..T``, shape ``(T-1, T-1)``."""
    if T < 2:
        raise ValueError("T must be >= 2")
    l = np.arange(2, T + 1)
    return covariance_H(alpha, l[:, None], l[None, :])


@dataclass(frozen=True)
class Cm12Limits:
    p: float
    alpha: float
    pressure: float
    magnetization: float
    chi: float
    sigma_G2: float
    sigma_aq2: float
    T: int
    tail_bound: float


def _extended(T):
    return 2 * T + 200


def _line_series(params, p, T):
    """Jet (pressure, magnetization, chi) and per-derivative omitted-term bounds."""
    tj = transfer_jets(params)
    T_ext = _extended(T)
    l = np.arange(2, T_ext + 1)
    w = p_star(p, l)
    corr = _line_correction(tj, l)
    head = l <= T
    lead = tj.log_lambda_plus + tj.log_A_plus * ((1.0 - p) / 2.0)
    value = [
        lead.v + np.dot(w[head], corr.v[head]),
        lead.d1 + np.dot(w[head], corr.d1[head]),
        lead.d2 + np.dot(w[head], corr.d2[head]),
    ]
    tails = []
    for comp in (corr.v, corr.d1, corr.d2):
        omitted = np.abs(w[~head] * comp[~head])
        tails.append(float(omitted.sum() + _geometric_remainder(omitted)))
    return [float(x) for x in value], tails


def _geometric_remainder(terms):
    # bound on terms beyond the extended range, from the decay ratio of the last two
    if terms.size < 2 or terms[-1] == 0:
        return 0.0
    rho = terms[-1] / terms[-2] if terms[-2] > 0 else 1.0
    if rho >= 1:
        return math.inf
    return float(terms[-1] * rho / (1 - rho))


def _sigma_G2_with_tail(params, p, T):
    if p in (0.0, 1.0):
        return 0.0, 0.0
    alpha = alpha_of(p)
    T_ext = _extended(T)
    g = gamma_l(params, np.arange(2, T_ext + 1))
    H = covariance_matrix(alpha, T_ext)
    n = T - 1
    value = 0.5 * (1 - p) * float(g[:n] @ H[:n, :n] @ g[:n])
    ag, aH = np.abs(g), np.abs(H)
    omitted = 0.5 * (1 - p) * (float(ag @ aH @ ag) - float(ag[:n] @ aH[:n, :n] @ ag[:n]))
    rem = _geometric_remainder(np.abs(g[-3:]) * ag.sum())
    return value, omitted + rem


def choose_truncation(params, p, tol=TAIL_TOL):
    """Smallest T on a geometric grid whose reported tail bound is below ``tol``."""
    _check_p(p)
    T = 16
    while T < _MAX_T:
        if _tail(params, p, T) < tol:
            return T
        T = int(T * 1.5)
    return _MAX_T


def _tail(params, p, T):
    _, tails = _line_series(params, p, T)
    _, sg_tail = _sigma_G2_with_tail(params, p, T)
    return max(max(tails), sg_tail)


def _resolve_T(params, p, T):
    if T is None:
        return choose_truncation(params, p)
    if T < 2:
        raise ValueError("T must be >= 2")
    return int(T)


def pressure_cm12(params, p, T=None):
    _check_p(p)
    T = _resolve_T(params, p, T)
    return _line_series(params, p, T)[0][0]


def magnetization_cm12(params, p, T=None):
    _check_p(p)
    T = _resolve_T(params, p, T)
    return _line_series(params, p, T)[0][1]


def chi_cm12(params, p, T=None):
    _check_p(p)
    T = _resolve_T(params, p, T)
    return _line_series(params, p, T)[0][2]


def sigma_G2(params, p, T=None):
    """Graph-fluctuation variance ``((1-p)/2) sum_{l,j} gamma_l gamma_j H_lj(alpha)``."""
    _check_p(p)
    T = _resolve_T(params, p, T)
    return _sigma_G2_with_tail(params, p, T)[0]


def sigma_aq2(params, p, T=None):
    return chi_cm12(params, p, T) + sigma_G2(params, p, T)


def sigma_G2_printed(params, p, T=None):
    """Variant that adds the off-diagonal kernel once more on the diagonal ``l = j``.

    Only used to quantify the discrepancy against :func:`sigma_G2`.
    """
    _check_p(p)
    T = _resolve_T(params, p, T)
    if p in (0.0, 1.0):
        return 0.0
    alpha = alpha_of(p)
    l = np.arange(2, T + 1)
    g = gamma_l(params, l)
    H = covariance_matrix(alpha, T)
    return 0.5 * (1 - p) * float(g @ H @ g + np.dot(g * g, _off_kernel_diag(alpha, l)))


def _off_kernel_diag(alpha, l):
    l = l.astype(float)
    return -((alpha / (1 + alpha)) ** (2 * l - 4)) / (1 + alpha) ** 2 * (
        1 + (l - 2 - alpha) ** 2 / (alpha * (1 + alpha))
    )


def cm12_limits(params, p, T=None):
    _check_p(p)
    T = _resolve_T(params, p, T)
    (press, mag, chi), tails = _line_series(params, p, T)
    sg, sg_tail = _sigma_G2_with_tail(params, p, T)
    return Cm12Limits(
        p=p,
        alpha=alpha_of(p) if p < 1 else math.inf,
        pressure=press,
        magnetization=mag,
        chi=chi,
        sigma_G2=sg,
        sigma_aq2=chi + sg,
        T=T,
        tail_bound=max(max(tails), sg_tail),
    )
