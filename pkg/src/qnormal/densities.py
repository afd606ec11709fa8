"""One-dimensional density and generating-function evaluations.

The density family lives on S(q) = [-2/sqrt(1-q), 2/sqrt(1-q)] for |q| < 1
and degenerates to Gaussian formulas at q = 1 (handled by dedicated closed
forms; the infinite-product code never sees q = 1).

All infinite products are accumulated in log space: the constant factors
(q;q)_oo and the (1+q^k)^2-type products underflow/overflow double precision
separately for q near 1 even though their combination is O(1).  The k = 0
factor of the x-product equals the radicand 4-(1-q)x^2 and is pulled out
analytically, which removes the 0/0 cancellation at the support endpoints
and makes the densities exactly 0 there.

Evaluators accept scalars or numpy arrays in the main argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import OutOfSupport, ParamOutOfRange, SlowConvergence
from .qseries import (
    DEFAULT_POLICY,
    TruncationPolicy,
    _check_infinite_q,
    _qval,
    log_q_pochhammer_inf,
    q_factorial,
)
from .orthopoly import q_hermite_values

__all__ = [
    "Support",
    "CondParams",
    "f_N",
    "f_CN",
    "w_factor",
    "phi_gen",
    "tau_gen",
    "f_MN",
    "f_MCN",
    "aw_conditional",
    "envelope_constant",
    "poisson_mehler_partial",
    "poisson_mehler_terms",
]

_LOG_2PI = math.log(2.0 * math.pi)
_CHUNK = 4096  # k-block size for log-product accumulation


@dataclass(frozen=True)
class Support:
    """Support interval of the density family for a given q."""

    q: float
    lo: float
    hi: float

    @classmethod
    def from_q(cls, q) -> "Support":
        qv = _qval(q)
        if qv == 1.0:
            return cls(q=qv, lo=-math.inf, hi=math.inf)
        edge = 2.0 / math.sqrt(1.0 - qv)
        return cls(q=qv, lo=-edge, hi=edge)

    def contains(self, x, strict: bool = False):
        x = np.asarray(x, dtype=float)
        if strict:
            return (x > self.lo) & (x < self.hi)
        return (x >= self.lo) & (x <= self.hi)


@dataclass(frozen=True)
class CondParams:
    """Conditioning triple (y, rho, q) of the transition density."""

    y: float
    rho: float
    q: float

    def __post_init__(self):
        qv = _qval(self.q)
        if abs(self.rho) >= 1.0:
            raise ParamOutOfRange(f"|rho| must be < 1, got {self.rho}")
        if not bool(np.all(Support.from_q(qv).contains(self.y))):
            raise OutOfSupport(f"conditioning value y = {self.y} outside the support")


def _tail_terms(qv: float, coeff: float, policy: TruncationPolicy) -> int:
    """Number of product terms so the dropped log-tail stays below tail_tol.

    Factors behave like 1 + O(coeff * q^k); the geometric bound
    coeff |q|^(K+1) / (1-|q|) < tail_tol picks K.
    """
    aq = abs(qv)
    if aq == 0.0:
        return 1
    _check_infinite_q(qv)
    need = math.log(policy.tail_tol * (1.0 - aq) / coeff) / math.log(aq)
    k = max(policy.min_terms, int(math.ceil(need)))
    if k > policy.max_terms:
        raise SlowConvergence(
            f"product at q={qv} needs {k} > max_terms={policy.max_terms} terms"
        )
    return k


@lru_cache(maxsize=64)
def _log_qq_inf(qv: float, policy: TruncationPolicy) -> float:
    """log (q; q)_oo = sum_{j>=1} log(1 - q^j)."""
    return log_q_pochhammer_inf(qv, qv, policy)


# Below this |q|, every product here has log-magnitude < ~600, so factors can
# be multiplied directly without leaving double range; above it, accumulate
# term-by-term in log space.
_DIRECT_PRODUCT_Q = 0.96


def _xfactor_prod(sx2, qv: float, kmax: int):
    """prod_{k=1..kmax} ((1+q^k)^2 - sx2 q^k) for flat array sx2 = (1-q)x^2.

    Only valid in the direct-product q range.
    """
    prod = np.ones_like(sx2)
    start = 1
    while start <= kmax:
        stop = min(start + _CHUNK - 1, kmax)
        qp = qv ** np.arange(start, stop + 1, dtype=float)
        block = np.multiply.outer(-qp, sx2)
        block += ((1.0 + qp) ** 2)[:, None]
        prod *= block.prod(axis=0)
        start = stop + 1
    return prod


def _log_xfactor_sum(sx2, qv: float, kmax: int):
    """sum_{k=1..kmax} log((1+q^k)^2 - sx2 q^k) for flat array sx2 = (1-q)x^2."""
    if abs(qv) <= _DIRECT_PRODUCT_Q:
        return np.log(_xfactor_prod(sx2, qv, kmax))
    total = np.zeros_like(sx2)
    start = 1
    while start <= kmax:
        stop = min(start + _CHUNK - 1, kmax)
        qp = qv ** np.arange(start, stop + 1, dtype=float)
        factors = (1.0 + qp)[:, None] ** 2 - qp[:, None] * sx2[None, :]
        total += np.log(factors).sum(axis=0)
        start = stop + 1
    return total


def _w_prod(a, b, rho: float, qv: float, kmax: int):
    """prod_{k=0..kmax} w_k(a, b, rho, q); direct-product q range only."""
    s = 1.0 - qv
    rho2 = rho * rho
    ab = a * b
    sq = a * a + b * b
    prod = np.ones_like(a)
    start = 0
    while start <= kmax:
        stop = min(start + _CHUNK - 1, kmax)
        qp = qv ** np.arange(start, stop + 1, dtype=float)
        r2q2 = rho2 * qp * qp
        w = np.multiply.outer(-(s * rho) * qp * (1.0 + r2q2), ab)
        w += np.multiply.outer((s * rho2) * qp * qp, sq)
        w += ((1.0 - r2q2) ** 2)[:, None]
        prod *= w.prod(axis=0)
        start = stop + 1
    return prod


def _log_wsum(a, b, rho: float, qv: float, kmax: int):
    """sum_{k=0..kmax} log w_k(a, b, rho, q) for flat, equal-length arrays a, b."""
    if abs(qv) <= _DIRECT_PRODUCT_Q:
        return np.log(_w_prod(a, b, rho, qv, kmax))
    s = 1.0 - qv
    rho2 = rho * rho
    total = np.zeros_like(a)
    start = 0
    while start <= kmax:
        stop = min(start + _CHUNK - 1, kmax)
        qp = qv ** np.arange(start, stop + 1, dtype=float)
        r2q2 = rho2 * qp * qp
        w = (
            (1.0 - r2q2)[:, None] ** 2
            - (s * rho) * (qp * (1.0 + r2q2))[:, None] * (a * b)[None, :]
            + (s * rho2) * (qp * qp)[:, None] * (a * a + b * b)[None, :]
        )
        total += np.log(w).sum(axis=0)
        start = stop + 1
    return total


def _normal_pdf(x, mean: float, var: float):
    return np.exp(-((x - mean) ** 2) / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    return x, x.ndim == 0


def _require_in_support(value, qv: float, name: str):
    if qv == 1.0:
        return
    edge = 2.0 / math.sqrt(1.0 - qv)
    if np.any(np.abs(value) > edge * (1.0 + 1e-12)):
        raise OutOfSupport(f"{name} outside [-{edge:.6g}, {edge:.6g}]")


def _fn_core(xi, qv: float, policy: TruncationPolicy):
    """f_N values on points already inside the support (flat array); 0 at the edges."""
    s = 1.0 - qv
    sx2 = s * xi * xi
    radic = np.maximum(4.0 - sx2, 0.0)
    kmax = _tail_terms(qv, 8.0, policy)
    if abs(qv) <= _DIRECT_PRODUCT_Q:
        const = math.sqrt(s) * math.exp(_log_qq_inf(qv, policy)) / (2.0 * math.pi)
        return const * np.sqrt(radic) * _xfactor_prod(sx2, qv, kmax)
    with np.errstate(divide="ignore"):
        logf = (
            0.5 * math.log(s)
            + 0.5 * np.log(radic)
            + _log_qq_inf(qv, policy)
            + _log_xfactor_sum(sx2, qv, kmax)
            - _LOG_2PI
        )
    return np.exp(logf)


def _log_fn_core(xi, qv: float, policy: TruncationPolicy):
    """log f_N on points already inside the support (flat array); -inf at the edges."""
    s = 1.0 - qv
    sx2 = s * xi * xi
    radic = np.maximum(4.0 - sx2, 0.0)
    kmax = _tail_terms(qv, 8.0, policy)
    with np.errstate(divide="ignore"):
        return (
            0.5 * math.log(s)
            + 0.5 * np.log(radic)
            + _log_qq_inf(qv, policy)
            + _log_xfactor_sum(sx2, qv, kmax)
            - _LOG_2PI
        )


def f_N(x, q, policy: TruncationPolicy | None = None):
    """Density of the standardized q-Normal law; 0 outside S(q), Gaussian at q = 1."""
    qv = _qval(q)
    policy = policy or DEFAULT_POLICY
    x, scalar = _as_batch(x)
    if qv == 1.0:
        out = _normal_pdf(x, 0.0, 1.0)
        return float(out) if scalar else out
    edge = 2.0 / math.sqrt(1.0 - qv)
    xv = np.atleast_1d(x).ravel()
    inside = np.abs(xv) < edge
    xi = np.where(inside, xv, 0.0)
    out = np.where(inside, _fn_core(xi, qv, policy), 0.0)
    return float(out[0]) if scalar else out.reshape(x.shape)


def f_CN(x, y, rho: float, q, policy: TruncationPolicy | None = None):
    """Transition density given neighbor value y and link correlation rho.

    Reduces to f_N exactly at rho = 0 and to the N(rho y, 1 - rho^2) density
    at q = 1.  y may be a scalar or an array broadcastable against x
    (pairwise evaluation).
    """
    qv = _qval(q)
    policy = policy or DEFAULT_POLICY
    if abs(rho) >= 1.0:
        raise ParamOutOfRange(f"|rho| must be < 1, got {rho}")
    y = np.asarray(y, dtype=float)
    if not bool(np.all(Support.from_q(qv).contains(y))):
        raise OutOfSupport("conditioning value y outside the support")
    x, x_scalar = _as_batch(x)
    scalar = x_scalar and y.ndim == 0
    if qv == 1.0:
        out = _normal_pdf(x, rho * y, 1.0 - rho * rho)
        return float(out) if scalar else out
    bx, by = np.broadcast_arrays(x, y)
    shape = bx.shape
    xv = np.atleast_1d(bx).ravel().astype(float)
    yv = np.atleast_1d(by).ravel().astype(float)
    edge = 2.0 / math.sqrt(1.0 - qv)
    inside = np.abs(xv) < edge
    xi = np.where(inside, xv, 0.0)
    kmax_w = _tail_terms(qv, 20.0, policy)
    pref = math.exp(log_q_pochhammer_inf(rho * rho, qv, policy))
    if abs(qv) <= _DIRECT_PRODUCT_Q:
        dens = pref * _fn_core(xi, qv, policy) / _w_prod(xi, yv, rho, qv, kmax_w)
    else:
        logf = (
            _log_fn_core(xi, qv, policy)
            + math.log(pref)
            - _log_wsum(xi, yv, rho, qv, kmax_w)
        )
        dens = np.exp(logf)
    out = np.where(inside, dens, 0.0)
    return float(out[0]) if scalar else out.reshape(shape)


def w_factor(s_val: float, t_val: float, rho: float, k: int, q) -> float:
    """The quadratic product factor w_k(s, t, rho, q) of the conditional densities.

    Strictly positive whenever s, t lie in the closed support and |rho| < 1.
    """
    qv = _qval(q)
    if abs(rho) >= 1.0:
        raise ParamOutOfRange("w_factor needs |rho| < 1")
    qk = qv**k
    r2q2 = rho * rho * qk * qk
    return (
        (1.0 - r2q2) ** 2
        - (1.0 - qv) * rho * qk * (1.0 + r2q2) * s_val * t_val
        + (1.0 - qv) * rho * rho * (s_val**2 + t_val**2) * qk * qk
    )


def _check_t(t: float, qv: float):
    if (1.0 - qv) * t * t >= 1.0:
        raise ParamOutOfRange(f"(1-q) t^2 must be < 1, got t={t}, q={qv}")


def _log_phi_denominator(xv, t: float, qv: float, policy: TruncationPolicy):
    """sum_k log(1 - (1-q) x t q^k + (1-q) t^2 q^(2k)) over flat xv."""
    s = 1.0 - qv
    coeff = max(1.0, 2.0 * math.sqrt(s) * abs(t) + s * t * t) * 2.0
    kmax = _tail_terms(qv, coeff, policy)
    direct = abs(qv) <= _DIRECT_PRODUCT_Q
    total = np.zeros_like(xv)
    prod = np.ones_like(xv)
    start = 0
    while start <= kmax:
        stop = min(start + _CHUNK - 1, kmax)
        ks = np.arange(start, stop + 1, dtype=float)
        qp = qv**ks
        factors = 1.0 - (s * t) * qp[:, None] * xv[None, :] + (s * t * t) * (qp * qp)[
            :, None
        ]
        if direct:
            prod *= factors.prod(axis=0)
        else:
            total += np.log(factors).sum(axis=0)
        start = stop + 1
    return np.log(prod) if direct else total


def phi_gen(x, t: float, q, policy: TruncationPolicy | None = None):
    """Generating-function kernel of the q-Hermite family; positive on S(q).

    Equals 1 / prod_k (1 - (1-q) x t q^k + (1-q) t^2 q^(2k)) for q < 1 and
    exp(x t - t^2/2) at q = 1.  Requires (1-q) t^2 < 1 and x in S(q).
    """
    qv = _qval(q)
    policy = policy or DEFAULT_POLICY
    _check_t(t, qv)
    x, scalar = _as_batch(x)
    _require_in_support(x, qv, "x")
    if qv == 1.0:
        out = np.exp(x * t - t * t / 2.0)
        return float(out) if scalar else out
    xv = np.atleast_1d(x).ravel()
    out = np.exp(-_log_phi_denominator(xv, t, qv, policy))
    return float(out[0]) if scalar else out.reshape(x.shape)


def _log_tau_numerator(t: float, y: float, rho: float, qv: float, policy: TruncationPolicy):
    """sum_k log(1 - (1-q) rho y t q^k + (1-q) rho^2 t^2 q^(2k))."""
    s = 1.0 - qv
    coeff = max(1.0, 2.0 * math.sqrt(s) * abs(rho * t) + s * rho * rho * t * t) * 2.0
    kmax = _tail_terms(qv, coeff, policy)
    total = 0.0
    start = 0
    while start <= kmax:
        stop = min(start + _CHUNK - 1, kmax)
        ks = np.arange(start, stop + 1, dtype=float)
        qp = qv**ks
        total += float(
            np.log(1.0 - (s * rho * y * t) * qp + (s * rho * rho * t * t) * qp * qp).sum()
        )
        start = stop + 1
    return total


def tau_gen(x, t: float, y: float, rho: float, q, policy: TruncationPolicy | None = None):
    """Generating-function kernel of the Al-Salam-Chihara family.

    tau(x, t | y, 0, q) collapses to phi_gen(x, t, q); at q = 1 it equals
    exp(t (x - rho y) - t^2 (1 - rho^2)/2).
    """
    qv = _qval(q)
    policy = policy or DEFAULT_POLICY
    CondParams(y=float(y), rho=float(rho), q=qv)
    _check_t(t, qv)
    x, scalar = _as_batch(x)
    _require_in_support(x, qv, "x")
    if qv == 1.0:
        out = np.exp(t * (x - rho * y) - t * t * (1.0 - rho * rho) / 2.0)
        return float(out) if scalar else out
    xv = np.atleast_1d(x).ravel()
    lognum = _log_tau_numerator(t, y, rho, qv, policy)
    out = np.exp(lognum - _log_phi_denominator(xv, t, qv, policy))
    return float(out[0]) if scalar else out.reshape(x.shape)


def f_MN(x, t: float, q, policy: TruncationPolicy | None = None):
    """Tilted density phi(x, t|q) f_N(x|q); integrates to 1, mean t."""
    qv = _qval(q)
    policy = policy or DEFAULT_POLICY
    _check_t(t, qv)
    x, scalar = _as_batch(x)
    if qv == 1.0:
        # phi * f_N collapses to the N(t, 1) density
        out = _normal_pdf(x, t, 1.0)
        return float(out) if scalar else out
    edge = 2.0 / math.sqrt(1.0 - qv)
    xv = np.atleast_1d(x).ravel()
    inside = np.abs(xv) < edge
    xi = np.where(inside, xv, 0.0)
    dens = _fn_core(xi, qv, policy) * np.exp(-_log_phi_denominator(xi, t, qv, policy))
    out = np.where(inside, dens, 0.0)
    return float(out[0]) if scalar else out.reshape(x.shape)


def f_MCN(x, t: float, y: float, rho: float, q, policy: TruncationPolicy | None = None):
    """Tilted transition density tau(x, t|y, rho, q) f_CN(x|y, rho, q)."""
    qv = _qval(q)
    policy = policy or DEFAULT_POLICY
    CondParams(y=float(y), rho=float(rho), q=qv)
    _check_t(t, qv)
    x, scalar = _as_batch(x)
    if qv == 1.0:
        mean = rho * y + (1.0 - rho * rho) * t
        out = _normal_pdf(x, mean, 1.0 - rho * rho)
        return float(out) if scalar else out
    edge = 2.0 / math.sqrt(1.0 - qv)
    xv = np.atleast_1d(x).ravel()
    inside = np.abs(xv) < edge
    xi = np.where(inside, xv, 0.0)
    kmax_w = _tail_terms(qv, 20.0, policy)
    pref = math.exp(log_q_pochhammer_inf(rho * rho, qv, policy))
    tilt = np.exp(
        _log_tau_numerator(t, y, rho, qv, policy)
        - _log_phi_denominator(xi, t, qv, policy)
    )
    if abs(qv) <= _DIRECT_PRODUCT_Q:
        dens = pref * _fn_core(xi, qv, policy) / _w_prod(
            xi, np.full_like(xi, y), rho, qv, kmax_w
        ) * tilt
    else:
        dens = np.exp(
            _log_fn_core(xi, qv, policy)
            + math.log(pref)
            - _log_wsum(xi, np.full_like(xi, y), rho, qv, kmax_w)
        ) * tilt
    out = np.where(inside, dens, 0.0)
    return float(out[0]) if scalar else out.reshape(x.shape)


def aw_conditional(
    x,
    y: float,
    z: float,
    rho1: float,
    rho2: float,
    q,
    policy: TruncationPolicy | None = None,
):
    """Conditional density of the middle coordinate given both neighbors.

    Value: f_N(x|q) * (rho1^2; q)_oo (rho2^2; q)_oo / (rho1^2 rho2^2; q)_oo
    * prod_k w_k(y, z, rho1 rho2) / (w_k(x, y, rho1) w_k(x, z, rho2)),
    symmetric under (y, rho1) <-> (z, rho2); 0 outside S(q) in x.  At q = 1
    it is the Gaussian with mean (y rho1 (1-rho2^2) + z rho2 (1-rho1^2)) / D
    and variance (1-rho1^2)(1-rho2^2) / D, D = 1 - rho1^2 rho2^2.
    """
    qv = _qval(q)
    policy = policy or DEFAULT_POLICY
    CondParams(y=float(y), rho=float(rho1), q=qv)
    CondParams(y=float(z), rho=float(rho2), q=qv)
    x, scalar = _as_batch(x)
    if qv == 1.0:
        d = 1.0 - rho1 * rho1 * rho2 * rho2
        mean = (y * rho1 * (1.0 - rho2 * rho2) + z * rho2 * (1.0 - rho1 * rho1)) / d
        var = (1.0 - rho1 * rho1) * (1.0 - rho2 * rho2) / d
        out = _normal_pdf(x, mean, var)
        return float(out) if scalar else out
    edge = 2.0 / math.sqrt(1.0 - qv)
    xv = np.atleast_1d(x).ravel()
    inside = np.abs(xv) < edge
    xi = np.where(inside, xv, 0.0)
    kmax_w = _tail_terms(qv, 20.0, policy)
    log_const = (
        log_q_pochhammer_inf(rho1 * rho1, qv, policy)
        + log_q_pochhammer_inf(rho2 * rho2, qv, policy)
        - log_q_pochhammer_inf(rho1 * rho1 * rho2 * rho2, qv, policy)
        + float(
            _log_wsum(
                np.array([float(y)]), np.array([float(z)]), rho1 * rho2, qv, kmax_w
            )[0]
        )
    )
    logf = (
        _log_fn_core(xi, qv, policy)
        + log_const
        - _log_wsum(xi, np.full_like(xi, y), rho1, qv, kmax_w)
        - _log_wsum(xi, np.full_like(xi, z), rho2, qv, kmax_w)
    )
    out = np.where(inside, np.exp(logf), 0.0)
    return float(out[0]) if scalar else out.reshape(x.shape)


def envelope_constant(rho: float, q, policy: TruncationPolicy | None = None) -> float:
    """Envelope bound: f_CN(x|y, rho, q) <= envelope_constant(rho, q) * f_N(x|q).

    Value (rho^2; q)_oo / (|rho|; q)_oo^4; the |rho| form keeps the bound
    valid for negative rho where all kernel terms are dominated in absolute
    value.
    """
    qv = _qval(q)
    policy = policy or DEFAULT_POLICY
    if abs(rho) >= 1.0:
        raise ParamOutOfRange("envelope_constant needs |rho| < 1")
    return math.exp(
        log_q_pochhammer_inf(rho * rho, qv, policy)
        - 4.0 * log_q_pochhammer_inf(abs(rho), qv, policy)
    )


def poisson_mehler_terms(rho: float, q, tol: float = 1e-10) -> int:
    """Series length N so the kernel tail sum_{n>N} W_n^2 |rho|^n / (q;q)_n < tol.

    Works in log space: (q;q)_n underflows double precision for q near 1.
    """
    qv = _qval(q)
    from .qseries import w_bound

    if rho == 0.0:
        return 0
    log_tol = math.log(tol) + math.log(max(1e-300, 1.0 - abs(rho)))
    log_poch = 0.0
    n = 0
    last = math.inf
    while n < 4000:
        n += 1
        log_poch += math.log1p(-(qv**n))
        wn = w_bound(n, qv)
        if not math.isfinite(wn) or (last := 2.0 * math.log(wn) + n * math.log(abs(rho)) - log_poch) > 400.0:
            # bound is astronomically large; q too close to 1 to certify
            raise SlowConvergence(
                f"kernel tail bound explodes at q={qv} (order {n}); cannot certify {tol}"
            )
        if n >= 4 and last < log_tol:
            return n
    raise SlowConvergence(
        f"kernel tail did not close below {tol} (last log-term {last:.3g})"
    )


def poisson_mehler_partial(x, y: float, rho: float, q, n_terms: int):
    """Truncated kernel expansion f_N(x) sum_{n<=N} rho^n/[n]_q! H_n(x) H_n(y)."""
    qv = _qval(q)
    x, scalar = _as_batch(x)
    hx = q_hermite_values(n_terms, x, qv)
    hy = q_hermite_values(n_terms, float(y), qv)
    from .qseries import q_number

    acc = np.zeros_like(np.asarray(x, dtype=float))
    coef = 1.0  # rho^n / [n]_q!
    for n in range(n_terms + 1):
        if n > 0:
            coef *= rho / q_number(n, qv)
        acc = acc + coef * hx[n] * hy[n]
    out = f_N(x, qv) * acc
    return float(out) if scalar else out
