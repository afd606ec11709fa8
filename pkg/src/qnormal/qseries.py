"""q-combinatorial primitives: q-numbers, q-factorials, Gaussian binomials, Pochhammer products.

Everything here is a pure function of its arguments.  The deformation
parameter q lives in (-1, 1]; q = 1 is the classical limit and every
product-based routine branches to the closed form there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import InfiniteProductAtQ1, ParamOutOfRange, SlowConvergence

__all__ = [
    "QParam",
    "TruncationPolicy",
    "DEFAULT_POLICY",
    "MAX_ABS_Q_INFINITE",
    "q_number",
    "q_factorial",
    "q_binomial",
    "q_pochhammer",
    "w_bound",
    "log_q_pochhammer_inf",
]

# Larger sub-unit |q| makes (a;q)_oo need O(1/(1-|q|)) terms; refuse rather
# than silently lose digits.
MAX_ABS_Q_INFINITE = 0.9995


@dataclass(frozen=True)
class QParam:
    """Deformation parameter q, admissible on (-1, 1]."""

    q: float

    def __post_init__(self):
        if not (-1.0 < self.q <= 1.0):
            raise ParamOutOfRange(f"q must lie in (-1, 1], got {self.q!r}")

    @property
    def is_classical(self) -> bool:
        return self.q == 1.0


@dataclass(frozen=True)
class TruncationPolicy:
    """Controls for truncating infinite products and series.

    tail_tol is a relative bound on the dropped tail; min_terms guards
    against premature exits, max_terms converts non-convergence into
    SlowConvergence instead of a silent loss of accuracy.
    """

    tail_tol: float = 1e-15
    min_terms: int = 8
    max_terms: int = 20000

    def __post_init__(self):
        if not (0.0 < self.tail_tol < 1.0):
            raise ParamOutOfRange("tail_tol must lie in (0, 1)")
        if self.min_terms < 0 or self.max_terms < max(1, self.min_terms):
            raise ParamOutOfRange("need 0 <= min_terms <= max_terms")


DEFAULT_POLICY = TruncationPolicy()


def _qval(q) -> float:
    """Accept a QParam or a bare float; validate and return the float."""
    if isinstance(q, QParam):
        return q.q
    return QParam(float(q)).q


def q_number(n: int, q) -> float:
    """[n]_q = 1 + q + ... + q^(n-1); equals n at q = 1 and 0 at n = 0."""
    qv = _qval(q)
    if n < 0:
        raise ParamOutOfRange("q_number needs n >= 0")
    if qv == 1.0:
        return float(n)
    return (1.0 - qv**n) / (1.0 - qv)


@lru_cache(maxsize=65536)
def _q_factorial_cached(n: int, qv: float) -> float:
    if n == 0:
        return 1.0
    return _q_factorial_cached(n - 1, qv) * q_number(n, qv)


def q_factorial(n: int, q) -> float:
    """[n]_q! = prod_{i=1..n} [i]_q, with the empty product equal to 1."""
    qv = _qval(q)
    if n < 0:
        raise ParamOutOfRange("q_factorial needs n >= 0")
    return _q_factorial_cached(int(n), qv)


def q_binomial(n: int, k: int, q) -> float:
    """Gaussian binomial coefficient; 0 unless n >= k >= 0."""
    qv = _qval(q)
    if not (n >= k >= 0):
        return 0.0
    k = min(k, n - k)
    if qv == 1.0:
        return float(math.comb(n, k))
    out = 1.0
    for i in range(1, k + 1):
        out *= (1.0 - qv ** (n - k + i)) / (1.0 - qv**i)
    return out


@lru_cache(maxsize=65536)
def _w_bound_cached(n: int, qv: float) -> float:
    return sum(q_binomial(n, k, qv) for k in range(n + 1))


def w_bound(n: int, q) -> float:
    """W_n(q) = sum_k [n over k]_q, the sup-bound constant for the q-Hermite family."""
    qv = _qval(q)
    if n < 0:
        raise ParamOutOfRange("w_bound needs n >= 0")
    return _w_bound_cached(int(n), qv)


def _check_infinite_q(qv: float):
    if qv == 1.0:
        raise InfiniteProductAtQ1("(a;q)_oo diverges in term count at q = 1")
    if abs(qv) > MAX_ABS_Q_INFINITE:
        raise SlowConvergence(
            f"|q| = {abs(qv)} exceeds {MAX_ABS_Q_INFINITE}; infinite product "
            "would need too many terms for double precision"
        )


def q_pochhammer(a: float, q, n=None, policy: TruncationPolicy | None = None) -> float:
    """(a; q)_n = prod_{i=0..n-1} (1 - a q^i).

    n may be a nonnegative integer, or None / math.inf for the infinite
    product, which is truncated once |a q^i| < tail_tol * (1 - |q|)
    (geometric tail with explicit constant).
    """
    qv = _qval(q)
    policy = policy or DEFAULT_POLICY
    if n is not None and n != math.inf:
        if n < 0:
            raise ParamOutOfRange("q_pochhammer needs n >= 0")
        out = 1.0
        for i in range(int(n)):
            out *= 1.0 - a * qv**i
        return out
    # infinite product
    if a == 0.0:
        return 1.0
    if qv == 0.0:
        return 1.0 - a
    _check_infinite_q(qv)
    cut = policy.tail_tol * (1.0 - abs(qv))
    out = 1.0
    aq = float(a)
    for i in range(policy.max_terms):
        out *= 1.0 - aq
        aq *= qv
        if i + 1 >= policy.min_terms and abs(aq) < cut:
            return out
    raise SlowConvergence(
        f"(a;q)_oo with a={a}, q={qv} did not converge within {policy.max_terms} terms"
    )


def log_q_pochhammer_inf(a: float, q, policy: TruncationPolicy | None = None) -> float:
    """log (a; q)_oo, valid for |a| < 1 where every factor is positive.

    Needed because (q; q)_oo underflows double precision for q near 1.
    """
    qv = _qval(q)
    policy = policy or DEFAULT_POLICY
    if abs(a) >= 1.0:
        raise ParamOutOfRange("log_q_pochhammer_inf needs |a| < 1")
    if a == 0.0:
        return 0.0
    if qv == 0.0:
        return math.log1p(-a)
    _check_infinite_q(qv)
    cut = policy.tail_tol * (1.0 - abs(qv))
    out = 0.0
    aq = float(a)
    for i in range(policy.max_terms):
        out += math.log1p(-aq)
        aq *= qv
        if i + 1 >= policy.min_terms and abs(aq) < cut:
            return out
    raise SlowConvergence(
        f"log (a;q)_oo with a={a}, q={qv} did not converge within {policy.max_terms} terms"
    )
