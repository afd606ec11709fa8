"""Polynomial families: q-Hermite, Al-Salam-Chihara, Chebyshev-U, probabilists' Hermite.

All values come from forward three-term recurrences (the defining relations),
which are numerically benign on the compact support well past degree 64.
Evaluators accept scalars or numpy arrays in the point argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import OutOfSupport, ParamOutOfRange, Q1Unsupported
from .qseries import _qval, q_binomial, q_factorial, q_number, w_bound

__all__ = [
    "DEGREE_CAP",
    "LinearizationTable",
    "q_hermite",
    "q_hermite_values",
    "continuous_q_hermite",
    "al_salam_chihara",
    "chebyshev_u",
    "hermite_prob",
    "linearize",
    "hermite_expand",
    "hermite_to_monomial",
    "q_hermite_bound_check",
]

DEGREE_CAP = 64


def _check_degree(n: int):
    if n < 0:
        raise ParamOutOfRange("polynomial degree must be >= 0")
    if n > DEGREE_CAP:
        raise ParamOutOfRange(f"degree {n} exceeds cap {DEGREE_CAP}")


def q_hermite_values(n: int, x, q):
    """Stack of H_0..H_n at x via H_{k+1} = x H_k - [k]_q H_{k-1}; shape (n+1,) + x.shape.

    Internal workhorse without the public degree cap (series tails need
    high degrees).
    """
    qv = _qval(q)
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = x
    for k in range(1, n):
        out[k + 1] = x * out[k] - q_number(k, qv) * out[k - 1]
    return out


def q_hermite(n: int, x, q):
    """H_n(x|q), the monic q-Hermite value at x."""
    _check_degree(n)
    vals = q_hermite_values(n, x, q)[n]
    return float(vals) if np.ndim(x) == 0 else vals


def continuous_q_hermite(n: int, x, q):
    """h_n(x|q) = (1-q)^(n/2) H_n(2x/sqrt(1-q) | q); undefined at q = 1."""
    _check_degree(n)
    qv = _qval(q)
    if qv == 1.0:
        raise Q1Unsupported("continuous q-Hermite rescaling degenerates at q = 1")
    s = 1.0 - qv
    return s ** (n / 2.0) * q_hermite(n, 2.0 * np.asarray(x, dtype=float) / np.sqrt(s), qv)


def _asc_values(n: int, x, y: float, rho: float, q):
    qv = _qval(q)
    x = np.asarray(x, dtype=float)
    out = np.empty((n + 1,) + x.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = x - rho * y
    for k in range(1, n):
        out[k + 1] = (x - rho * y * qv**k) * out[k] - (
            1.0 - rho**2 * qv ** (k - 1)
        ) * q_number(k, qv) * out[k - 1]
    return out


def al_salam_chihara(n: int, x, y: float, rho: float, q):
    """P_n(x|y,rho,q) via P_{k+1} = (x - rho y q^k) P_k - (1 - rho^2 q^(k-1)) [k]_q P_{k-1}."""
    _check_degree(n)
    if abs(rho) >= 1.0:
        raise ParamOutOfRange("al_salam_chihara needs |rho| < 1")
    vals = _asc_values(n, x, y, rho, q)[n]
    return float(vals) if np.ndim(x) == 0 else vals


def chebyshev_u(n: int, x):
    """Chebyshev polynomial of the second kind, U_{k+1} = 2x U_k - U_{k-1}."""
    _check_degree(n)
    x = np.asarray(x, dtype=float)
    prev, cur = np.zeros_like(x), np.ones_like(x)
    for _ in range(n):
        prev, cur = cur, 2.0 * x * cur - prev
    return float(cur) if np.ndim(x) == 0 else cur


def hermite_prob(n: int, x):
    """Probabilists' Hermite polynomial, He_{k+1} = x He_k - k He_{k-1}."""
    _check_degree(n)
    x = np.asarray(x, dtype=float)
    prev, cur = np.zeros_like(x), np.ones_like(x)
    for k in range(n):
        prev, cur = cur, x * cur - k * prev
    return float(cur) if np.ndim(x) == 0 else cur


@dataclass(frozen=True)
class LinearizationTable:
    """Coefficients of H_n H_m = sum_j c_j H_{n+m-2j} in the q-Hermite basis."""

    n: int
    m: int
    coeffs: dict = field(default_factory=dict)  # result degree -> coefficient

    def degrees(self):
        return sorted(self.coeffs, reverse=True)


def linearize(n: int, m: int, q) -> LinearizationTable:
    """Product linearization: coefficient of H_{n+m-2j} is [m,j]_q [n,j]_q [j]_q!."""
    qv = _qval(q)
    if n < 0 or m < 0:
        raise ParamOutOfRange("linearize needs n, m >= 0")
    coeffs = {}
    for j in range(min(n, m) + 1):
        coeffs[n + m - 2 * j] = q_binomial(m, j, qv) * q_binomial(n, j, qv) * q_factorial(j, qv)
    return LinearizationTable(n=n, m=m, coeffs=coeffs)


@lru_cache(maxsize=256)
def _hermite_monomial_matrix(deg: int, qv: float):
    """Upper-triangular M with M[i, k] = coefficient of x^i in H_k(x|q)."""
    M = np.zeros((deg + 1, deg + 1))
    M[0, 0] = 1.0
    if deg >= 1:
        M[1, 1] = 1.0
    for k in range(1, deg):
        # H_{k+1} = x H_k - [k]_q H_{k-1} in coefficient space
        M[1 : k + 2, k + 1] = M[0 : k + 1, k]
        M[0 : k + 1, k + 1] -= q_number(k, qv) * M[0 : k + 1, k - 1]
    return M


def hermite_expand(mono_coeffs, q):
    """Rewrite a polynomial given by monomial coefficients (low to high) in the H(.|q) basis."""
    qv = _qval(q)
    c = np.asarray(mono_coeffs, dtype=float)
    deg = len(c) - 1
    _check_degree(max(deg, 0))
    M = _hermite_monomial_matrix(deg, qv)
    return np.linalg.solve(M, c)


def hermite_to_monomial(h_coeffs, q):
    """Inverse of hermite_expand: H-basis coefficients to monomial coefficients."""
    qv = _qval(q)
    c = np.asarray(h_coeffs, dtype=float)
    deg = len(c) - 1
    _check_degree(max(deg, 0))
    return _hermite_monomial_matrix(deg, qv) @ c


def q_hermite_bound_check(n: int, x: float, q) -> bool:
    """True iff |H_n(x|q)| <= W_n(q) (1-q)^(-n/2) at this point of the support."""
    _check_degree(n)
    qv = _qval(q)
    if qv == 1.0:
        raise Q1Unsupported("the sup bound uses the (1-q)^(-n/2) scale, q < 1 only")
    edge = 2.0 / np.sqrt(1.0 - qv)
    if abs(x) > edge * (1.0 + 1e-12):
        raise OutOfSupport(f"x = {x} lies outside [-{edge}, {edge}]")
    bound = w_bound(n, qv) * (1.0 - qv) ** (-n / 2.0)
    # equality holds at the support edge for n = 1; allow rounding slack
    return abs(q_hermite(n, float(np.clip(x, -edge, edge)), qv)) <= bound * (1.0 + 1e-12)
