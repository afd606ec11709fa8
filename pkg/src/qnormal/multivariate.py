"""The d-dimensional law: joint density, marginals, Markov conditionals, contraction.

A spec is the parameter pack (m, sigma^2, rho, q[, t]); the density is the
first coordinate's marginal times a chain of transition factors, so the
coordinates form a Markov chain.  Coordinates are numbered from 1 and link k
joins coordinates k and k+1.

All conditional machinery standardizes to m = 0, sigma = 1 internally and
rescales on exit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BadIndexSet, NonCenteredFunction, ParamOutOfRange
from .qseries import DEFAULT_POLICY, TruncationPolicy, _qval, q_factorial
from .densities import Support, aw_conditional, f_CN, f_MN, f_N, phi_gen, tau_gen

__all__ = [
    "MVQNormalSpec",
    "IndexSet",
    "ConditionalExpectation",
    "joint_density",
    "experimental_mixed_density",
    "marginal",
    "covariance",
    "cond_expect_qhermite",
    "contraction_apply",
    "two_sided_conditional",
    "gebelein_check",
    "spec_to_dict",
    "spec_from_dict",
]


@dataclass(frozen=True)
class MVQNormalSpec:
    """Parameter pack (d, m, sigma2, rho, q, optional t) of the d-dimensional law.

    When t is present the spec is the tilted family (leading phi factor),
    which is only defined in standardized form m = 0, sigma^2 = 1.
    """

    d: int
    m: tuple
    sigma2: tuple
    rho: tuple
    q: float
    t: float | None = None

    def __post_init__(self):
        qv = _qval(self.q)
        object.__setattr__(self, "q", qv)
        object.__setattr__(self, "m", tuple(float(v) for v in self.m))
        object.__setattr__(self, "sigma2", tuple(float(v) for v in self.sigma2))
        object.__setattr__(self, "rho", tuple(float(v) for v in self.rho))
        if self.d < 1:
            raise ParamOutOfRange("d must be >= 1")
        if len(self.m) != self.d or len(self.sigma2) != self.d:
            raise ParamOutOfRange("m and sigma2 must have length d")
        if len(self.rho) != self.d - 1:
            raise ParamOutOfRange("rho must have length d - 1")
        if any(s <= 0.0 for s in self.sigma2):
            raise ParamOutOfRange("sigma2 entries must be positive")
        if any(abs(r) >= 1.0 for r in self.rho):
            raise ParamOutOfRange("|rho_i| must be < 1")
        if self.t is not None:
            if (1.0 - qv) * self.t**2 >= 1.0:
                raise ParamOutOfRange("(1-q) t^2 must be < 1")
            if any(v != 0.0 for v in self.m) or any(s != 1.0 for s in self.sigma2):
                raise ParamOutOfRange("tilted specs are defined in standardized form only")

    @classmethod
    def standard(cls, d: int, rho, q, t: float | None = None) -> "MVQNormalSpec":
        return cls(d=d, m=(0.0,) * d, sigma2=(1.0,) * d, rho=tuple(rho), q=q, t=t)

    @property
    def sigma(self) -> tuple:
        return tuple(math.sqrt(s) for s in self.sigma2)

    def standardized(self) -> "MVQNormalSpec":
        return replace(self, m=(0.0,) * self.d, sigma2=(1.0,) * self.d)


@dataclass(frozen=True)
class IndexSet:
    """Strictly increasing, nonempty coordinate indices in 1..d."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if not idx:
            raise BadIndexSet("index set must be nonempty")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise BadIndexSet("indices must be strictly increasing")

    def validate(self, d: int) -> "IndexSet":
        if self.indices[0] < 1 or self.indices[-1] > d:
            raise BadIndexSet(f"indices must lie in 1..{d}")
        return self

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)


def _as_index_set(keep) -> IndexSet:
    return keep if isinstance(keep, IndexSet) else IndexSet(tuple(keep))


def _rho_prod(rho, lo: int, hi: int) -> float:
    """Product of links joining coordinates lo..hi (1-based, hi exclusive)."""
    out = 1.0
    for k in range(lo, hi):
        out *= rho[k - 1]
    return out


def joint_density(x, spec: MVQNormalSpec, policy: TruncationPolicy | None = None):
    """Joint density at a point (length-d sequence) or batch (n, d) array."""
    policy = policy or DEFAULT_POLICY
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != spec.d:
        raise ParamOutOfRange(f"points must have {spec.d} coordinates")
    sig = np.array(spec.sigma)
    z = (pts - np.array(spec.m)) / sig
    sup = Support.from_q(spec.q)
    inside = np.all(sup.contains(z), axis=1)
    out = np.zeros(len(pts))
    if np.any(inside):
        zi = z[inside]
        if spec.t is not None:
            dens = np.atleast_1d(f_MN(zi[:, 0], spec.t, spec.q, policy))
        else:
            dens = np.atleast_1d(f_N(zi[:, 0], spec.q, policy))
        for i in range(spec.d - 1):
            dens = dens * f_CN(zi[:, i + 1], zi[:, i], spec.rho[i], spec.q, policy)
        out[inside] = dens / float(np.prod(sig))
    return float(out[0]) if single else out


def experimental_mixed_density(
    x, spec: MVQNormalSpec, family: str, policy: TruncationPolicy | None = None
):
    """Joint density of the two mixed tilted families; nothing is claimed
    about their marginals.

    family "phi-tau": phi(x1) f_N(x1) tau(x2,t|x1,rho1) prod f_CN
    family "tau":             f_N(x1) tau(x2,t|x1,rho1) prod f_CN
    """
    policy = policy or DEFAULT_POLICY
    if family not in ("phi-tau", "tau"):
        raise ParamOutOfRange(f"unknown experimental family {family!r}")
    if spec.t is None:
        raise ParamOutOfRange("mixed families need the tilt parameter t")
    if spec.d < 2:
        raise ParamOutOfRange("mixed families need d >= 2")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    sup = Support.from_q(spec.q)
    inside = np.all(sup.contains(pts), axis=1)
    out = np.zeros(len(pts))
    for j in np.nonzero(inside)[0]:
        p = pts[j]
        val = f_N(p[0], spec.q, policy)
        if family == "phi-tau":
            val *= phi_gen(p[0], spec.t, spec.q, policy)
        val *= tau_gen(p[1], spec.t, p[0], spec.rho[0], spec.q, policy)
        for i in range(spec.d - 1):
            val *= f_CN(p[i + 1], p[i], spec.rho[i], spec.q, policy)
        out[j] = val
    return float(out[0]) if single else out


def marginal(spec: MVQNormalSpec, keep) -> MVQNormalSpec:
    """Marginal spec over the kept coordinates; gap links multiply into one."""
    keep = _as_index_set(keep).validate(spec.d)
    idx = keep.indices
    new_rho = tuple(_rho_prod(spec.rho, idx[a], idx[a + 1]) for a in range(len(idx) - 1))
    new_t = spec.t
    if spec.t is not None:
        new_t = spec.t * _rho_prod(spec.rho, 1, idx[0])
    return MVQNormalSpec(
        d=len(idx),
        m=tuple(spec.m[i - 1] for i in idx),
        sigma2=tuple(spec.sigma2[i - 1] for i in idx),
        rho=new_rho,
        q=spec.q,
        t=new_t,
    )


def covariance(spec: MVQNormalSpec) -> np.ndarray:
    """Covariance matrix sigma_i sigma_j prod_{k=i..j-1} rho_k (untilted specs)."""
    if spec.t is not None:
        raise ParamOutOfRange("covariance is defined for untilted specs")
    sig = spec.sigma
    cov = np.empty((spec.d, spec.d))
    for i in range(1, spec.d + 1):
        for j in range(i, spec.d + 1):
            cov[i - 1, j - 1] = cov[j - 1, i - 1] = (
                sig[i - 1] * sig[j - 1] * _rho_prod(spec.rho, i, j)
            )
    return cov


@dataclass(frozen=True)
class ConditionalExpectation:
    """E(H_n(X_i) | past) = r^n H_n(X_ref) with conditional variance 1 - r^2."""

    r: float
    n: int
    reference: int  # nearest conditioning coordinate (1-based)

    @property
    def coefficient(self) -> float:
        return self.r**self.n

    @property
    def conditional_variance(self) -> float:
        return 1.0 - self.r * self.r


def cond_expect_qhermite(spec: MVQNormalSpec, i: int, past, n: int) -> ConditionalExpectation:
    """Scale of the polynomial regression of coordinate i on earlier coordinates.

    Only the nearest conditioning coordinate matters (Markov property); the
    scale is the product of the links between it and i.
    """
    past = _as_index_set(past).validate(spec.d)
    if not (1 <= i <= spec.d):
        raise BadIndexSet(f"i must lie in 1..{spec.d}")
    if past.indices[-1] >= i:
        raise BadIndexSet("conditioning indices must all be < i")
    if n < 0:
        raise ParamOutOfRange("n must be >= 0")
    jm = past.indices[-1]
    r = _rho_prod(spec.rho, jm, i)
    return ConditionalExpectation(r=r, n=n, reference=jm)


def contraction_apply(coeffs, rho: float, q) -> np.ndarray:
    """Scale the degree-i coefficient by rho^i (conditional-expectation operator)."""
    _qval(q)
    if abs(rho) > 1.0:
        raise ParamOutOfRange("contraction needs |rho| <= 1")
    c = np.asarray(coeffs, dtype=float)
    return c * rho ** np.arange(len(c))


def two_sided_conditional(
    spec: MVQNormalSpec,
    i: int,
    left: int,
    right: int,
    y: float,
    z: float,
    policy: TruncationPolicy | None = None,
):
    """Density of coordinate i given values y at coordinate `left` and z at `right`.

    Depends only on the nearest conditioning neighbors; the two effective
    correlations are the link products across each gap.
    """
    if not (1 <= left < i < right <= spec.d):
        raise BadIndexSet("need left < i < right inside 1..d")
    rho_l = _rho_prod(spec.rho, left, i)
    rho_r = _rho_prod(spec.rho, i, right)
    sig = spec.sigma
    mi, si = spec.m[i - 1], sig[i - 1]
    ys = (y - spec.m[left - 1]) / sig[left - 1]
    zs = (z - spec.m[right - 1]) / sig[right - 1]

    def density(x):
        xs = (np.asarray(x, dtype=float) - mi) / si
        return aw_conditional(xs, ys, zs, rho_l, rho_r, spec.q, policy) / si

    return density


def gebelein_check(spec: MVQNormalSpec, i: int, past, g_coeffs):
    """Both sides of the variance-contraction inequality for a centered g.

    g is given by coefficients in the H(.|q) basis; returns (lhs, rhs) with
    lhs = sum a_k^2 r^(2k) [k]_q! and rhs = r^2 sum a_k^2 [k]_q!.
    """
    c = np.asarray(g_coeffs, dtype=float)
    if len(c) > 0 and c[0] != 0.0:
        raise NonCenteredFunction("g must have zero mean (no H_0 component)")
    r = cond_expect_qhermite(spec, i, past, 1).r
    fact = np.array([q_factorial(k, spec.q) for k in range(len(c))])
    powers = r ** (2 * np.arange(len(c)))
    lhs = float(np.sum(c * c * powers * fact))
    rhs = float(r * r * np.sum(c * c * fact))
    return lhs, rhs


def spec_to_dict(spec: MVQNormalSpec) -> dict:
    """Flat key-value document for serialization (field names are fixed)."""
    doc = {
        "d": spec.d,
        "m": list(spec.m),
        "sigma2": list(spec.sigma2),
        "rho": list(spec.rho),
        "q": spec.q,
    }
    if spec.t is not None:
        doc["t"] = spec.t
    return doc


def spec_from_dict(doc: dict) -> MVQNormalSpec:
    return MVQNormalSpec(
        d=int(doc["d"]),
        m=tuple(doc["m"]),
        sigma2=tuple(doc["sigma2"]),
        rho=tuple(doc.get("rho", ())),
        q=float(doc["q"]),
        t=float(doc["t"]) if "t" in doc and doc["t"] is not None else None,
    )
