"""Exact rejection sampling and Markov-chain simulation.

Draws from the base law use rejection against the uniform law on the
support with a grid-tabulated sup (inflated by a 5% safety margin);
transition draws use rejection with the base density as proposal and the
explicit kernel envelope constant.  Acceptance always evaluates the exact
densities, so draws are exact, not approximate.

Chains are processed in fixed-size blocks; each block owns a counter-based
Philox stream keyed (seed, block), so batches are bit-for-bit reproducible
and blocks may run in parallel without sharing RNG state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EnvelopeViolation, ParamOutOfRange, TooManyRejections
from .qseries import TruncationPolicy, _qval, log_q_pochhammer_inf
from .densities import (
    _DIRECT_PRODUCT_Q,
    _log_wsum,
    _tail_terms,
    _w_prod,
    Support,
    f_N,
    phi_gen,
)
from .multivariate import MVQNormalSpec
from .quadrature import QuadratureSpec, cdf

# Densities truncated to 1e-10 relative tails are statistically
# indistinguishable from the full products at any feasible sample size but
# cut the per-proposal term count; callers can pass an explicit policy.
_SAMPLING_POLICY = TruncationPolicy(tail_tol=1e-10)

__all__ = [
    "SamplerConfig",
    "StageStats",
    "SampleBatch",
    "sample_qnormal",
    "sample_fcn",
    "sample_chain",
    "ks_statistic",
]

_BLOCK = 16384  # chains per RNG block; fixed so results don't depend on batching


@dataclass(frozen=True)
class SamplerConfig:
    seed: int
    grid_size: int = 2048
    max_rejections: int = 1_000_000
    debug: bool = False

    def __post_init__(self):
        if self.seed < 0:
            raise ParamOutOfRange("seed must be a nonnegative 64-bit integer")
        if self.grid_size < 256:
            raise ParamOutOfRange("grid_size must be >= 256")
        if self.max_rejections < 1:
            raise ParamOutOfRange("max_rejections must be >= 1")


@dataclass
class StageStats:
    """Proposal/acceptance telemetry for one sampling stage."""

    name: str
    proposals: int = 0
    accepted: int = 0

    @property
    def rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else math.nan

    def merge(self, other: "StageStats"):
        self.proposals += other.proposals
        self.accepted += other.accepted


@dataclass
class SampleBatch:
    """Seeded chain draws with acceptance telemetry and empirical moments."""

    draws: np.ndarray  # (n_samples, d)
    seed: int
    acceptance: list = field(default_factory=list)

    def moments(self) -> np.ndarray:
        """Per coordinate: mean and central moments of order 2..4, shape (d, 4)."""
        mu = self.draws.mean(axis=0)
        c = self.draws - mu
        return np.stack(
            [mu, (c**2).mean(axis=0), (c**3).mean(axis=0), (c**4).mean(axis=0)], axis=1
        )

    def correlation(self) -> np.ndarray:
        return np.corrcoef(self.draws.T) if self.draws.shape[1] > 1 else np.ones((1, 1))

    def to_csv(self, path):
        """Rows chain,step,value; '.' decimal separator, \\n line endings."""
        n, d = self.draws.shape
        with open(path, "w", newline="") as fh:
            fh.write("chain,step,value\n")
            for i in range(n):
                for j in range(d):
                    fh.write(f"{i},{j + 1},{self.draws[i, j]:.17g}\n")

    def stats_payload(self) -> dict:
        mom = self.moments()
        return {
            "seed": self.seed,
            "n_samples": int(self.draws.shape[0]),
            "d": int(self.draws.shape[1]),
            "acceptance": [
                {"stage": s.name, "proposals": s.proposals, "accepted": s.accepted, "rate": s.rate}
                for s in self.acceptance
            ],
            "moments": {
                "mean": mom[:, 0].tolist(),
                "central2": mom[:, 1].tolist(),
                "central3": mom[:, 2].tolist(),
                "central4": mom[:, 3].tolist(),
            },
            "correlation": self.correlation().tolist(),
        }


def _density_sup(values: np.ndarray) -> float:
    return 1.05 * float(values.max())


_fn_sup_cache: dict = {}


def _fn_envelope(qv: float, grid_size: int, policy: TruncationPolicy) -> float:
    """Grid-tabulated sup of the base density, inflated by the safety margin."""
    key = (qv, grid_size, policy)
    if key not in _fn_sup_cache:
        edge = 2.0 / math.sqrt(1.0 - qv)
        grid = np.linspace(-edge, edge, grid_size)
        _fn_sup_cache[key] = _density_sup(f_N(grid, qv, policy))
    return _fn_sup_cache[key]


_SQUEEZE_CELLS = 4096
_fn_squeeze_cache: dict = {}


def _fn_squeeze(qv: float, policy: TruncationPolicy):
    """Rigorous per-cell lower/upper bounds of the base density.

    The density is C sqrt(4-u) prod_k ((1+q^k)^2 - q^k u) with u = (1-q)x^2;
    every factor is linear in u, so evaluating each at the cell's u-endpoints
    and taking the elementwise min/max bounds the product on the whole cell.
    Cells are symmetric around 0 (even count), so u is monotone per cell.
    """
    key = (qv, policy)
    if key not in _fn_squeeze_cache:
        from .densities import _log_qq_inf, _tail_terms as tail

        s = 1.0 - qv
        edge = 2.0 / math.sqrt(s)
        kmax = tail(qv, 8.0, policy)
        xg = np.linspace(-edge, edge, _SQUEEZE_CELLS + 1)
        u_ends = s * xg * xg
        u1 = np.minimum(u_ends[:-1], u_ends[1:])
        u2 = np.maximum(u_ends[:-1], u_ends[1:])
        qp = qv ** np.arange(1.0, kmax + 1.0)
        c = ((1.0 + qp) ** 2)[:, None]
        f1 = c - qp[:, None] * u1[None, :]
        f2 = c - qp[:, None] * u2[None, :]
        glo = np.minimum(f1, f2).prod(axis=0)
        ghi = np.maximum(f1, f2).prod(axis=0)
        const = math.sqrt(s) * math.exp(_log_qq_inf(qv, policy)) / (2.0 * math.pi)
        lo = const * np.sqrt(np.maximum(4.0 - u2, 0.0)) * glo * (1.0 - 1e-12)
        hi = const * np.sqrt(np.maximum(4.0 - u1, 0.0)) * ghi * (1.0 + 1e-12)
        _fn_squeeze_cache[key] = (lo, hi, edge)
    return _fn_squeeze_cache[key]


def _phi_envelope(qv: float, t: float, grid_size: int, policy: TruncationPolicy) -> float:
    edge = 2.0 / math.sqrt(1.0 - qv)
    grid = np.linspace(-edge, edge, grid_size)
    return _density_sup(phi_gen(grid, t, qv, policy))


def _warn_rate(stats: StageStats, envelope: float):
    if stats.proposals >= 1000 and stats.rate < 1.0 / (10.0 * envelope):
        warnings.warn(
            f"stage {stats.name}: acceptance rate {stats.rate:.2e} below "
            f"1/(10*{envelope:.3g}); envelope or tabulation may be wrong",
            RuntimeWarning,
        )


# Per-round proposal target: large enough to amortize per-round overhead,
# small enough that m*acceptance stays low while many chains are pending
# (keeping total proposals near the sequential-rejection optimum) and that
# transient (kmax, n_proposals) arrays stay within tens of MB.
_ROUND_TARGET = 1 << 17


def _multiplicity(pending: int, per_chain_cap: int) -> int:
    return max(1, min(per_chain_cap, _ROUND_TARGET // max(1, pending)))


def _first_acceptance(out, pending, x, ok, stats):
    """Store the first accepted candidate per row; returns remaining pending.

    Telemetry counts only proposals up to and including each row's first
    acceptance (what a sequential sampler would consume), so acceptance
    rates reflect the envelope, not the batching waste.
    """
    any_ok = ok.any(axis=1)
    first = ok.argmax(axis=1)
    rows = np.nonzero(any_ok)[0]
    out[pending[rows]] = x[rows, first[rows]]
    stats.accepted += rows.size
    m = ok.shape[1]
    stats.proposals += int(np.where(any_ok, first + 1, m).sum())
    return pending[~any_ok]


def _draw_fn_block(n: int, qv: float, config: SamplerConfig, rng, stats: StageStats,
                   policy: TruncationPolicy) -> np.ndarray:
    """n exact base-law draws via uniform rejection on the support."""
    if qv == 1.0:
        stats.proposals += n
        stats.accepted += n
        return rng.standard_normal(n)
    edge = 2.0 / math.sqrt(1.0 - qv)
    sup = _fn_envelope(qv, config.grid_size, policy)
    squeeze = abs(qv) <= _DIRECT_PRODUCT_Q
    if squeeze:
        lo_tab, hi_tab, _ = _fn_squeeze(qv, policy)
        cell_scale = _SQUEEZE_CELLS / (2.0 * edge)
    out = np.empty(n)
    pending = np.arange(n)
    trials = 0
    while pending.size:
        m = _multiplicity(pending.size, 8)
        trials += m
        if trials > config.max_rejections:
            raise TooManyRejections(
                f"base-law draw exceeded {config.max_rejections} proposals per chain"
            )
        x = rng.uniform(-edge, edge, size=(pending.size, m))
        u = rng.uniform(size=(pending.size, m))
        thresh = u * sup
        if squeeze:
            # decide against the cell bounds; exact density only on the
            # undecided sliver between them
            idx = np.clip(((x + edge) * cell_scale).astype(np.int64), 0, _SQUEEZE_CELLS - 1)
            ok = thresh <= lo_tab[idx]
            mid = ~ok & (thresh <= hi_tab[idx])
            if np.any(mid):
                dens_mid = f_N(x[mid], qv, policy)
                if config.debug and np.any(dens_mid > sup):
                    raise EnvelopeViolation("tabulated sup of the base density too small")
                ok[mid] = thresh[mid] <= dens_mid
        else:
            dens = f_N(x.ravel(), qv, policy).reshape(x.shape)
            if config.debug and np.any(dens > sup):
                raise EnvelopeViolation("tabulated sup of the base density too small")
            ok = thresh <= dens
        pending = _first_acceptance(out, pending, x, ok, stats)
    return out


def _draw_mn_block(n: int, t: float, qv: float, config: SamplerConfig, rng,
                   stats: StageStats, phi_sup: float, policy: TruncationPolicy) -> np.ndarray:
    """Draws from the tilted base law: base proposals, accept on phi/phi_sup."""
    if qv == 1.0:
        stats.proposals += n
        stats.accepted += n
        return rng.standard_normal(n) + t
    out = np.empty(n)
    pending = np.arange(n)
    trials = 0
    fn_stats = StageStats(name=stats.name + "/proposal")
    while pending.size:
        m = _multiplicity(pending.size, 8)
        trials += m
        if trials > config.max_rejections:
            raise TooManyRejections("tilted draw exceeded the per-chain proposal budget")
        x = _draw_fn_block(pending.size * m, qv, config, rng, fn_stats, policy).reshape(
            pending.size, m
        )
        ratio = phi_gen(x.ravel(), t, qv, policy).reshape(x.shape) / phi_sup
        if config.debug and np.any(ratio > 1.0):
            raise EnvelopeViolation("phi grid max too small")
        u = rng.uniform(size=x.shape)
        pending = _first_acceptance(out, pending, x, u <= ratio, stats)
    return out


def _fcn_accept_ratio(x: np.ndarray, y: np.ndarray, rho: float, qv: float,
                      policy: TruncationPolicy) -> np.ndarray:
    """f_CN(x|y,rho,q) / (C2 f_N(x|q)) = (|rho|;q)_oo^4 / prod_k w_k; always <= 1."""
    kmax = _tail_terms(qv, 20.0, policy)
    const = 4.0 * log_q_pochhammer_inf(abs(rho), qv, policy)
    if abs(qv) <= _DIRECT_PRODUCT_Q:
        return math.exp(const) / _w_prod(x, y, rho, qv, kmax)
    return np.exp(const - _log_wsum(x, y, rho, qv, kmax))


_w_split_cache: dict = {}


def _w_tail_split(rho: float, qv: float, policy: TruncationPolicy):
    """Head length j and rigorous bounds for the dropped w-product tail.

    Support-wide per-factor bound: |w_k - 1| <= b_k with
    b_k = 2 rho^2 |q|^(2k) + rho^4 |q|^(4k) + 4|rho||q|^k (1 + rho^2 |q|^(2k))
          + 8 rho^2 |q|^(2k)
    (from (1-q)|xy| <= 4 and (1-q)(x^2+y^2) <= 8), so
    prod_{k>j} w_k lies in [exp(-T_j), exp(T_j)] with
    T_j = sum_{k>j} -log(1 - b_k).
    """
    key = (rho, qv, policy)
    if key not in _w_split_cache:
        kmax = _tail_terms(qv, 20.0, policy)
        k = np.arange(kmax + 1, dtype=float)
        aq = abs(qv) ** k
        r = abs(rho)
        b = 2 * r**2 * aq**2 + r**4 * aq**4 + 4 * r * aq * (1 + r**2 * aq**2) + 8 * r**2 * aq**2
        b = np.minimum(b, 0.9)
        neglog = -np.log1p(-b)
        tails = np.concatenate([np.cumsum(neglog[::-1])[::-1][1:], [0.0]])
        j = int(np.searchsorted(-tails, -5e-4))  # smallest j with tails[j] <= 5e-4
        j = min(max(j, 2), kmax)
        t = float(tails[j])
        _w_split_cache[key] = (j, math.exp(-t), math.exp(t), kmax)
    return _w_split_cache[key]


def _draw_fcn_block(y: np.ndarray, rho: float, qv: float, config: SamplerConfig, rng,
                    stats: StageStats, policy: TruncationPolicy) -> np.ndarray:
    """One transition draw per entry of y, exact via envelope rejection."""
    n = y.size
    if qv == 1.0:
        stats.proposals += n
        stats.accepted += n
        return rho * y + math.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
    if rho == 0.0:
        return _draw_fn_block(n, qv, config, rng, stats, policy)
    out = np.empty(n)
    pending = np.arange(n)
    trials = 0
    fn_stats = StageStats(name=stats.name + "/proposal")
    fast = abs(qv) <= _DIRECT_PRODUCT_Q and not config.debug
    if fast:
        j_head, tail_lo, tail_hi, kmax = _w_tail_split(rho, qv, policy)
        log_const = 4.0 * log_q_pochhammer_inf(abs(rho), qv, policy)
        const = math.exp(log_const)
    while pending.size:
        m = _multiplicity(pending.size, 4096)
        trials += m
        if trials > config.max_rejections:
            raise TooManyRejections(
                f"transition draw exceeded {config.max_rejections} proposals per chain"
            )
        x = _draw_fn_block(pending.size * m, qv, config, rng, fn_stats, policy).reshape(
            pending.size, m
        )
        yrep = np.repeat(y[pending], m)
        u = rng.uniform(size=x.shape)
        if fast:
            # decide u <= const / (head * tail) against the rigorous tail
            # band; only the sliver between the two bounds needs all factors
            head = _w_prod(x.ravel(), yrep, rho, qv, j_head).reshape(x.shape)
            uh = u * head
            ok = uh * tail_hi <= const
            mid = ~ok & (uh * tail_lo <= const)
            if np.any(mid):
                full = _w_prod(x[mid], yrep.reshape(x.shape)[mid], rho, qv, kmax)
                ok[mid] = u[mid] * full <= const
        else:
            ratio = _fcn_accept_ratio(x.ravel(), yrep, rho, qv, policy).reshape(x.shape)
            if config.debug and np.any(ratio > 1.0 + 1e-9):
                raise EnvelopeViolation("kernel envelope constant violated")
            ok = u <= ratio
        pending = _first_acceptance(out, pending, x, ok, stats)
    return out


def _block_rng(seed: int, block: int):
    key = np.array([seed, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_qnormal(q, config: SamplerConfig, size: int | None = None,
                   policy: TruncationPolicy | None = None):
    """Draw from the base law; a float when size is None, else an array."""
    qv = _qval(q)
    policy = policy or _SAMPLING_POLICY
    n = 1 if size is None else int(size)
    stats = StageStats(name="base")
    out = np.empty(n)
    done = 0
    block = 0
    while done < n:
        take = min(_BLOCK, n - done)
        rng = _block_rng(config.seed, block)
        out[done : done + take] = _draw_fn_block(take, qv, config, rng, stats, policy)
        done += take
        block += 1
    return float(out[0]) if size is None else out


def sample_fcn(y: float, rho: float, q, config: SamplerConfig, size: int | None = None,
               policy: TruncationPolicy | None = None):
    """Draw from the transition law given neighbor value y."""
    qv = _qval(q)
    policy = policy or _SAMPLING_POLICY
    Support.from_q(qv).contains(y)
    n = 1 if size is None else int(size)
    stats = StageStats(name="transition")
    out = np.empty(n)
    done = 0
    block = 0
    while done < n:
        take = min(_BLOCK, n - done)
        rng = _block_rng(config.seed, block)
        yv = np.full(take, float(y))
        out[done : done + take] = _draw_fcn_block(yv, rho, qv, config, rng, stats, policy)
        done += take
        block += 1
    if qv != 1.0:
        _warn_rate(stats, envelope_like_for_rho(rho, qv, policy))
    return float(out[0]) if size is None else out


def envelope_like_for_rho(rho: float, qv: float, policy: TruncationPolicy) -> float:
    from .densities import envelope_constant

    return envelope_constant(rho, qv, policy) if rho != 0.0 else 1.0


def sample_chain(spec: MVQNormalSpec, n_samples: int, config: SamplerConfig,
                 policy: TruncationPolicy | None = None) -> SampleBatch:
    """Simulate n_samples independent chains of the d-dimensional law.

    Row i is one chain: first coordinate from the (possibly tilted) base
    law, then one transition per link; coordinates are rescaled by (m,
    sigma) on exit.
    """
    policy = policy or _SAMPLING_POLICY
    if n_samples < 1:
        raise ParamOutOfRange("n_samples must be >= 1")
    qv = spec.q
    stages = [StageStats(name="initial")] + [
        StageStats(name=f"transition-{i + 1}") for i in range(spec.d - 1)
    ]
    phi_sup = None
    if spec.t is not None and qv != 1.0:
        phi_sup = _phi_envelope(qv, spec.t, config.grid_size, policy)
    draws = np.empty((n_samples, spec.d))
    for block_start in range(0, n_samples, _BLOCK):
        take = min(_BLOCK, n_samples - block_start)
        rng = _block_rng(config.seed, block_start // _BLOCK)
        if spec.t is not None:
            z = _draw_mn_block(take, spec.t, qv, config, rng, stages[0], phi_sup, policy)
        else:
            z = _draw_fn_block(take, qv, config, rng, stages[0], policy)
        chain = np.empty((take, spec.d))
        chain[:, 0] = z
        for i in range(spec.d - 1):
            chain[:, i + 1] = _draw_fcn_block(
                chain[:, i], spec.rho[i], qv, config, rng, stages[i + 1], policy
            )
        draws[block_start : block_start + take] = chain
    if qv != 1.0:
        for i, st in enumerate(stages[1:]):
            _warn_rate(st, envelope_like_for_rho(spec.rho[i], qv, policy))
    sig = np.array(spec.sigma)
    draws = draws * sig[None, :] + np.array(spec.m)[None, :]
    return SampleBatch(draws=draws, seed=config.seed, acceptance=stages)


def ks_statistic(draws: np.ndarray, density, quad: QuadratureSpec) -> float:
    """One-sample Kolmogorov-Smirnov statistic against a quadrature-computed CDF.

    The CDF is anchored by one adaptive integral to the smallest draw, then
    accumulated across sorted-draw gaps with a fixed Gauss panel per gap.
    """
    xs = np.sort(np.asarray(draws, dtype=float))
    n = xs.size
    first = cdf(density, float(xs[0]), quad)
    nodes, weights = np.polynomial.legendre.leggauss(15)
    lo = xs[:-1]
    hi = xs[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    vals = density(pts.ravel()).reshape(pts.shape)
    gaps = half * (vals @ weights)
    cdf_vals = first + np.concatenate(([0.0], np.cumsum(gaps)))
    i = np.arange(1, n + 1)
    return float(np.max(np.maximum(np.abs(cdf_vals - i / n), np.abs(cdf_vals - (i - 1) / n))))
