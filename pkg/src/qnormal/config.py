"""Physical defaults (tolerances, grid sizes, truncation) in one place.

The QNORM_CONFIG environment variable may point to a JSON file overriding
any field; CLI flags override both.  Resolved values are recorded in every
run manifest.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, replace

from .errors import ParamOutOfRange
from .qseries import TruncationPolicy
from .quadrature import QuadratureSpec

__all__ = ["Defaults", "load_defaults"]

ENV_VAR = "QNORM_CONFIG"


@dataclass(frozen=True)
class Defaults:
    tail_tol: float = 1e-15
    min_terms: int = 8
    max_terms: int = 20000
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 4000
    grid_size: int = 2048
    max_rejections: int = 1_000_000
    points: int = 201

    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(
            tail_tol=self.tail_tol, min_terms=self.min_terms, max_terms=self.max_terms
        )

    def quad_spec(self, q: float) -> QuadratureSpec:
        transform = "none" if q == 1.0 else "trigonometric"
        return QuadratureSpec(
            q=q,
            abs_tol=self.abs_tol,
            rel_tol=self.rel_tol,
            max_subdivisions=self.max_subdivisions,
            transform=transform,
        )

    def as_dict(self) -> dict:
        return asdict(self)


def load_defaults() -> Defaults:
    """Defaults, with overrides from the QNORM_CONFIG JSON file when set."""
    base = Defaults()
    path = os.environ.get(ENV_VAR)
    if not path:
        return base
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParamOutOfRange(f"cannot read config file {path!r}: {exc}") from exc
    unknown = set(doc) - set(base.as_dict())
    if unknown:
        raise ParamOutOfRange(f"unknown config keys in {path!r}: {sorted(unknown)}")
    return replace(base, **doc)
