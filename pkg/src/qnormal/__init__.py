"""Compactly supported q-deformed normal distributions.

Densities, orthogonal polynomial families, Markov-chain structure, kernel
expansions, exact rejection sampling, and a quadrature oracle that turns
every identity of the family into a machine-checkable verification.
"""

__version__ = "0.1.0"

from .qseries import (  # noqa: F401
    QParam,
    TruncationPolicy,
    q_number,
    q_factorial,
    q_binomial,
    q_pochhammer,
    w_bound,
)
from .orthopoly import (  # noqa: F401
    q_hermite,
    continuous_q_hermite,
    al_salam_chihara,
    chebyshev_u,
    hermite_prob,
    linearize,
    hermite_expand,
    hermite_to_monomial,
    q_hermite_bound_check,
)
from .densities import (  # noqa: F401
    Support,
    CondParams,
    f_N,
    f_CN,
    w_factor,
    phi_gen,
    tau_gen,
    f_MN,
    f_MCN,
    aw_conditional,
    envelope_constant,
)
from .quadrature import QuadratureSpec, integrate, cdf, double_integrate  # noqa: F401
