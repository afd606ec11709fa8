import math

import numpy as np
import pytest

from qnormal.errors import ParamOutOfRange, ToleranceNotMet
from qnormal.densities import f_CN, f_N
from qnormal.orthopoly import q_hermite_values
from qnormal.qseries import q_factorial
from qnormal.quadrature import QuadratureSpec, cdf, double_integrate, integrate


def _spec(q, abs_tol=1e-11, rel_tol=1e-10, **kw):
    return QuadratureSpec(q=q, abs_tol=abs_tol, rel_tol=rel_tol, **kw)


def test_spec_validation():
    with pytest.raises(ParamOutOfRange):
        QuadratureSpec(q=0.5, abs_tol=0.0)
    with pytest.raises(ParamOutOfRange):
        QuadratureSpec(q=0.5, max_subdivisions=0)
    with pytest.raises(ParamOutOfRange):
        QuadratureSpec(q=0.5, transform="weird")
    # q = 1 silently uses the dedicated unbounded-support path
    assert QuadratureSpec(q=1.0).transform == "none"


def test_density_normalization():
    val, est = integrate(lambda x: f_N(x, 0.5), _spec(0.5, abs_tol=1e-12, rel_tol=1e-12))
    assert val == pytest.approx(1.0, abs=1e-10)
    assert est < 1e-10


def test_q_hermite_norms():
    # int H_3^2 f_N = [3]_q! = 2.625 at q = 0.5
    spec = _spec(0.5)
    val, _ = integrate(lambda x: q_hermite_values(3, x, 0.5)[3] ** 2 * f_N(x, 0.5), spec)
    assert val == pytest.approx(2.625, abs=1e-9)
    val, _ = integrate(
        lambda x: q_hermite_values(4, x, 0.5)[2] * q_hermite_values(4, x, 0.5)[4] * f_N(x, 0.5),
        spec,
    )
    assert abs(val) < 1e-10


def _catalan(n):
    return math.comb(2 * n, n) // (n + 1)


def test_semicircle_catalan_moments():
    # oracle self-test: even moments of the q = 0 law are Catalan numbers
    spec = _spec(0.0, abs_tol=1e-12, rel_tol=1e-12)
    for n in range(0, 11):
        val, _ = integrate(lambda x, n=n: x ** (2 * n) * f_N(x, 0.0), spec)
        assert val == pytest.approx(_catalan(n), abs=1e-10)


def test_error_estimates_conservative():
    # on the self-test set the true error should not exceed the estimate in
    # at least 95% of cases
    spec = _spec(0.0, abs_tol=1e-9, rel_tol=1e-9)
    good = 0
    cases = 0
    for n in range(0, 11):
        val, est = integrate(lambda x, n=n: x ** (2 * n) * f_N(x, 0.0), spec)
        cases += 1
        if abs(val - _catalan(n)) <= max(est, 1e-15):
            good += 1
    assert good / cases >= 0.95


def test_raw_transform_path():
    spec = _spec(0.0, transform="none")
    val, _ = integrate(lambda x: np.where(np.abs(x) <= 2.0, x * x, 0.0) * f_N(x, 0.0), spec)
    assert val == pytest.approx(1.0, abs=1e-9)


def test_tolerance_not_met():
    # a needle the panel rule cannot resolve within one split
    spec = QuadratureSpec(q=0.0, abs_tol=1e-14, rel_tol=1e-14, max_subdivisions=1)
    with pytest.raises(ToleranceNotMet) as err:
        integrate(lambda x: np.exp(-np.abs(x) * 50.0) * 50.0, spec)
    assert err.value.value is not None
    assert err.value.estimate is not None


def test_cdf_basics():
    spec = _spec(0.5)
    dens = lambda x: f_N(x, 0.5)
    edge = 2.0 / math.sqrt(0.5)
    assert cdf(dens, -edge, spec) == 0.0
    assert cdf(dens, edge, spec) == pytest.approx(1.0, abs=1e-9)
    assert cdf(lambda x: f_N(x, 0.0), 0.0, _spec(0.0)) == pytest.approx(0.5, abs=1e-10)
    grid = np.linspace(-edge, edge, 9)
    vals = [cdf(dens, float(x), spec) for x in grid]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_q1_fixed_rule():
    spec = _spec(1.0)
    val, est = integrate(lambda x: f_N(x, 1.0), spec)
    assert val == pytest.approx(1.0, abs=1e-12)
    val, _ = integrate(lambda x: x * x * f_N(x, 1.0), spec)
    assert val == pytest.approx(1.0, abs=1e-10)
    assert cdf(lambda x: f_N(x, 1.0), 0.0, spec) == pytest.approx(0.5, abs=1e-9)


def test_double_integrate_joint():
    spec = _spec(0.5, abs_tol=1e-9, rel_tol=1e-9)
    rho = 0.6

    def joint(x, y):
        return f_CN(x, y, rho, 0.5) * f_N(y, 0.5)

    val, est = double_integrate(joint, spec)
    assert val == pytest.approx(1.0, abs=1e-8)
    val, _ = double_integrate(lambda x, y: x * y * joint(x, y), spec)
    assert val == pytest.approx(rho, abs=1e-8)
    # int int H_2(x) H_2(y) d(joint) = rho^2 [2]_q!
    val, _ = double_integrate(
        lambda x, y: q_hermite_values(2, x, 0.5)[2] * q_hermite_values(2, y, 0.5)[2] * joint(x, y),
        spec,
    )
    assert val == pytest.approx(rho**2 * q_factorial(2, 0.5), abs=1e-7)
