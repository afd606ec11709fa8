import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qnormal.errors import BadIndexSet, NonCenteredFunction, ParamOutOfRange
from qnormal.densities import aw_conditional, f_CN, f_N
from qnormal.multivariate import (
    IndexSet,
    MVQNormalSpec,
    cond_expect_qhermite,
    contraction_apply,
    covariance,
    experimental_mixed_density,
    gebelein_check,
    joint_density,
    marginal,
    spec_from_dict,
    spec_to_dict,
    two_sided_conditional,
)
from qnormal.orthopoly import hermite_expand, q_hermite, q_hermite_values
from qnormal.qseries import q_factorial
from qnormal.quadrature import QuadratureSpec, double_integrate, integrate

QS = QuadratureSpec(q=0.5, abs_tol=1e-11, rel_tol=1e-10)


def test_spec_validation():
    MVQNormalSpec.standard(3, (0.5, -0.4), 0.5)
    with pytest.raises(ParamOutOfRange):
        MVQNormalSpec.standard(3, (0.5,), 0.5)  # wrong rho length
    with pytest.raises(ParamOutOfRange):
        MVQNormalSpec.standard(2, (1.0,), 0.5)  # |rho| >= 1
    with pytest.raises(ParamOutOfRange):
        MVQNormalSpec(d=2, m=(0.0, 0.0), sigma2=(1.0, -1.0), rho=(0.5,), q=0.5)
    with pytest.raises(ParamOutOfRange):
        # tilted specs must be standardized
        MVQNormalSpec(d=2, m=(1.0, 0.0), sigma2=(1.0, 1.0), rho=(0.5,), q=0.5, t=0.3)


def test_index_set():
    IndexSet((1, 3, 4)).validate(5)
    with pytest.raises(BadIndexSet):
        IndexSet(())
    with pytest.raises(BadIndexSet):
        IndexSet((2, 2))
    with pytest.raises(BadIndexSet):
        IndexSet((0, 1)).validate(3)


def test_joint_density_d1():
    spec = MVQNormalSpec(d=1, m=(0.4,), sigma2=(2.25,), rho=(), q=0.5)
    x = 0.9
    want = f_N((x - 0.4) / 1.5, 0.5) / 1.5
    assert joint_density([x], spec) == pytest.approx(want, rel=1e-14)


def test_joint_density_d2_matches_product():
    spec = MVQNormalSpec.standard(2, (0.6,), 0.5)
    pt = [0.3, -0.2]
    want = f_CN(pt[1], pt[0], 0.6, 0.5) * f_N(pt[0], 0.5)
    assert joint_density(pt, spec) == pytest.approx(want, rel=1e-14)


def test_joint_density_independence():
    # all-zero rho factorizes into a product of one-dimensional densities
    spec = MVQNormalSpec(d=3, m=(0.1, -0.2, 0.0), sigma2=(1.0, 4.0, 0.25), rho=(0.0, 0.0), q=0.4)
    pt = np.array([0.5, -1.0, 0.2])
    want = 1.0
    for i, (m, s2) in enumerate(zip(spec.m, spec.sigma2)):
        s = math.sqrt(s2)
        want *= f_N((pt[i] - m) / s, 0.4) / s
    assert joint_density(pt, spec) == pytest.approx(want, rel=1e-12)


def test_joint_density_outside_box():
    spec = MVQNormalSpec.standard(2, (0.5,), 0.5)
    assert joint_density([5.0, 0.0], spec) == 0.0
    batch = joint_density(np.array([[5.0, 0.0], [0.0, 0.0]]), spec)
    assert batch[0] == 0.0 and batch[1] > 0.0


def test_marginal_identity_and_gaps():
    spec = MVQNormalSpec.standard(4, (0.5, -0.4, 0.3), 0.5)
    assert marginal(spec, [1, 2, 3, 4]) == spec
    mg = marginal(spec, [1, 3])
    assert mg.rho == (pytest.approx(-0.2),)
    single = marginal(spec, [2])
    assert single.d == 1 and single.rho == ()


def test_marginal_quadrature_cross_check():
    # integrating the middle coordinate out of d=3 matches the gap product
    spec3 = MVQNormalSpec.standard(3, (0.5, -0.4), 0.5)
    mg = marginal(spec3, [1, 3])
    for x1, x3 in [(0.4, -0.7), (-1.1, 0.2)]:
        val = integrate(
            lambda x2: np.array(
                [joint_density([[x1, float(u), x3]], spec3)[0] for u in np.atleast_1d(x2)]
            ),
            QS,
        )[0]
        assert val == pytest.approx(joint_density([x1, x3], mg), abs=1e-8)


def test_marginal_tilted():
    spec = MVQNormalSpec.standard(3, (0.5, -0.4), 0.5, t=0.3)
    mg = marginal(spec, [2, 3])
    assert mg.t == pytest.approx(0.3 * 0.5)
    assert mg.rho == (-0.4,)
    assert marginal(spec, [1, 3]).t == pytest.approx(0.3)


@settings(max_examples=60)
@given(data=st.data())
def test_marginalization_commutes(data):
    d = data.draw(st.integers(2, 6))
    rho = data.draw(
        st.lists(st.floats(-0.9, 0.9), min_size=d - 1, max_size=d - 1)
    )
    spec = MVQNormalSpec.standard(d, rho, 0.5)
    keep_a = sorted(
        data.draw(st.sets(st.integers(1, d), min_size=1, max_size=d))
    )
    sub = marginal(spec, keep_a)
    keep_b = sorted(
        data.draw(st.sets(st.integers(1, len(keep_a)), min_size=1, max_size=len(keep_a)))
    )
    lhs = marginal(sub, keep_b)
    composed = [keep_a[i - 1] for i in keep_b]
    rhs = marginal(spec, composed)
    assert lhs.d == rhs.d and lhs.q == rhs.q
    assert np.allclose(lhs.rho, rhs.rho, rtol=1e-12, atol=1e-15)


def test_covariance():
    spec = MVQNormalSpec.standard(2, (0.6,), 0.5)
    cov = covariance(spec)
    assert cov[0, 1] == pytest.approx(0.6)
    spec0 = MVQNormalSpec.standard(3, (0.0, 0.0), 0.5)
    assert np.allclose(covariance(spec0), np.eye(3))
    spec3 = MVQNormalSpec.standard(3, (0.5, -0.4), 0.5)
    assert covariance(spec3)[0, 2] == pytest.approx(-0.2)
    sig = MVQNormalSpec(d=2, m=(0.0, 0.0), sigma2=(4.0, 9.0), rho=(0.5,), q=0.5)
    assert covariance(sig)[0, 1] == pytest.approx(2.0 * 3.0 * 0.5)
    with pytest.raises(ParamOutOfRange):
        covariance(MVQNormalSpec.standard(2, (0.5,), 0.5, t=0.2))


def test_covariance_against_quadrature():
    # E X1 X3 for d=3 via the gap marginal: int int x y g(x, y | ab, q)
    spec3 = MVQNormalSpec.standard(3, (0.5, -0.4), 0.5)
    want = covariance(spec3)[0, 2]
    val, _ = double_integrate(
        lambda x, y: x * y * f_CN(x, y, -0.2, 0.5) * f_N(y, 0.5),
        QuadratureSpec(q=0.5, abs_tol=1e-9, rel_tol=1e-9),
    )
    assert val == pytest.approx(want, abs=1e-7)


def test_cond_expect():
    spec = MVQNormalSpec.standard(4, (0.5, 0.6, -0.3), 0.5)
    ce = cond_expect_qhermite(spec, 2, [1], 0)
    assert ce.coefficient == 1.0
    ce = cond_expect_qhermite(spec, 2, [1], 1)
    assert ce.r == pytest.approx(0.5) and ce.reference == 1
    ce = cond_expect_qhermite(spec, 3, [1], 2)
    assert ce.r == pytest.approx(0.3)
    assert ce.coefficient == pytest.approx(0.09)
    assert ce.conditional_variance == pytest.approx(0.91)
    with pytest.raises(BadIndexSet):
        cond_expect_qhermite(spec, 2, [2], 1)
    with pytest.raises(BadIndexSet):
        cond_expect_qhermite(spec, 9, [1], 1)


def test_cond_expect_quadrature_check():
    # E(H_2(X_i) | nearest = y) = r^2 H_2(y) with r the gap product
    spec = MVQNormalSpec.standard(3, (0.5, 0.6), 0.5)
    r = cond_expect_qhermite(spec, 3, [1], 2).r
    for y in (-0.7, 0.4):
        val = integrate(
            lambda x: q_hermite_values(2, x, 0.5)[2] * f_CN(x, y, r, 0.5), QS
        )[0]
        assert val == pytest.approx(r**2 * q_hermite(2, y, 0.5), abs=1e-8)


def test_contraction():
    assert np.allclose(contraction_apply([1.0, 2.0, 3.0], 1.0, 0.5), [1, 2, 3])
    assert np.allclose(contraction_apply([1.0, 2.0, 3.0], 0.0, 0.5), [1, 0, 0])
    got = contraction_apply([0.0, 2.5, 0.0, 1.0], 0.5, 0.5)
    assert np.allclose(got, [0.0, 1.25, 0.0, 0.125])
    with pytest.raises(ParamOutOfRange):
        contraction_apply([1.0], 1.5, 0.5)


def test_contraction_is_x3_regression():
    # coefficients of x^3 in the H basis, contracted, against quadrature
    q, rho = 0.5, 0.5
    coeffs = hermite_expand([0, 0, 0, 1], q)
    contracted = contraction_apply(coeffs, rho, q)
    for y in (-0.9, 0.3):
        want = sum(c * q_hermite(k, y, q) for k, c in enumerate(contracted))
        val = integrate(lambda x: x**3 * f_CN(x, y, rho, q), QS)[0]
        assert val == pytest.approx(want, abs=1e-8)


@given(
    degree=st.integers(1, 8),
    rho=st.floats(0.05, 0.9),
    q=st.floats(-0.8, 0.8),
)
def test_contraction_preserves_degree(degree, rho, q):
    coeffs = np.zeros(degree + 1)
    coeffs[degree] = 2.0
    out = contraction_apply(coeffs, rho, q)
    assert out[degree] == pytest.approx(2.0 * rho**degree)
    assert out[degree] != 0.0


def test_two_sided_conditional():
    spec = MVQNormalSpec.standard(3, (0.5, -0.3), 0.4)
    dens = two_sided_conditional(spec, 2, 1, 3, 0.2, 0.4)
    # adjacent triple delegates to the explicit conditional directly
    xs = np.linspace(-2.4, 2.4, 9)
    assert np.allclose(dens(xs), aw_conditional(xs, 0.2, 0.4, 0.5, -0.3, 0.4), rtol=1e-12)
    val, _ = integrate(dens, QuadratureSpec(q=0.4, abs_tol=1e-11, rel_tol=1e-10))
    assert val == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(BadIndexSet):
        two_sided_conditional(spec, 2, 2, 3, 0.1, 0.1)


def test_two_sided_right_rho_zero():
    spec = MVQNormalSpec(d=3, m=(0.0,) * 3, sigma2=(1.0,) * 3, rho=(0.5, 0.0), q=0.5)
    dens = two_sided_conditional(spec, 2, 1, 3, 0.2, 0.4)
    xs = np.linspace(-2.0, 2.0, 7)
    assert np.allclose(dens(xs), f_CN(xs, 0.2, 0.5, 0.5), rtol=1e-12)


def test_two_sided_gap_products():
    spec = MVQNormalSpec.standard(5, (0.5, 0.6, -0.4, 0.7), 0.5)
    dens = two_sided_conditional(spec, 3, 1, 5, 0.2, -0.1)
    xs = np.linspace(-1.5, 1.5, 5)
    want = aw_conditional(xs, 0.2, -0.1, 0.5 * 0.6, -0.4 * 0.7, 0.5)
    assert np.allclose(dens(xs), want, rtol=1e-12)


def test_gebelein_examples():
    spec = MVQNormalSpec.standard(2, (0.5,), 0.5)
    lhs, rhs = gebelein_check(spec, 2, [1], [0.0, 1.0])  # g = H_1
    assert lhs == pytest.approx(0.25) and rhs == pytest.approx(0.25)
    lhs, rhs = gebelein_check(spec, 2, [1], [0.0, 0.0, 1.0])  # g = H_2
    assert lhs == pytest.approx(0.0625 * 1.5)
    assert rhs == pytest.approx(0.25 * 1.5)
    assert lhs <= rhs
    with pytest.raises(NonCenteredFunction):
        gebelein_check(spec, 2, [1], [1.0, 1.0])


def test_gebelein_random_polynomials():
    rng = np.random.default_rng(41)
    for _ in range(100):
        q = rng.uniform(-0.8, 0.8)
        rho = rng.uniform(0.02, 0.98) * rng.choice([-1, 1])
        spec = MVQNormalSpec.standard(2, (rho,), q)
        coeffs = np.zeros(7)
        coeffs[1:] = rng.normal(size=6)
        lhs, rhs = gebelein_check(spec, 2, [1], coeffs)
        assert lhs <= rhs + 1e-12


def test_markov_consistency():
    # transition composition collapses to the product correlation
    rho1, rho2, q = 0.5, 0.7, 0.4
    spec = QuadratureSpec(q=q, abs_tol=1e-11, rel_tol=1e-10)
    rng = np.random.default_rng(13)
    edge = 2.0 / math.sqrt(1 - q)
    for _ in range(10):
        x, z = rng.uniform(-0.9 * edge, 0.9 * edge, 2)
        val = integrate(lambda y: f_CN(x, y, rho1, q) * f_CN(y, z, rho2, q), spec)[0]
        assert val == pytest.approx(f_CN(x, z, rho1 * rho2, q), abs=1e-8)


def test_projection_identity():
    # int H_n(x) f_CN(x | y) dx = rho^n H_n(y)
    q, rho, y = 0.5, 0.6, 0.4
    for n in range(0, 9):
        val = integrate(
            lambda x, n=n: q_hermite_values(n, x, q)[n] * f_CN(x, y, rho, q), QS
        )[0]
        assert val == pytest.approx(rho**n * q_hermite(n, y, q), abs=1e-8)


def test_serialization_round_trip():
    spec = MVQNormalSpec(d=3, m=(0.1, 0.0, -0.2), sigma2=(1.0, 2.0, 0.5),
                         rho=(0.4, -0.3), q=0.6)
    assert spec_from_dict(spec_to_dict(spec)) == spec
    tilted = MVQNormalSpec.standard(2, (0.5,), 0.5, t=0.3)
    doc = spec_to_dict(tilted)
    assert doc["t"] == 0.3
    assert spec_from_dict(doc) == tilted


def test_experimental_mixed_families():
    spec = MVQNormalSpec.standard(2, (0.5,), 0.5, t=0.4)
    qspec = QuadratureSpec(q=0.5, abs_tol=1e-8, rel_tol=1e-8)
    for family in ("phi-tau", "tau"):
        val, _ = double_integrate(
            lambda x, y: experimental_mixed_density(
                np.column_stack([np.broadcast_to(y, np.shape(x)), np.atleast_1d(x)]),
                spec,
                family,
            ),
            qspec,
        )
        assert val == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ParamOutOfRange):
        experimental_mixed_density([0.0, 0.0], spec, "other")
    with pytest.raises(ParamOutOfRange):
        experimental_mixed_density([0.0, 0.0], MVQNormalSpec.standard(2, (0.5,), 0.5), "tau")
