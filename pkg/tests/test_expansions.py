import math

import numpy as np
import pytest

from qnormal.errors import (
    DegenerateDenominator,
    ParamOutOfRange,
    SingularSystem,
)
from qnormal.densities import aw_conditional, f_CN, f_N
from qnormal.expansions import (
    ACoeffTable,
    a_entry_positions,
    cond_var_two_sided,
    conjecture_probe,
    g_closed_k0,
    g_n_coeff,
    g_reduce_kl,
    g_series,
    poisson_mehler_expand,
    solve_A,
    theta_poly,
)
from qnormal.orthopoly import q_hermite, q_hermite_values
from qnormal.qseries import q_number, q_pochhammer
from qnormal.quadrature import QuadratureSpec, integrate

QS = QuadratureSpec(q=0.5, abs_tol=1e-11, rel_tol=1e-10)


def test_g_series_t_zero():
    y, z, q = 0.4, -0.7, 0.5
    for k in range(4):
        for l in range(4):
            want = q_hermite(k, y, q) * q_hermite(l, z, q)
            assert g_series(k, l, y, z, 0.0, q) == pytest.approx(want, rel=1e-14)


def test_g_series_kernel_identity():
    # G(0,0; y, z, rho) is the one-sided kernel f_CN / f_N
    y, z, rho, q = 0.3, -0.2, 0.5, 0.5
    got = g_series(0, 0, y, z, rho, q)
    want = f_CN(y, z, rho, q) / f_N(y, q)
    assert got == pytest.approx(want, abs=1e-8)


def test_g_series_symmetry():
    rng = np.random.default_rng(9)
    for _ in range(10):
        y, z = rng.uniform(-2.0, 2.0, 2)
        t = rng.uniform(-0.6, 0.6)
        assert g_series(2, 1, y, z, t, 0.5) == pytest.approx(
            g_series(1, 2, z, y, t, 0.5), rel=1e-12
        )


def test_g_series_validation():
    with pytest.raises(ParamOutOfRange):
        g_series(-1, 0, 0.1, 0.1, 0.2, 0.5)
    with pytest.raises(ParamOutOfRange):
        g_series(0, 0, 0.1, 0.1, 1.2, 0.5)


def test_g_reduce_examples():
    assert g_reduce_kl(2, 1, 1, 0.4, 0.1, 0.3, 0.5) == pytest.approx(
        g_series(2, 1, 0.4, 0.1, 0.3, 0.5), abs=1e-9
    )
    assert g_reduce_kl(3, 0, 2, 0.2, 0.5, 0.4, 0.3) == pytest.approx(
        g_series(3, 0, 0.2, 0.5, 0.4, 0.3), abs=1e-9
    )
    with pytest.raises(ParamOutOfRange):
        g_reduce_kl(2, 0, 3, 0.1, 0.1, 0.2, 0.5)


def test_g_closed_examples():
    assert g_closed_k0(0, 0.2, 0.5, 0.4, 0.3) == pytest.approx(
        g_series(0, 0, 0.2, 0.5, 0.4, 0.3)
    )
    assert g_closed_k0(1, 0.2, 0.5, 0.4, 0.3) == pytest.approx(
        g_series(1, 0, 0.2, 0.5, 0.4, 0.3), abs=1e-9
    )
    assert g_closed_k0(3, 0.33, -0.41, 0.37, 0.5) == pytest.approx(
        g_series(3, 0, 0.33, -0.41, 0.37, 0.5), abs=1e-8
    )


def test_g_closed_degenerate_denominator():
    # k = 1 has denominator 1 - t^2, which drops below the 1e-12 guard for
    # t inside the open unit interval but close enough to 1
    t = math.sqrt(1.0 - 1e-13)
    with pytest.raises(DegenerateDenominator):
        g_closed_k0(1, 0.2, 0.5, t, 0.0)


def test_recursion_equivalence_sweep():
    # klna0l / expansion / wyraz against the direct series, k + l <= 5
    rng = np.random.default_rng(17)
    for t, q in ((0.3, 0.5), (0.4, -0.4)):
        edge = 2.0 / math.sqrt(1 - q)
        for k in range(0, 6):
            for l in range(0, 6 - k):
                for _ in range(20):
                    y, z = rng.uniform(-0.9 * edge, 0.9 * edge, 2)
                    direct = g_series(k, l, y, z, t, q)
                    if k >= 1:
                        j = int(rng.integers(1, k + 1))
                        assert g_reduce_kl(k, l, j, y, z, t, q) == pytest.approx(
                            direct, abs=1e-8, rel=1e-8
                        )
                    if l == 0:
                        assert g_closed_k0(k, y, z, t, q) == pytest.approx(
                            direct, abs=1e-8, rel=1e-8
                        )


def test_theta_poly_t_zero():
    th = theta_poly(0, 3, 0.0, 0.5)
    want = np.zeros((4, 4))
    want[0, 3] = 1.0
    assert np.allclose(th.coeffs, want, atol=1e-10)
    th = theta_poly(3, 0, 0.0, 0.5)
    assert np.allclose(th.coeffs, want.T, atol=1e-10)


def test_theta_poly_degrees_and_residual():
    # per-variable degree is bounded by k + l; off-grid residual < 1e-7
    th = theta_poly(2, 1, 0.2, 0.5)
    assert th.coeffs.shape == (4, 4)
    rng = np.random.default_rng(31)
    from qnormal.expansions import _GContext

    for _ in range(50):
        y, z = rng.uniform(-2.6, 2.6, 2)
        ctx = _GContext(y, z, 0.2, 0.5)
        assert th.evaluate(y, z) == pytest.approx(ctx.g(2, 1) / ctx.g(0, 0), abs=1e-7)
    # the t = 0 claim "y-degree k, z-degree l" fails for t != 0:
    # Theta(1, 0) = (y - t z)/(1 - t^2) carries a z term
    th10 = theta_poly(1, 0, 0.2, 0.5)
    assert abs(th10.coeffs[0, 1]) > 1e-3


def test_theta10_closed_form():
    t, q = 0.35, 0.5
    th = theta_poly(1, 0, t, q)
    want = np.zeros((2, 2))
    want[1, 0] = 1.0 / (1 - t * t)
    want[0, 1] = -t / (1 - t * t)
    assert np.allclose(th.coeffs, want, atol=1e-12)


def test_gn_dual_routes():
    for n in range(0, 5):
        res = g_n_coeff(n, 0.3, -0.2, 0.5, 0.4, 0.5)
        assert abs(res.difference) < 1e-7
    assert g_n_coeff(0, 0.3, -0.2, 0.5, 0.4, 0.5).quadrature == pytest.approx(1.0, abs=1e-9)


def test_g1_closed_form():
    y, z, r1, r2, q = 0.3, -0.2, 0.5, 0.4, 0.5
    want = (r1 * (1 - r2**2) * y + r2 * (1 - r1**2) * z) / (1 - r1**2 * r2**2)
    res = g_n_coeff(1, y, z, r1, r2, q)
    assert res.quadrature == pytest.approx(want, abs=1e-9)
    assert res.structural == pytest.approx(want, abs=1e-9)


def test_poisson_mehler_expand_reductions():
    x, y, z, q = 0.1, 0.3, -0.2, 0.5
    # N = 0 leaves the base density
    assert poisson_mehler_expand(x, y, z, 0.5, 0.4, q, 0) == pytest.approx(f_N(x, q))
    # rho2 = 0 reduces to one-sided kernel partial sums
    from qnormal.densities import poisson_mehler_partial

    for n_terms in (0, 3, 8):
        got = poisson_mehler_expand(x, y, z, 0.5, 0.0, q, n_terms)
        want = poisson_mehler_partial(x, y, 0.5, q, n_terms)
        assert got == pytest.approx(want, rel=1e-10)


def test_poisson_mehler_expand_convergence():
    # honest N = 12 bound at the moderate point; tighter at smaller rho
    x, y, z, q = 0.1, 0.3, -0.2, 0.5
    aw = aw_conditional(x, y, z, 0.5, 0.4, q)
    assert abs(poisson_mehler_expand(x, y, z, 0.5, 0.4, q, 12) - aw) < 1e-4
    aw_small = aw_conditional(x, y, z, 0.25, 0.2, q)
    assert abs(poisson_mehler_expand(x, y, z, 0.25, 0.2, q, 12) - aw_small) < 1e-6


def test_entry_positions_counts():
    for n in range(1, 7):
        want = ((n + 2) // 2) * ((n + 3) // 2)
        assert len(a_entry_positions(n)) == want


def test_solve_a_n1_closed_forms():
    rl, rr, q = 0.5, 0.4, 0.5
    table = solve_A(1, rl, rr, q)
    d = 1 - rl**2 * rr**2
    assert table.entry(0, 0) == pytest.approx(rl * (1 - rr**2) / d, abs=1e-12)
    assert table.entry(0, 1) == pytest.approx(rr * (1 - rl**2) / d, abs=1e-12)


def test_solve_a_n2_system_vs_closed_form():
    rl, rr, q = 0.5, 0.4, 0.5
    table = solve_A(2, rl, rr, q)
    den = q_pochhammer(rl**2 * rr**2, q, 2)
    a0m1 = rl**2 * q_pochhammer(rr**2, q, 2) / den
    a00 = (1 + q) * rl * rr * (1 - rr**2) * (1 - rl**2) / den
    a01 = rr**2 * q_pochhammer(rl**2, q, 2) / den
    assert table.entry(0, -1) == pytest.approx(a0m1, abs=1e-12)
    assert table.entry(0, 0) == pytest.approx(a00, abs=1e-12)
    assert table.entry(0, 1) == pytest.approx(a01, abs=1e-12)
    assert table.entry(1, 0) == pytest.approx(-rl * rr * a00, abs=1e-12)


def test_solve_a_n3_ratio_relations():
    rl, rr, q = 0.45, -0.5, 0.3
    table = solve_A(3, rl, rr, q)
    for s in (0, 1):
        assert table.entry(1, s) == pytest.approx(
            -q_number(2, q) * rl * rr * table.entry(0, s), rel=1e-10
        )


def test_solve_a_n4_relations():
    rl, rr, q = 0.5, 0.4, 0.5
    table = solve_A(4, rl, rr, q)
    assert len(table.entries) == 9
    q3 = q_number(3, q)
    q2 = q_number(2, q)
    for j in (-1, 1):
        assert table.entry(1, j) == pytest.approx(-q3 * rl * rr * table.entry(0, j), rel=1e-12)
    assert table.entry(1, 0) == pytest.approx(-q2**2 * rl * rr * table.entry(0, 0), rel=1e-12)
    assert table.entry(2, 0) == pytest.approx(
        q * (1 + q) * rl**2 * rr**2 * table.entry(0, 0), rel=1e-12
    )


def test_solve_a_dual_routes():
    for n in (1, 2, 3, 4):
        t1 = solve_A(n, 0.5, 0.4, 0.5, route="linear_system")
        t2 = solve_A(n, 0.5, 0.4, 0.5, route="interpolation_oracle")
        assert t1.provenance == "linear_system"
        assert t2.provenance == "interpolation_oracle"
        for key in t1.entries:
            assert t1.entries[key] == pytest.approx(t2.entries[key], abs=1e-8)


def test_solve_a_guards():
    with pytest.raises(ParamOutOfRange):
        solve_A(5, 0.5, 0.4, 0.5)
    with pytest.raises(ParamOutOfRange):
        solve_A(2, 0.0, 0.4, 0.5)
    with pytest.raises(SingularSystem):
        solve_A(2, 0.99, 0.99, 0.5)
    with pytest.raises(ParamOutOfRange):
        solve_A(2, 0.5, 0.4, 0.5, route="psychic")


def test_regression_identity_against_quadrature():
    # int H_n(x) aw(x|y,z) dx equals the solved table's double sum
    rl, rr, q = 0.5, 0.4, 0.5
    for n in (1, 2, 3, 4):
        table = solve_A(n, rl, rr, q)
        for y, z in [(0.3, -0.2), (-0.8, 0.5)]:
            val = integrate(
                lambda x, n=n: q_hermite_values(n, x, q)[n]
                * aw_conditional(x, y, z, rl, rr, q),
                QS,
            )[0]
            assert val == pytest.approx(table.regression_value(y, z), abs=1e-8)


def test_tower_property_closure():
    # integrating the two-sided expansion against the right-neighbor
    # transition recovers the one-sided coefficient rho_left^n H_n(y)
    rl, rr, q = 0.5, 0.4, 0.5
    for n in (1, 2, 3):
        table = solve_A(n, rl, rr, q)
        for y in (-0.6, 0.9):
            val = integrate(
                lambda z_arr: np.array(
                    [table.regression_value(y, float(z)) for z in np.atleast_1d(z_arr)]
                )
                * f_CN(np.atleast_1d(z_arr), y, rl * rr, q),
                QS,
            )[0]
            assert val == pytest.approx(rl**n * q_hermite(n, y, q), abs=1e-8)


def test_table_serialization():
    table = solve_A(2, 0.5, 0.4, 0.5)
    doc = table.to_doc()
    assert doc["provenance"] == "linear_system"
    assert set(doc["entries"]) == {"0,-1", "0,0", "0,1", "1,0"}
    back = ACoeffTable.from_doc(doc)
    assert back == table


def test_cond_var_protocol():
    res = cond_var_two_sided(0.3, -0.1, 0.5, 0.4, 0.5)
    # the derived scaled form matches the oracle; the raw substitutions do not
    assert "x_right_scaled" in res.matches
    assert "x_right" not in res.matches and "x_left" not in res.matches
    assert res.printed["x_right_scaled"] == pytest.approx(res.oracle, abs=1e-8)
    # one-sided limit: right rho -> 0 gives 1 - rho_left^2
    res0 = cond_var_two_sided(0.3, -0.1, 0.5, 0.0, 0.5)
    assert res0.oracle == pytest.approx(1 - 0.25, abs=1e-8)
    assert res0.printed["x_right_scaled"] == pytest.approx(1 - 0.25, abs=1e-12)


def test_cond_var_q1_limit():
    rl, rr = 0.5, 0.4
    want = (1 - rl**2) * (1 - rr**2) / (1 - rl**2 * rr**2)
    res = cond_var_two_sided(0.3, -0.1, rl, rr, 1.0)
    assert res.oracle == pytest.approx(want, abs=1e-10)
    for v in res.printed.values():
        assert v == pytest.approx(want, abs=1e-12)


def test_conjecture_probe_low_orders():
    # probe ratios reproduce the printed relations for n <= 4
    rep = conjecture_probe(3, 0.5, 0.4, 0.5, scales=(0.8, 1.0))
    assert rep["route"] == "linear_system"
    assert rep["all_factor"]
    q2 = q_number(2, 0.5)
    for s in (0, 1):
        assert rep["cells"][(1, s)]["q_value"] == pytest.approx(-q2, abs=1e-8)
    rep4 = conjecture_probe(4, 0.5, 0.4, 0.5, scales=(0.8, 1.0))
    assert rep4["cells"][(2, 0)]["q_value"] == pytest.approx(0.5 * 1.5, abs=1e-8)


def test_conjecture_probe_n5_report_only():
    rep = conjecture_probe(5, 0.5, 0.4, 0.5, scales=(1.0,))
    assert rep["route"] == "interpolation_oracle"
    assert rep["n"] == 5
    assert set(rep) >= {"cells", "all_factor", "scales", "q"}
    # report emitted; nothing asserted about the hypothesis itself
    with pytest.raises(ParamOutOfRange):
        conjecture_probe(7, 0.5, 0.4, 0.5)
