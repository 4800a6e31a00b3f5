"""Small hand-checkable cases for every engine."""
import math

import numpy as np
import pytest

from wrplab.enlargement import (
    build_product_integrands,
    characteristics_invariance_check,
    embed_integrand,
    iterated_product,
    product_model,
    stack,
    verify_product_representation,
)
from wrplab.errors import EquivalenceFails, NonRefiningFiltration
from wrplab.finite_model import (
    coin_model,
    compensator_increasing,
    conditional_expectation,
    is_martingale,
    martingale_of,
    new_model,
    predictable_projection,
)
from wrplab.jacod import build_tau_model, density_process, measure_q, verify_wrp_theorem
from wrplab.jump_calculus import (
    PredictableFunction,
    compensated_integral,
    compensator_nu,
    g_norm2,
    jump_measure,
    predictable_covariation,
    quadratic_covariation,
    w_hat,
    w_tilde,
)
from wrplab.levy_mc import (
    FactorSpec,
    McScenario,
    StepSpec,
    convergence_study,
    drift_test,
    mc_compensated_integral,
    mc_continuous_integral,
    simulate,
)
from wrplab.wrp_check import (
    has_prp,
    has_wrp,
    martingale_space_dim,
    representable_basis,
    solve_representation,
    weighted_rank,
)

COIN_X = np.array([[0, 1], [0, -1]], dtype=float)
THREE_W = [0.25, 0.25, 0.5]
THREE_X = np.array([[0, 1], [0, 1], [0, -1]], dtype=float)


def three():
    return new_model(THREE_W, [[[0, 1, 2]], [[0], [1], [2]]])


def bernoulli():
    return new_model([0.5, 0.5], [[[0, 1]], [[0], [1]]]), np.array([[0, 1], [0, 0]], dtype=float)


def sure_jump():
    return coin_model(), np.array([[0, 1], [0, 1]], dtype=float)


def fn(nu, f):
    return PredictableFunction.from_mark_function(nu, lambda m: f(m[0]))


# ----------------------------------------------------------------- finite model

def test_model_construction():
    assert coin_model().n == 2
    with pytest.raises(NonRefiningFiltration):
        new_model([0.5, 0.5], [[[0], [1]], [[0, 1]]])
    m = new_model([0.3, 0.3, 0.4], [[[0, 1, 2]], [[0, 1], [2]], [[0], [1], [2]]])
    assert m.horizon == 2


def test_conditional_expectations():
    assert conditional_expectation(coin_model(), np.array([1.0, -1.0]), 0)[0] == 0.0
    m = new_model([0.3, 0.3, 0.4], [[[0, 1, 2]], [[0, 1], [2]]])
    np.testing.assert_allclose(conditional_expectation(m, np.array([1.0, 1.0, 0.0]), 1)[:2], 1.0)


def test_predictable_projection_examples():
    m = coin_model()
    raw = np.array([[0, 1], [0, 0]], dtype=float)  # 1{dX_1 = 1}
    assert predictable_projection(m, raw)[0, 1] == pytest.approx(0.5)
    np.testing.assert_allclose(predictable_projection(m, np.diff(COIN_X, axis=1, prepend=0))[:, 1], 0.0)
    np.testing.assert_allclose(predictable_projection(m, np.full((2, 2), 3.0)), 3.0)


def test_increasing_compensator_examples():
    m = coin_model()
    count = np.array([[0, 1], [0, 0]], dtype=float)
    A = compensator_increasing(m, count)
    assert A[0, 1] == pytest.approx(0.5)
    assert is_martingale(m, count - A).ok
    det = np.array([[0, 2], [0, 2]], dtype=float)
    np.testing.assert_allclose(compensator_increasing(m, det), det)


def test_martingale_examples():
    m = coin_model()
    r = is_martingale(m, COIN_X)
    assert r.ok and r.max_violation == 0.0
    r = is_martingale(m, np.array([[0, 1], [0, 1]], dtype=float))
    assert not r.ok and r.max_violation == pytest.approx(1.0)
    assert is_martingale(m, martingale_of(m, [3.0, 5.0])).ok


# ---------------------------------------------------------------- jump calculus

def test_jump_measure_examples():
    mu = jump_measure(coin_model(), COIN_X)
    assert sorted(mu.entries) == [(0, 1, (1.0,)), (1, 1, (-1.0,))]
    assert len(jump_measure(coin_model(), np.zeros((2, 2))).entries) == 0
    mu3 = jump_measure(three(), THREE_X)
    assert len(mu3.entries) == 3 and sum(a[2] == (1.0,) for a in mu3.entries) == 2


def test_compensator_examples():
    assert compensator_nu(coin_model(), COIN_X).at(1, 0) == {(1.0,): 0.5, (-1.0,): 0.5}
    m, X = sure_jump()
    assert compensator_nu(m, X).at(1, 0) == {(1.0,): 1.0}
    assert compensator_nu(three(), THREE_X).at(1, 0) == {(1.0,): 0.5, (-1.0,): 0.5}


def test_hat_tilde_and_integral_examples():
    m = coin_model()
    nu = compensator_nu(m, COIN_X)
    ident, square = fn(nu, lambda x: x), fn(nu, lambda x: x * x)
    assert w_hat(m, ident, nu)[0, 1] == 0.0
    assert w_hat(m, square, nu)[0, 1] == 1.0
    assert not np.any(w_hat(m, PredictableFunction.zero(nu), nu))
    np.testing.assert_array_equal(w_tilde(m, ident, COIN_X)[:, 1], [1, -1])
    np.testing.assert_array_equal(w_tilde(m, square, COIN_X), 0.0)
    np.testing.assert_array_equal(compensated_integral(m, ident, COIN_X), COIN_X - COIN_X[:, :1])
    np.testing.assert_array_equal(compensated_integral(m, square, COIN_X), 0.0)
    sm, sX = sure_jump()
    snu = compensator_nu(sm, sX)
    np.testing.assert_array_equal(w_tilde(sm, fn(snu, lambda x: 7 * x), sX), 0.0)
    t = three()
    tnu = compensator_nu(t, THREE_X)
    np.testing.assert_allclose(compensated_integral(t, fn(tnu, lambda x: 1.0), THREE_X), 0.0)


def test_covariation_examples():
    m = coin_model()
    assert quadratic_covariation(m, COIN_X, COIN_X)[0, 1] == 1.0
    assert predictable_covariation(m, COIN_X, COIN_X)[0, 1] == pytest.approx(1.0)
    assert not np.any(quadratic_covariation(m, COIN_X, np.ones((2, 2))))
    P = product_model(coin_model(), coin_model())
    X, Y = P.lift(0, COIN_X), P.lift(1, COIN_X)
    np.testing.assert_allclose(predictable_covariation(P.product, X, Y), 0.0, atol=1e-15)


def test_g_norm_examples():
    m = coin_model()
    nu = compensator_nu(m, COIN_X)
    assert g_norm2(m, fn(nu, lambda x: x), COIN_X) == pytest.approx(1.0)
    assert g_norm2(m, PredictableFunction.zero(nu), COIN_X) == 0.0
    assert g_norm2(m, fn(nu, lambda x: x * x), COIN_X) == 0.0


# -------------------------------------------------------------------- WRP/PRP

def test_dimension_examples():
    assert martingale_space_dim(coin_model()) == 1
    assert martingale_space_dim(product_model(coin_model(), coin_model()).product) == 3
    assert martingale_space_dim(new_model([0.5, 0.5], [[[0], [1]], [[0], [1]]])) == 0


def test_representable_span_examples():
    m = coin_model()
    assert weighted_rank(m, representable_basis(m, COIN_X).vectors) == 1
    t = three()
    assert weighted_rank(t, representable_basis(t, THREE_X).vectors) == 1
    assert weighted_rank(m, representable_basis(m, np.zeros((2, 2))).vectors) == 0


def test_wrp_examples():
    assert has_wrp(coin_model(), COIN_X).holds
    r = has_wrp(three(), THREE_X)
    assert not r.holds and (r.repr_dim, r.mart_dim) == (1, 2)
    P = product_model(coin_model(), coin_model())
    r = has_wrp(P.product, stack(P.lift(0, COIN_X), P.lift(1, COIN_X)))
    assert r.holds and r.mart_dim == r.repr_dim == 3


def test_prp_examples():
    assert has_prp(coin_model(), COIN_X).holds
    X = np.array([[0, 1], [0, -1], [0, 0]], dtype=float)
    r = has_prp(three(), X)
    assert not r.holds and (r.prp_dim, r.mart_dim) == (1, 2)


def test_solve_examples():
    m = coin_model()
    res = solve_representation(m, COIN_X, COIN_X)
    assert res.residual == pytest.approx(0, abs=1e-12)
    nu = compensator_nu(m, COIN_X)
    for key in nu.support():
        assert res.W(*key) == pytest.approx(key[2][0])
    t = three()
    sep = martingale_of(t, np.array([1.0, -1.0, 0.0]))
    assert solve_representation(t, sep, THREE_X).residual > 0
    const = solve_representation(m, np.full((2, 2), 4.0), COIN_X)
    assert all(v == pytest.approx(0, abs=1e-12) for v in const.W.values.values())


# ------------------------------------------------------------------ products

def test_product_model_examples():
    P = product_model(coin_model(), coin_model())
    np.testing.assert_allclose(P.product.weights, 0.25)
    Q = product_model(coin_model(), three())
    assert Q.product.n == 6
    np.testing.assert_allclose(Q.product.weights, np.outer([0.5, 0.5], THREE_W).ravel())
    assert is_martingale(Q.product, Q.lift(0, COIN_X)).ok


def test_invariance_examples():
    P = product_model(coin_model(), coin_model())
    assert characteristics_invariance_check(P, COIN_X, 0).ok
    sm, sX = sure_jump()
    P2 = product_model(sm, coin_model())
    assert characteristics_invariance_check(P2, sX, 0).ok
    assert compensator_nu(P2.product, P2.lift(0, sX)).at(1, 0) == {(1.0,): 1.0}


def test_embedding_examples():
    P = product_model(coin_model(), coin_model())
    Z = stack(P.lift(0, COIN_X), P.lift(1, COIN_X))
    nu_z = compensator_nu(P.product, Z)
    WG = P.lift_function(0, fn(compensator_nu(coin_model(), COIN_X), lambda x: x))
    emb = embed_integrand(P.product, WG, nu_z, 1, 0)
    XG = P.lift(0, COIN_X)
    np.testing.assert_allclose(compensated_integral(P.product, emb, Z, nu_z), XG - XG[:, :1])
    zero = embed_integrand(P.product, P.lift_function(0, PredictableFunction.zero(compensator_nu(coin_model(), COIN_X))),
                           nu_z, 1, 0)
    assert not np.any(compensated_integral(P.product, zero, Z, nu_z))
    sm, sX = sure_jump()
    P2 = product_model(sm, coin_model())
    Z2 = stack(P2.lift(0, sX), P2.lift(1, COIN_X))
    nu2 = compensator_nu(P2.product, Z2)
    e2 = embed_integrand(P2.product, P2.lift_function(0, fn(compensator_nu(sm, sX), lambda x: x)), nu2, 1, 0)
    np.testing.assert_allclose(compensated_integral(P2.product, e2, Z2, nu2), 0.0)


def _coin_bernoulli(W=lambda x: x, V=lambda y: y):
    bm, Y = bernoulli()
    P = product_model(coin_model(), bm)
    Wf = fn(compensator_nu(coin_model(), COIN_X), W)
    Vf = fn(compensator_nu(bm, Y), V)
    M = compensated_integral(coin_model(), Wf, COIN_X)
    N = compensated_integral(bm, Vf, Y)
    return P, Y, Wf, Vf, M, N


def test_u_by_hand():
    P, Y, W, V, M, N = _coin_bernoulli()
    pi = build_product_integrands(P, COIN_X, W, M, Y, V, N)
    for (t, g, z), u in pi.U.values.items():
        x, y = z
        assert u == pytest.approx(x * y - x / 2 * (x != 0))
    XG, YG = pi.XG[:, 1, 0], pi.YG[:, 1, 0]
    ut = w_tilde(P.product, pi.U, pi.Z, pi.nu_z)[:, 1]
    np.testing.assert_allclose(ut, XG * YG - XG / 2)
    np.testing.assert_allclose(ut, w_tilde(P.product, pi.WG, pi.XG)[:, 1] * w_tilde(P.product, pi.VG, pi.YG)[:, 1])


def test_u_vanishes_with_v():
    P, Y, W, V, M, N = _coin_bernoulli(V=lambda y: 0.0)
    pi = build_product_integrands(P, COIN_X, W, M, Y, V, N)
    assert all(v == 0 for v in pi.U.values.values())
    for k, g in pi.G.values.items():
        assert g == pytest.approx(pi.NWg1.values[k])


def test_sure_jump_kills_bracket_part():
    sm, sX = sure_jump()
    P = product_model(sm, coin_model())
    W = fn(compensator_nu(sm, sX), lambda x: 3.0)
    V = fn(compensator_nu(coin_model(), COIN_X), lambda y: y)
    M = compensated_integral(sm, W, sX)
    N = compensated_integral(coin_model(), V, COIN_X)
    pi = build_product_integrands(P, sX, W, M, COIN_X, V, N)
    np.testing.assert_allclose(w_tilde(P.product, pi.U, pi.Z, pi.nu_z), 0.0)


def test_four_identities_coin_bernoulli_and_constant():
    P, Y, W, V, M, N = _coin_bernoulli()
    rep = verify_product_representation(P, COIN_X, W, M, Y, V, N,
                                        identities=("par-int", "rep-sq-br", "util", "proj"))
    assert rep.ok and rep.max_violation == pytest.approx(0, abs=1e-15)
    P, Y, W, V, M, N = _coin_bernoulli(W=lambda x: 0.0)
    rep = verify_product_representation(P, COIN_X, W, M + 2, Y, V, N)
    assert rep.ok


def test_iterated_examples():
    coin = coin_model()
    rep = iterated_product([coin] * 3, [COIN_X] * 3)
    assert rep.holds and rep.wrp.mart_dim == rep.wrp.repr_dim == 7
    single = iterated_product([coin], [COIN_X])
    assert single.wrp == has_wrp(coin, COIN_X)
    repaired = np.array([[0, 1], [0, 2], [0, -1]], dtype=float)
    assert iterated_product([coin, three(), coin], [COIN_X, repaired, COIN_X]).holds


# ---------------------------------------------------------------------- Jacod

def _coin_tau(joint):
    base = new_model([0.5, 0.5], [[[0, 1]], [[0], [1]], [[0], [1]]])
    return build_tau_model(base, [1, 2], np.array(joint)), np.array([[0, 1, 1], [0, -1, -1]], dtype=float)


def test_jacod_examples():
    tm, X = _coin_tau([[0.3, 0.2], [0.2, 0.3]])
    np.testing.assert_allclose(tm.tau_law, [0.5, 0.5])
    p = density_process(tm).p
    np.testing.assert_allclose(p[1][:, 0], [1.2, 0.8])
    np.testing.assert_allclose(p[1][:, 1], [0.8, 1.2])
    q = measure_q(tm)
    np.testing.assert_allclose(q.weights, 0.25)
    assert q.weights[0].sum() == pytest.approx(0.5)  # Q[X=+1]
    assert verify_wrp_theorem(tm, X).holds
    with pytest.raises(EquivalenceFails):
        _coin_tau([[0.5, 0.0], [0.2, 0.3]])
    ind, X = _coin_tau([[0.25, 0.25], [0.25, 0.25]])
    np.testing.assert_allclose(density_process(ind).p, 1.0)
    np.testing.assert_allclose(measure_q(ind).weights, 0.25)
    assert verify_wrp_theorem(ind, X).holds


# ------------------------------------------------------------------------- MC

def test_mc_brownian_terminal_mean():
    b = simulate(McScenario(FactorSpec(sigma=1.0), FactorSpec(), dt=1e-2, paths=10_000, seed=1))
    xt = b.grid_values("x")[:, -1]
    assert abs(xt.mean()) <= 3 / math.sqrt(10_000)


def test_mc_poisson_count_and_sure_step():
    sc = McScenario(FactorSpec(rate=1.0, marks=(1.0, -1.0), probs=(0.5, 0.5)),
                    FactorSpec(steps=(StepSpec(0.5, (1.0,), (1.0,)),)), dt=1e-2, paths=10_000, seed=2)
    b = simulate(sc)
    assert abs(b.jump_counts("x").mean() - 1.0) <= 3 * math.sqrt(1.0 / 10_000)
    y = b.grid_values("y")
    np.testing.assert_array_equal(y[:, 50], 1.0)
    np.testing.assert_array_equal(y[:, 49], 0.0)
    assert drift_test(mc_compensated_integral(b, lambda x: x, side="x")[:, -1]).passed
    comp = mc_compensated_integral(b, 1.0, side="x")[:, -1]
    np.testing.assert_allclose(comp, b.jump_counts("x") - 1.0, atol=1e-9)
    assert drift_test(comp).passed
    np.testing.assert_array_equal(mc_compensated_integral(b, lambda v: v, side="y"), 0.0)


def test_mc_continuous_integral_trivial_cases():
    b = simulate(McScenario(FactorSpec(sigma=1.0), FactorSpec(rate=1.0, marks=(1.0,), probs=(1.0,)),
                            dt=1e-2, paths=100))
    np.testing.assert_allclose(mc_continuous_integral(b, 1.0, "x"), b.continuous_part("x"))
    np.testing.assert_array_equal(mc_continuous_integral(b, 1.0, "y"), 0.0)


def test_mc_ladder_examples():
    dts = [2.0 ** -k for k in range(6, 11)]
    pure = McScenario(FactorSpec(rate=2.0, marks=(1.0, -1.0), probs=(0.5, 0.5)),
                      FactorSpec(rate=1.0, marks=(2.0,), probs=(1.0,)), dt=dts[-1], paths=2000, seed=3)
    tab = convergence_study(pure, {1.0: 2.0, -1.0: 3.0}, {2.0: -1.0}, dts=dts)
    assert all(r.residual <= 1e-10 for r in tab.rows)
    bb = McScenario(FactorSpec(sigma=1.0), FactorSpec(sigma=1.0), dt=dts[-1], paths=5000, seed=4)
    tab = convergence_study(bb, 0.0, 0.0, dts=dts)
    assert all(abs(r - 1 / math.sqrt(2)) <= 0.3 / math.sqrt(2) for r in tab.ratios())
    shared = McScenario(FactorSpec(steps=(StepSpec(0.5, (1.0, -1.0), (0.5, 0.5)),)),
                        FactorSpec(steps=(StepSpec(0.5, (2.0, 0.0), (0.25, 0.75)),)),
                        dt=2 ** -4, paths=1000, seed=5)
    tab = convergence_study(shared, lambda x: x, lambda y: y + 1, dts=[2 ** -1, 2 ** -2, 2 ** -4])
    assert all(r.residual <= 1e-12 for r in tab.rows)
    single = convergence_study(shared, lambda x: x, lambda y: y, dts=[2 ** -4])
    assert len(single.rows) == 1 and single.rows[0].ratio is None and single.ratios() == []
