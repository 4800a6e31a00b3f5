import numpy as np
import pytest

import oracles
from wrplab.enlargement import (
    IDENTITIES,
    build_product_integrands,
    characteristics_invariance_check,
    embed_integrand,
    iterated_product,
    lifted_martingale_checks,
    product_model,
    stack,
    verify_product_representation,
)
from wrplab.errors import FactorLacksWrp, RepresentationMismatch
from wrplab.finite_model import coin_model, is_martingale, new_model
from wrplab.io import model_from_dict
from wrplab.jump_calculus import PredictableFunction, compensated_integral, compensator_nu
from wrplab.random_models import random_factor, random_predictable
from wrplab.scenarios import BERNOULLI, COIN, COLLISION, STEP_X, STEP_Y
from wrplab.wrp_check import has_wrp


def _factor(doc, name):
    m, p = model_from_dict(doc)
    return m, p[name]


def test_product_structure():
    f, h = coin_model(), new_model([0.2, 0.8], [[[0, 1]], [[0], [1]]])
    P = product_model(f, h)
    assert P.product.n == 4
    np.testing.assert_allclose(P.product.weights, [0.1, 0.4, 0.1, 0.4])
    assert P.coords.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    assert P.product.n_atoms(1) == 4


def test_lift_freezes_short_factor():
    f = coin_model()
    m, Y = _factor(STEP_Y, "Y")
    P = product_model(f, m)
    assert P.product.horizon == 2
    X = np.array([[0, 1], [0, -1]], dtype=float)
    XG = P.lift(0, X)
    np.testing.assert_array_equal(XG[:, 2], XG[:, 1])
    inc = P.lift_increments(0, np.array([[0, 5.0], [0, 7.0]]))
    np.testing.assert_array_equal(inc[:, 2], 0.0)


def test_coin_times_bernoulli_identities():
    fm, X = _factor(COIN, "X")
    hm, Y = _factor(BERNOULLI, "Y")
    P = product_model(fm, hm)
    W = PredictableFunction.from_mark_function(compensator_nu(fm, X), lambda x: 2.0 * x[0] + 1)
    V = PredictableFunction.from_mark_function(compensator_nu(hm, Y), lambda y: -1.0)
    M = 1 + compensated_integral(fm, W, X)
    N = 0.5 + compensated_integral(hm, V, Y)
    rep = verify_product_representation(P, X, W, M, Y, V, N)
    assert set(rep.identities) == set(IDENTITIES)
    assert rep.ok and rep.max_violation <= 1e-12 and rep.first_failure is None
    assert all(lifted_martingale_checks(P, M, N))


def test_product_integrands_match_oracle_and_hat_identity():
    rng = np.random.default_rng(12)
    for _ in range(25):
        f, h = random_factor(rng), random_factor(rng, d=2)
        P = product_model(f.model, h.model)
        W = random_predictable(rng, compensator_nu(f.model, f.X))
        V = random_predictable(rng, compensator_nu(h.model, h.X))
        M = 0.5 + compensated_integral(f.model, W, f.X)
        N = -1 + compensated_integral(h.model, V, h.X)
        pi = build_product_integrands(P, f.X, W, M, h.X, V, N)
        # U compensates to -What * Vhat on every product atom
        for t in range(1, P.product.horizon + 1):
            for g, i in enumerate(P.product.representative(t - 1)):
                row = pi.nu_z.at(t, g)
                u_hat = sum(pi.U(t, g, z) * p for z, p in row.items())
                assert u_hat == pytest.approx(-pi.what[i, t] * pi.vhat[i, t], abs=1e-12)
        assert oracles.product_increment_residual(P, f.X, W, 0.5, h.X, V, -1.0) <= 1e-12
        assert is_martingale(P.product, pi.MG * pi.NG).ok


def test_representation_mismatch():
    fm, X = _factor(COIN, "X")
    hm, Y = _factor(BERNOULLI, "Y")
    P = product_model(fm, hm)
    W = PredictableFunction.from_mark_function(compensator_nu(fm, X), lambda x: x[0])
    V = PredictableFunction.from_mark_function(compensator_nu(hm, Y), lambda y: 1.0)
    M = compensated_integral(fm, W, X)
    assert np.any(M != 0)
    N = compensated_integral(hm, V, Y)
    with pytest.raises(RepresentationMismatch):
        build_product_integrands(P, X, W, M * 2, Y, V, N)


def test_embed_integrand_zeroes_other_block():
    fm, X = _factor(COIN, "X")
    hm, Y = _factor(BERNOULLI, "Y")
    P = product_model(fm, hm)
    Z = stack(P.lift(0, X), P.lift(1, Y))
    nu_z = compensator_nu(P.product, Z)
    WG = P.lift_function(0, PredictableFunction.from_mark_function(compensator_nu(fm, X), lambda x: x[0]))
    emb = embed_integrand(P.product, WG, nu_z, 1, side=0)
    for (t, a, z), v in emb.values.items():
        assert v == (0.0 if z[0] == 0 else z[0])


def test_invariance_with_unequal_horizons():
    fm, X = _factor(STEP_X, "X")
    P = product_model(coin_model(), fm)
    inv = characteristics_invariance_check(P, X, 1)
    assert inv.ok and inv.support_match
    inv0 = characteristics_invariance_check(P, np.array([[0, 1], [0, -1]], dtype=float), 0)
    assert inv0.ok


def test_iterated_product_and_factor_check():
    coin = coin_model()
    X = np.array([[0, 1], [0, -1]], dtype=float)
    rep = iterated_product([coin] * 3, [X] * 3)
    assert rep.holds and rep.wrp.mart_dim == 7 and len(rep.invariance) == 3
    cm, CX = _factor(COLLISION, "X")
    with pytest.raises(FactorLacksWrp):
        iterated_product([coin, cm], [X, CX])


def test_product_wrp_fails_when_factor_fails():
    cm, CX = _factor(COLLISION, "X")
    P = product_model(cm, coin_model())
    Z = stack(P.lift(0, CX), P.lift(1, np.array([[0, 1], [0, -1]], dtype=float)))
    assert not has_wrp(P.product, Z).holds
