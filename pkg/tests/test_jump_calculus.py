import numpy as np
import pytest

import oracles
from wrplab.errors import MissingMark, NotAdapted, Unsupported
from wrplab.finite_model import coin_model, is_martingale, new_model
from wrplab.jump_calculus import (
    PredictableFunction,
    compensated_integral,
    compensator_nu,
    defining_property_violation,
    g_norm,
    g_norm2,
    jump_measure,
    predictable_covariation,
    quadratic_covariation,
    realized_marks,
    w_hat,
    w_tilde,
)
from wrplab.random_models import random_factor, random_predictable


def staggered():
    # certain jump of +1 at t=1; at t=2 a jump of +1, -0.5 or none
    m = new_model([0.25, 0.25, 0.5], [[[0, 1, 2]], [[0, 1, 2]], [[0], [1], [2]]])
    X = np.array([[0, 1, 2], [0, 1, 0.5], [0, 1, 1]], dtype=float)
    return m, X


def test_realized_marks_and_measure():
    m, X = staggered()
    marks = realized_marks(m, X)
    assert marks[0][1] == (1.0,) and marks[2][2] is None
    mu = jump_measure(m, X)
    np.testing.assert_array_equal(mu.counting_process()[:, -1], [2, 2, 1])


def test_compensator_by_hand():
    m, X = staggered()
    nu = compensator_nu(m, X)
    assert nu.at(1, 0) == {(1.0,): pytest.approx(1.0)}
    assert nu.at(2, 0) == {(1.0,): pytest.approx(0.25), (-0.5,): pytest.approx(0.25)}
    assert nu.total_mass(2, 0) == pytest.approx(0.5)
    assert len(nu) == 3


def test_compensator_matches_oracle():
    rng = np.random.default_rng(3)
    for _ in range(40):
        f = random_factor(rng, d=int(rng.integers(1, 3)))
        nu = compensator_nu(f.model, f.X)
        for t in range(1, f.model.horizon + 1):
            for a in range(f.model.n_atoms(t - 1)):
                law = oracles.conditional_jump_law(f.model, f.X, t, a)
                got = nu.at(t, a)
                assert got.keys() == law.keys()
                for k in law:
                    assert got[k] == pytest.approx(law[k], abs=1e-14)


def test_not_adapted_rejected():
    m = coin_model()
    with pytest.raises(NotAdapted):
        compensator_nu(m, np.array([[1, 1], [0, -1]]))


def test_w_hat_and_tilde_by_hand():
    m, X = staggered()
    nu = compensator_nu(m, X)
    W = PredictableFunction.from_mark_function(nu, lambda x: x[0] ** 2)
    wh = w_hat(m, W, nu)
    np.testing.assert_allclose(wh[:, 1], 1.0)
    np.testing.assert_allclose(wh[:, 2], 0.25 * 1 + 0.25 * 0.25)
    wt = w_tilde(m, W, X, nu)
    np.testing.assert_allclose(wt[:, 1], 0.0)  # predictable jump: nothing left to compensate
    np.testing.assert_allclose(wt[:, 2], [1 - 0.3125, 0.25 - 0.3125, -0.3125])


def test_compensated_integral_is_martingale():
    rng = np.random.default_rng(4)
    for _ in range(40):
        f = random_factor(rng, d=int(rng.integers(1, 3)))
        nu = compensator_nu(f.model, f.X)
        W = random_predictable(rng, nu, dyadic=False)
        M = compensated_integral(f.model, W, f.X, nu)
        assert is_martingale(f.model, M).ok
        assert defining_property_violation(f.model, W, f.X) <= 1e-12


def test_missing_mark():
    m, X = staggered()
    nu = compensator_nu(m, X)
    W = PredictableFunction.zero(nu)
    del W.values[(2, 0, (-0.5,))]
    with pytest.raises(MissingMark):
        w_hat(m, W, nu)


def test_predictable_function_algebra():
    m, X = staggered()
    nu = compensator_nu(m, X)
    one = PredictableFunction.from_mark_function(nu, lambda x: 1.0)
    two = one + one
    assert all(v == 2.0 for v in two.values.values())
    assert all(v == -3.0 for v in one.scale(-3).values.values())
    rows = two.to_rows()
    assert PredictableFunction.from_rows(rows).values == two.values
    key = next(nu.support())
    unit = PredictableFunction.unit(nu, key)
    assert sum(unit.values.values()) == 1.0


def test_covariations():
    m, X = staggered()
    Y = X * 2
    qc = quadratic_covariation(m, X, Y)
    np.testing.assert_allclose(qc[:, -1], [4.0, 2 + 2 * 0.25, 2.0])
    pc = predictable_covariation(m, X, Y)
    assert is_martingale(m, qc - pc).ok
    with pytest.raises(ValueError):
        quadratic_covariation(m, X[:, :, None].repeat(2, axis=2), Y)


def test_g_norms():
    m, X = staggered()
    nu = compensator_nu(m, X)
    W = PredictableFunction.from_mark_function(nu, lambda x: x[0])
    wt = w_tilde(m, W, X, nu)
    assert g_norm2(m, W, X) == pytest.approx(np.sqrt(np.dot(m.weights, np.sum(wt ** 2, axis=1))))
    assert g_norm(m, W, X, q=1) == pytest.approx(np.dot(m.weights, np.sqrt(np.sum(wt ** 2, axis=1))))
    with pytest.raises(Unsupported):
        g_norm(m, W, X, q=3)
