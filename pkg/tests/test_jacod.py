import math

import numpy as np
import pytest

from wrplab.errors import BaseLacksWrp, EquivalenceFails, MarginalMismatch, NontrivialF0
from wrplab.finite_model import is_martingale, new_model
from wrplab.io import model_from_dict
from wrplab.jacod import (
    build_tau_model,
    density_martingale_violation,
    density_process,
    initial_enlargement,
    l_martingale_violation,
    likelihood_process,
    measure_q,
    tau_is_stopping_time,
    verify_wrp_theorem,
)
from wrplab.scenarios import COIN_T2, COLLISION, JUMP_TIME


def coin_tau(joint=((0.3, 0.2), (0.2, 0.3)), values=(1, 2)):
    base, procs = model_from_dict(COIN_T2)
    return build_tau_model(base, list(values), np.array(joint)), procs["X"]


def test_density_by_hand():
    tm, _ = coin_tau()
    p = density_process(tm).p
    np.testing.assert_allclose(p[0], 1.0)
    # P[tau=1 | up] = 0.6, unconditional 0.5
    np.testing.assert_allclose(p[1][0], [1.2, 0.8])
    np.testing.assert_allclose(p[1][1], [0.8, 1.2])
    np.testing.assert_allclose(density_process(tm).path(0)[0], [1.0, 1.2, 1.2])
    assert density_martingale_violation(tm) <= 1e-15


def test_q_is_product_of_marginals():
    tm, _ = coin_tau()
    q = measure_q(tm)
    np.testing.assert_allclose(q.weights, 0.25)
    assert q.p1 and q.p2 and q.p3 and q.ok
    assert q.p3_residual <= 1e-12


def test_likelihood_is_martingale():
    tm, _ = coin_tau()
    L = likelihood_process(tm)
    assert L.shape[0] == tm.enlarged.n
    assert l_martingale_violation(tm) <= 1e-12
    G0 = initial_enlargement(tm)
    assert is_martingale(G0, L).ok


def test_enlarged_filtration_and_default_process():
    tm, _ = coin_tau(joint=((0.25, 0.125, 0.125), (0.25, 0.125, 0.125)), values=(1, 2, "inf"))
    assert math.isinf(tm.tau_values[-1])
    H = tm.default_process()
    assert H.shape == (tm.enlarged.n, tm.enlarged.horizon + 1)
    assert set(np.unique(H)) <= {0.0, 1.0}
    assert tau_is_stopping_time(tm)
    np.testing.assert_allclose(tm.tau_law, [0.5, 0.25, 0.25])
    # independence: density identically one
    np.testing.assert_allclose(density_process(tm).p, 1.0)


def test_wrp_theorem_holds_directly_and_via_q():
    for tm, X in (coin_tau(), _hits_jump()):
        rep = verify_wrp_theorem(tm, X)
        assert rep.holds and rep.constructive
        assert rep.direct.holds and rep.under_q.holds and rep.product_wrp.holds
        assert rep.direct.mart_dim == rep.under_q.mart_dim
        assert rep.product_residual <= 1e-12


def _hits_jump():
    base, procs = model_from_dict(JUMP_TIME)
    joint = np.array([[8, 1, 1], [8, 1, 1], [1, 8, 1], [1, 8, 1]]) / 40.0
    return build_tau_model(base, [1, 2, "inf"], joint), procs["X"]


def test_precondition_errors():
    base, procs = model_from_dict(COIN_T2)
    with pytest.raises(MarginalMismatch):
        build_tau_model(base, [1, 2], np.array([[0.4, 0.2], [0.2, 0.2]]))
    with pytest.raises(EquivalenceFails):
        build_tau_model(base, [1, 2], np.array([[0.5, 0.0], [0.25, 0.25]]))
    nontriv = new_model([0.5, 0.5], [[[0], [1]], [[0], [1]]])
    with pytest.raises(NontrivialF0):
        build_tau_model(nontriv, [1], np.array([[0.5], [0.5]]))
    cm, cp = model_from_dict(COLLISION)
    tm = build_tau_model(cm, [1], cm.weights[:, None])
    with pytest.raises(BaseLacksWrp):
        verify_wrp_theorem(tm, cp["X"])
