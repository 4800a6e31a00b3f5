"""Progressive enlargement by a random time under Jacod's equivalence hypothesis.

The enlarged space is ``Omega_F x tau_values`` weighted by the joint law.
Its filtration at ``t`` separates the ``F_t`` atoms and, for the default
indicator ``H_t = 1_{tau <= t}``, the values ``tau = u`` with ``u <= t``
while lumping ``{tau > t}``.  The beyond-horizon value is ``math.inf``.

Conditional densities are taken on atoms of ``P^F_t``::

    p_t(u) = P[tau = u | A] / P[tau = u]

and ``L_T = p_0(tau) / p_T(tau)`` defines ``Q`` on ``F_T v sigma(tau)``.
``L`` is only used up to the model horizon; past it ``L`` need not be
uniformly integrable and nothing is defined there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .enlargement import product_model, stack
from .errors import BaseLacksWrp, EquivalenceFails, MarginalMismatch, NontrivialF0
from .finite_model import DEFAULT_TOL, FiniteModel, as_process, canonical_labels, is_martingale, new_model
from .wrp_check import WrpReport, has_wrp

INF = math.inf


def _tau_key(u) -> float:
    if isinstance(u, str) and u.lower() in ("inf", "infinity", "never"):
        return INF
    return float(u)


@dataclass(frozen=True, eq=False)
class TauModel:
    base: FiniteModel
    tau_values: tuple[float, ...]
    joint: np.ndarray  # (n_F, m)
    enlarged: FiniteModel
    cells: np.ndarray  # (n_G, 2): (F outcome, tau index) per enlarged outcome

    @property
    def tau_law(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    def lift(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float)[self.cells[:, 0]]

    def default_process(self) -> np.ndarray:
        """``H_t = 1_{tau <= t}`` on the enlarged space."""
        tau = np.array(self.tau_values)[self.cells[:, 1]]
        times = np.arange(self.base.horizon + 1)
        return (tau[:, None] <= times[None, :]).astype(float)

    def tau_model(self) -> FiniteModel:
        """Model of ``tau`` alone with the filtration generated by ``H``."""
        return new_model(self.tau_law, _tau_partitions(self.tau_values, self.base.horizon),
                         [_tau_name(u) for u in self.tau_values])


def _tau_name(u: float) -> str:
    return "inf" if math.isinf(u) else f"{u:g}"


def _tau_partitions(tau_values, horizon: int) -> list[np.ndarray]:
    rows = []
    for t in range(horizon + 1):
        key = [int(j) if u <= t else -1 for j, u in enumerate(tau_values)]
        rows.append(canonical_labels(np.array(key)))
    return rows


def build_tau_model(base: FiniteModel, tau_values, joint, tol: float = 1e-12) -> TauModel:
    if not base.f0_trivial:
        raise NontrivialF0("the base model must have a trivial F_0")
    taus = tuple(_tau_key(u) for u in tau_values)
    if len(set(taus)) != len(taus):
        raise ValueError("tau values must be distinct")
    for u in taus:
        if not (math.isinf(u) or (u == int(u) and 0 <= u <= base.horizon)):
            raise ValueError(f"tau value {u} is not a grid time or the inf sentinel")
    joint = np.asarray(joint, dtype=float)
    if joint.shape != (base.n, len(taus)):
        raise MarginalMismatch(f"joint law has shape {joint.shape}, expected {(base.n, len(taus))}")
    if np.any(joint < 0):
        raise MarginalMismatch("joint law has negative entries")
    if np.max(np.abs(joint.sum(axis=1) - base.weights)) > tol:
        raise MarginalMismatch("row sums of the joint law differ from the base weights")
    if np.any(joint <= 0):
        i, j = np.argwhere(joint <= 0)[0]
        raise EquivalenceFails(f"P[omega={base.outcomes[i]}, tau={_tau_name(taus[j])}] = 0")
    cells = np.array([(i, j) for i in range(base.n) for j in range(len(taus))], dtype=np.int64)
    rows = []
    for t in range(base.horizon + 1):
        f_lab = base.labels[t, cells[:, 0]]
        tau_lab = np.array([j if taus[j] <= t else -1 for j in cells[:, 1]])
        rows.append(canonical_labels(f_lab * (len(taus) + 1) + tau_lab + 1))
    names = [f"({base.outcomes[i]},{_tau_name(taus[j])})" for i, j in cells]
    enlarged = new_model(joint[cells[:, 0], cells[:, 1]], rows, names)
    return TauModel(base, taus, joint, enlarged, cells)


@dataclass
class DensityProcess:
    p: np.ndarray  # (T+1, n_F, m)

    def path(self, u_index: int) -> np.ndarray:
        return self.p[:, :, u_index].T


def density_process(model: TauModel) -> DensityProcess:
    base = model.base
    law = model.tau_law
    p = np.empty((base.horizon + 1, base.n, len(model.tau_values)))
    for t in range(base.horizon + 1):
        lab = base.labels[t]
        k = base.n_atoms(t)
        mass = np.bincount(lab, weights=base.weights, minlength=k)
        for j in range(len(model.tau_values)):
            cond = np.bincount(lab, weights=model.joint[:, j], minlength=k) / mass
            p[t, :, j] = cond[lab] / law[j]
    if np.any(p <= 0):
        raise EquivalenceFails("conditional law of tau is not equivalent to its law")
    return DensityProcess(p)


def initial_enlargement(model: TauModel) -> FiniteModel:
    """``F_t v sigma(tau)`` on the enlarged space."""
    rows = []
    m = len(model.tau_values)
    for t in range(model.base.horizon + 1):
        rows.append(canonical_labels(model.base.labels[t, model.cells[:, 0]] * m + model.cells[:, 1]))
    return new_model(model.enlarged.weights, rows, model.enlarged.outcomes)


def likelihood_process(model: TauModel) -> np.ndarray:
    """``L_t = p_0(tau) / p_t(tau)`` on the enlarged outcomes, shape ``(n_G, T+1)``."""
    dens = density_process(model)
    i, j = model.cells[:, 0], model.cells[:, 1]
    return (dens.p[0, i, j][None, :] / dens.p[:, i, j]).T


@dataclass
class QReport:
    weights: np.ndarray  # (n_F, m)
    p1: bool
    p2_f: float
    p2_tau: float
    p3_residual: float
    tol: float

    @property
    def p2(self) -> bool:
        return max(self.p2_f, self.p2_tau) <= self.tol

    @property
    def p3(self) -> bool:
        return self.p3_residual <= 1e-12

    @property
    def ok(self) -> bool:
        return self.p1 and self.p2 and self.p3


def measure_q(model: TauModel, horizon: int | None = None, tol: float = DEFAULT_TOL) -> QReport:
    T = model.base.horizon if horizon is None else horizon
    L = likelihood_process(model)[:, T]
    q_flat = model.enlarged.weights * L
    q = np.zeros_like(model.joint)
    q[model.cells[:, 0], model.cells[:, 1]] = q_flat
    lab = model.base.labels[T]
    k = model.base.n_atoms(T)
    q_atoms = np.stack([np.bincount(lab, weights=q[:, j], minlength=k) for j in range(q.shape[1])], axis=1)
    p_atoms = np.bincount(lab, weights=model.base.weights, minlength=k)
    q_f = q_atoms.sum(axis=1)
    q_tau = q_atoms.sum(axis=0)
    return QReport(
        weights=q,
        p1=bool(np.all(q > 0)),
        p2_f=float(np.max(np.abs(q_f - p_atoms))),
        p2_tau=float(np.max(np.abs(q_tau - model.tau_law))),
        p3_residual=float(np.max(np.abs(q_atoms - np.outer(q_f, q_tau)))),
        tol=tol,
    )


@dataclass
class JacodReport:
    base_wrp: WrpReport
    direct: WrpReport
    under_q: WrpReport
    tau_wrp: WrpReport
    product_wrp: WrpReport
    q: QReport
    product_residual: float
    density_martingale: float
    l_martingale: float
    tau_stopping_time: bool

    @property
    def constructive(self) -> bool:
        return (
            self.q.p1 and self.q.p3 and self.tau_wrp.holds and self.product_wrp.holds
            and self.under_q.holds and self.product_residual <= 1e-12
        )

    @property
    def holds(self) -> bool:
        return self.direct.holds and self.constructive


def density_martingale_violation(model: TauModel, tol: float = DEFAULT_TOL) -> float:
    dens = density_process(model)
    return max(is_martingale(model.base, dens.path(j), tol).max_violation
               for j in range(len(model.tau_values)))


def l_martingale_violation(model: TauModel, tol: float = DEFAULT_TOL) -> float:
    L = likelihood_process(model)
    viol = is_martingale(initial_enlargement(model), L, tol).max_violation
    return max(viol, float(np.max(np.abs(L[:, 0] - 1.0))))


def tau_is_stopping_time(model: TauModel) -> bool:
    """Each ``{tau <= t}`` is a union of atoms of ``G_t``."""
    H = model.default_process()
    lab = model.enlarged.labels
    for t in range(model.base.horizon + 1):
        for a in range(model.enlarged.n_atoms(t)):
            vals = H[lab[t] == a, t]
            if vals.min() != vals.max():
                return False
    return True


def verify_wrp_theorem(model: TauModel, X, tol: float = DEFAULT_TOL) -> JacodReport:
    """WRP of ``(X, H)`` on the progressive enlargement, directly under P and via Q."""
    base = model.base
    Xf = as_process(base, X)
    base_rep = has_wrp(base, Xf, tol)
    if not base_rep.holds:
        raise BaseLacksWrp(f"X lacks WRP on the base model ({base_rep.repr_dim} < {base_rep.mart_dim})")
    Z = stack(model.lift(Xf), model.default_process())
    direct = has_wrp(model.enlarged, Z, tol)

    q = measure_q(model, tol=tol)
    enlarged_q = model.enlarged.with_weights(q.weights[model.cells[:, 0], model.cells[:, 1]] / q.weights.sum())
    under_q = has_wrp(enlarged_q, Z, tol)
    # Q makes F_T and tau independent, so the product construction applies
    tau_m = model.tau_model()
    H_tau = (np.array(model.tau_values)[:, None] <= np.arange(base.horizon + 1)[None, :]).astype(float)
    tau_rep = has_wrp(tau_m, H_tau, tol)
    P = product_model(base, tau_m)
    Zp = stack(P.lift(0, Xf), P.lift(1, H_tau))
    prod_rep = has_wrp(P.product, Zp, tol)
    # same outcome ordering as the enlarged space; compare Q with the product law on G_T atoms
    lab = model.enlarged.labels[-1]
    k = model.enlarged.n_atoms(base.horizon)
    q_atoms = np.bincount(lab, weights=enlarged_q.weights, minlength=k)
    prod_atoms = np.bincount(lab, weights=P.product.weights, minlength=k)
    same_filtration = bool(np.array_equal(P.product.labels, model.enlarged.labels))
    residual = float(np.max(np.abs(q_atoms - prod_atoms))) if same_filtration else float("inf")
    return JacodReport(
        base_wrp=base_rep, direct=direct, under_q=under_q, tau_wrp=tau_rep, product_wrp=prod_rep,
        q=q, product_residual=residual,
        density_martingale=density_martingale_violation(model, tol),
        l_martingale=l_martingale_violation(model, tol),
        tau_stopping_time=tau_is_stopping_time(model),
    )
