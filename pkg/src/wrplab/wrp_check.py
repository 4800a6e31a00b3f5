"""Exact WRP / PRP decisions on finite models by weighted rank computations.

The martingales of a finite model are determined by their terminal
values, so representability reduces to a span question in
``L^2(P_T, P)``: the space ``{xi : E[xi | P_0] = 0}`` has dimension
``#atoms(P_T) - #atoms(P_0)`` and WRP holds iff the terminal values of
the compensated integrals of all unit predictable functions span it.
In discrete time the continuous martingale part vanishes, and the
space of representable terminal values is finite-dimensional and hence
closed, so no limiting argument is needed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotAMartingale
from .finite_model import (
    DEFAULT_TOL,
    FiniteModel,
    as_process,
    is_martingale,
    jump_process,
)
from .jump_calculus import (
    CompensatorTable,
    Key,
    PredictableFunction,
    compensated_integral,
    compensator_nu,
)

RANK_RTOL = 1e-9


@dataclass
class RepresentationBasis:
    vectors: np.ndarray  # (k, n) terminal values
    labels: list[Key]
    nu: CompensatorTable

    @property
    def size(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class WrpReport:
    holds: bool
    mart_dim: int
    repr_dim: int

    @property
    def gap(self) -> int:
        return self.mart_dim - self.repr_dim


@dataclass(frozen=True)
class PrpReport:
    holds: bool
    mart_dim: int
    prp_dim: int


@dataclass
class RepresentationResult:
    W: PredictableFunction
    residual: float
    pathwise_error: float
    coefficients: np.ndarray


def weighted_rank(model: FiniteModel, vectors: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Rank in ``L^2(P)``; singular values below ``rtol * max(s_max, 1)`` count as zero."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    if vectors.size == 0:
        return 0
    s = np.linalg.svd(vectors * np.sqrt(model.weights)[None, :], compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > rtol * max(s[0], 1.0)))


def martingale_space_dim(model: FiniteModel) -> int:
    return model.n_atoms(model.horizon) - model.n_atoms(0)


def representable_basis(model: FiniteModel, Z, check: bool = True,
                        tol: float = DEFAULT_TOL) -> RepresentationBasis:
    """Terminal values of ``1_{(t, A, x)} * (mu^Z - nu^Z)`` for every support point."""
    Za = as_process(model, Z)
    nu = compensator_nu(model, Za)
    labels = list(nu.support())
    vectors = np.zeros((len(labels), model.n))
    for k, key in enumerate(labels):
        path = compensated_integral(model, PredictableFunction.unit(nu, key), Za, nu)
        if check:
            rep = is_martingale(model, path, tol)
            if not rep.ok:
                raise AssertionError(f"compensated unit integral {key} is not a martingale")
        vectors[k] = path[:, -1]
    return RepresentationBasis(vectors, labels, nu)


def has_wrp(model: FiniteModel, Z, tol: float = DEFAULT_TOL) -> WrpReport:
    basis = representable_basis(model, Z, check=False, tol=tol)
    mart = martingale_space_dim(model)
    rank = weighted_rank(model, basis.vectors)
    return WrpReport(rank == mart, mart, rank)


def _require_martingale(model: FiniteModel, X, tol: float) -> np.ndarray:
    arr = as_process(model, X)
    for i in range(arr.shape[2]):
        rep = is_martingale(model, arr[:, :, i], tol)
        if not rep.ok:
            raise NotAMartingale(f"coordinate {i} violates the martingale property by {rep.max_violation:.3e}")
    return arr


def prp_vectors(model: FiniteModel, X) -> np.ndarray:
    """Terminal values of ``K . X`` for unit predictable ``K`` = 1_A e_i at time t."""
    arr = as_process(model, X)
    dX = as_process(model, jump_process(model, arr))
    rows = []
    for t in range(1, model.horizon + 1):
        for members in model.atoms(t - 1):
            for i in range(arr.shape[2]):
                v = np.zeros(model.n)
                v[members] = dX[members, t, i]
                rows.append(v)
    return np.array(rows) if rows else np.zeros((0, model.n))


def has_prp(model: FiniteModel, X, tol: float = DEFAULT_TOL) -> PrpReport:
    arr = _require_martingale(model, X, tol)
    mart = martingale_space_dim(model)
    rank = weighted_rank(model, prp_vectors(model, arr))
    return PrpReport(rank == mart, mart, rank)


def solve_representation(model: FiniteModel, N, Z, tol: float = DEFAULT_TOL) -> RepresentationResult:
    """Weighted least-squares integrand for ``N_T - N_0`` against the WRP basis.

    The returned ``W`` is the minimum-norm solution; ``pathwise_error`` is
    ``max |N_0 + W * (mu^Z - nu^Z) - N|`` over all outcomes and times.
    """
    N = np.asarray(N, dtype=float)
    if N.ndim != 2:
        raise ValueError("N must be a scalar process")
    rep = is_martingale(model, N, tol)
    if not rep.ok:
        raise NotAMartingale(f"N violates the martingale property by {rep.max_violation:.3e}")
    Za = as_process(model, Z)
    basis = representable_basis(model, Za, check=False)
    target = N[:, -1] - N[:, 0]
    sw = np.sqrt(model.weights)
    if basis.size:
        coef, *_ = np.linalg.lstsq((basis.vectors * sw).T, target * sw, rcond=None)
        fitted = coef @ basis.vectors
    else:
        coef = np.zeros(0)
        fitted = np.zeros(model.n)
    residual = float(np.sqrt(np.dot(model.weights, (fitted - target) ** 2)))
    W = PredictableFunction.zero(basis.nu)
    for key, c in zip(basis.labels, coef):
        W.values[key] = float(c)
    rebuilt = N[:, :1] + compensated_integral(model, W, Za, basis.nu)
    return RepresentationResult(W, residual, float(np.max(np.abs(rebuilt - N))), coef)
