"""Finite probability spaces with discrete-time filtrations.

A filtration is stored as one row of integer atom labels per time, so
``labels[t, i]`` is the index of the atom of ``P_t`` containing outcome
``i``.  Atom indices are canonical: atoms are numbered in order of their
first outcome.  Every conditional expectation is then a weighted average
over an atom.

Processes are plain arrays of shape ``(n_outcomes, T + 1)`` for scalar
processes or ``(n_outcomes, T + 1, d)`` for ``R^d``-valued ones.  In
discrete time the filtration is automatically right-continuous and every
time point is predictable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BadPartition,
    BadWeights,
    EmptyAtom,
    NonRefiningFiltration,
    NotAdapted,
    NotIncreasing,
)

DEFAULT_TOL = 1e-10


def canonical_labels(row: np.ndarray) -> np.ndarray:
    """Renumber atom labels in order of first appearance."""
    row = np.asarray(row)
    _, first, inverse = np.unique(row, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse.ravel()].astype(np.int64)


@dataclass(frozen=True, eq=False)
class FiniteModel:
    outcomes: tuple[str, ...]
    weights: np.ndarray
    labels: np.ndarray

    @property
    def n(self) -> int:
        return len(self.outcomes)

    @property
    def horizon(self) -> int:
        return self.labels.shape[0] - 1

    @property
    def f0_trivial(self) -> bool:
        return self.n_atoms(0) == 1

    def n_atoms(self, t: int) -> int:
        return int(self.labels[t].max()) + 1

    def atoms(self, t: int) -> list[np.ndarray]:
        """Outcome indices of each atom of ``P_t``, in canonical order."""
        row = self.labels[t]
        return [np.flatnonzero(row == a) for a in range(self.n_atoms(t))]

    def atom_of(self, t: int, outcome: int) -> int:
        return int(self.labels[t, outcome])

    def atom_mass(self, t: int) -> np.ndarray:
        mass = np.bincount(self.labels[t], weights=self.weights, minlength=self.n_atoms(t))
        if np.any(mass <= 0):
            raise EmptyAtom(f"atom with zero mass at t={t}")
        return mass

    def representative(self, t: int) -> np.ndarray:
        """First outcome of every atom of ``P_t``."""
        _, first = np.unique(self.labels[t], return_index=True)
        return first

    def partition(self, t: int) -> list[list[str]]:
        return [[self.outcomes[i] for i in block] for block in self.atoms(t)]

    def with_weights(self, weights) -> "FiniteModel":
        return new_model(weights, [self.labels[t] for t in range(self.horizon + 1)], self.outcomes)

    def same_as(self, other: "FiniteModel", tol: float = 0.0) -> bool:
        return (
            self.n == other.n
            and self.labels.shape == other.labels.shape
            and bool(np.array_equal(self.labels, other.labels))
            and bool(np.allclose(self.weights, other.weights, rtol=0.0, atol=tol))
        )


def _partition_to_row(partition, index: dict, n: int) -> np.ndarray:
    if isinstance(partition, np.ndarray):
        if partition.shape != (n,):
            raise BadPartition("label row must have one entry per outcome")
        return canonical_labels(partition.astype(np.int64))
    row = np.full(n, -1, dtype=np.int64)
    for a, block in enumerate(partition):
        if len(block) == 0:
            raise BadPartition("empty block")
        for item in block:
            i = index[item] if item in index else int(item)
            if not 0 <= i < n:
                raise BadPartition(f"unknown outcome {item!r}")
            if row[i] != -1:
                raise BadPartition(f"outcome {item!r} appears in two blocks")
            row[i] = a
    if np.any(row < 0):
        missing = [k for k, v in zip(index, row) if v < 0]
        raise BadPartition(f"partition does not cover outcomes {missing}")
    return canonical_labels(row)


def new_model(
    weights: Sequence[float],
    partitions: Sequence,
    outcomes: Sequence[str] | None = None,
    tol: float = 1e-12,
) -> FiniteModel:
    """Build and validate a finite filtered probability space.

    ``partitions[t]`` is either a list of blocks (each a list of outcome
    labels or indices) or an integer label array of length ``n``.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise BadWeights("weights must be a non-empty vector")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise BadWeights("weights must be strictly positive")
    if abs(w.sum() - 1.0) > tol:
        raise BadWeights(f"weights sum to {w.sum()!r}, not 1")
    n = w.size
    if outcomes is None:
        outcomes = [f"w{i + 1}" for i in range(n)]
    outcomes = tuple(str(o) for o in outcomes)
    if len(outcomes) != n or len(set(outcomes)) != n:
        raise BadPartition("outcome labels must be unique and match the weights")
    if len(partitions) < 2:
        raise BadPartition("need partitions P_0..P_T with T >= 1")
    index = {o: i for i, o in enumerate(outcomes)}
    rows = [_partition_to_row(p, index, n) for p in partitions]
    labels = np.vstack(rows)
    for t in range(labels.shape[0] - 1):
        # each atom of P_{t+1} must sit inside a single atom of P_t
        parent = np.full(int(labels[t + 1].max()) + 1, -1)
        for child, par in zip(labels[t + 1], labels[t]):
            if parent[child] == -1:
                parent[child] = par
            elif parent[child] != par:
                raise NonRefiningFiltration(f"P_{t + 1} does not refine P_{t}")
    labels.setflags(write=False)
    w.setflags(write=False)
    return FiniteModel(outcomes, w, labels)


def natural_partitions(paths: np.ndarray, initial=None) -> list[np.ndarray]:
    """Partitions generated by a path array ``(n, T+1[, d])``.

    ``initial`` optionally gives extra ``F_0`` information as a label row.
    """
    paths = np.asarray(paths)
    n, T1 = paths.shape[:2]
    flat = paths.reshape(n, T1, -1)
    base = np.zeros(n, dtype=np.int64) if initial is None else canonical_labels(initial)
    rows = []
    for t in range(T1):
        keys = [(int(base[i]),) + tuple(flat[i, : t + 1].ravel().tolist()) for i in range(n)]
        lookup: dict = {}
        rows.append(np.array([lookup.setdefault(k, len(lookup)) for k in keys]))
    return rows


# ---------------------------------------------------------------- processes


def as_process(model: FiniteModel, X) -> np.ndarray:
    """Return ``X`` as a float array of shape ``(n, T+1, d)``."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[:2] != (model.n, model.horizon + 1):
        raise ValueError(
            f"process shape {np.shape(X)} incompatible with model ({model.n}, {model.horizon + 1})"
        )
    return arr


def _restore(arr: np.ndarray, like) -> np.ndarray:
    return arr[:, :, 0] if np.ndim(like) == 2 else arr


def _atom_average(labels: np.ndarray, weights: np.ndarray, values: np.ndarray) -> np.ndarray:
    n = labels.size
    flat = values.reshape(n, -1)
    k = int(labels.max()) + 1
    mass = np.bincount(labels, weights=weights, minlength=k)
    if np.any(mass <= 0):
        raise EmptyAtom("atom with zero mass")
    sums = np.zeros((k, flat.shape[1]))
    np.add.at(sums, labels, weights[:, None] * flat)
    return (sums / mass[:, None])[labels].reshape(values.shape)


def conditional_expectation(model: FiniteModel, xi, t: int) -> np.ndarray:
    """E[xi | P_t] as an array of the same shape as ``xi``."""
    if not 0 <= t <= model.horizon:
        raise ValueError(f"time {t} outside 0..{model.horizon}")
    xi = np.asarray(xi, dtype=float)
    if xi.shape[0] != model.n:
        raise ValueError("random variable must have one value per outcome")
    return _atom_average(model.labels[t], model.weights, xi)


def martingale_of(model: FiniteModel, xi) -> np.ndarray:
    """The martingale ``t -> E[xi | P_t]`` as an ``(n, T+1)`` array."""
    xi = np.asarray(xi, dtype=float)
    cols = [conditional_expectation(model, xi, t) for t in range(model.horizon + 1)]
    return np.stack(cols, axis=1)


def jump_process(model: FiniteModel, X) -> np.ndarray:
    """Increments ``X_t - X_{t-1}`` with ``dX_0 = 0``."""
    arr = as_process(model, X)
    dX = np.zeros_like(arr)
    dX[:, 1:] = arr[:, 1:] - arr[:, :-1]
    return _restore(dX, X)


def predictable_projection(model: FiniteModel, raw) -> np.ndarray:
    """Value at ``t >= 1`` on an atom ``A`` of ``P_{t-1}`` is ``E[raw_t | A]``."""
    arr = as_process(model, raw)
    out = np.empty_like(arr)
    out[:, 0] = _atom_average(model.labels[0], model.weights, arr[:, 0])
    for t in range(1, model.horizon + 1):
        out[:, t] = _atom_average(model.labels[t - 1], model.weights, arr[:, t])
    return _restore(out, raw)


def adaptedness_violation(model: FiniteModel, X) -> float:
    arr = as_process(model, X)
    worst = 0.0
    for t in range(model.horizon + 1):
        avg = _atom_average(model.labels[t], model.weights, arr[:, t])
        worst = max(worst, float(np.max(np.abs(avg - arr[:, t]))))
    return worst


def predictability_violation(model: FiniteModel, X) -> float:
    arr = as_process(model, X)
    return float(np.max(np.abs(predictable_projection(model, arr) - arr)))


def is_adapted(model: FiniteModel, X, tol: float = DEFAULT_TOL) -> bool:
    return adaptedness_violation(model, X) <= tol


def is_predictable(model: FiniteModel, X, tol: float = DEFAULT_TOL) -> bool:
    return predictability_violation(model, X) <= tol


def require_adapted(model: FiniteModel, X, tol: float = DEFAULT_TOL) -> None:
    v = adaptedness_violation(model, X)
    if v > tol:
        raise NotAdapted(f"process is not adapted (violation {v:.3e})")


def drift_compensator(model: FiniteModel, X) -> np.ndarray:
    """Predictable part of the Doob decomposition: sum of ``E[dX_s | P_{s-1}]``."""
    arr = as_process(model, X)
    dX = np.zeros_like(arr)
    dX[:, 1:] = arr[:, 1:] - arr[:, :-1]
    proj = predictable_projection(model, dX)
    proj[:, 0] = 0.0
    return _restore(np.cumsum(proj, axis=1), X)


def doob_decomposition(model: FiniteModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Split ``X`` into ``(martingale, predictable drift)`` with drift null at 0."""
    A = drift_compensator(model, X)
    return np.asarray(X, dtype=float) - A, A


def compensator_increasing(model: FiniteModel, inc, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Dual predictable projection of an increasing process null at 0."""
    arr = as_process(model, inc)
    if np.any(np.abs(arr[:, 0]) > tol):
        raise NotIncreasing("increasing process must start at 0")
    if np.any(np.diff(arr, axis=1) < -tol):
        raise NotIncreasing("paths are not nondecreasing")
    return drift_compensator(model, inc)


def stochastic_integral(model: FiniteModel, K, X) -> np.ndarray:
    """Discrete integral ``sum_{s<=t} K_s . dX_s`` (always scalar)."""
    Xa = as_process(model, X)
    Ka = as_process(model, K)
    if Ka.shape != Xa.shape:
        raise ValueError("integrand and integrator dimensions differ")
    dX = np.zeros_like(Xa)
    dX[:, 1:] = Xa[:, 1:] - Xa[:, :-1]
    return np.cumsum(np.sum(Ka * dX, axis=2), axis=1)


@dataclass(frozen=True)
class MartingaleReport:
    ok: bool
    max_violation: float


def is_martingale(model: FiniteModel, X, tol: float = DEFAULT_TOL) -> MartingaleReport:
    """Exact martingale test: ``E[X_t | P_{t-1}] = X_{t-1}`` on every atom."""
    arr = as_process(model, X)
    worst = adaptedness_violation(model, arr)
    for t in range(1, model.horizon + 1):
        avg = _atom_average(model.labels[t - 1], model.weights, arr[:, t])
        worst = max(worst, float(np.max(np.abs(avg - arr[:, t - 1]))))
    return MartingaleReport(worst <= tol, worst)


def coin_model() -> FiniteModel:
    """Two equally likely outcomes revealed at time 1."""
    return new_model([0.5, 0.5], [[["w1", "w2"]], [["w1"], ["w2"]]], ["w1", "w2"])
