"""Jump measures, compensators and compensated jump integrals on finite models.

Marks are tuples of floats and are compared by exact equality: two jumps
carry the same mark only if their stored increments are bit-identical.
Author models with dyadic or integer jump sizes so that ``X_t - X_{t-1}``
reproduces the intended mark exactly.

A predictable function is tabulated on ``(t, atom, mark)`` where ``atom``
indexes ``P_{t-1}`` and ``mark`` runs over the support of the compensator
on that atom.  On a finite model with positive weights every realised
mark lies in that support, so the table covers both measures.  The
``+inf`` branch of the hat operator (divergent integral) cannot occur
here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import MissingMark, Unsupported
from .finite_model import (
    DEFAULT_TOL,
    FiniteModel,
    as_process,
    compensator_increasing,
    jump_process,
    require_adapted,
)

Mark = tuple[float, ...]
Key = tuple[int, int, Mark]


def as_mark(x) -> Mark:
    return tuple(float(v) for v in np.atleast_1d(x))


def is_zero_mark(mark: Mark) -> bool:
    return all(v == 0.0 for v in mark)


@dataclass(frozen=True)
class JumpMeasure:
    """Atoms ``(outcome, t, mark)`` of the jump measure, one per nonzero jump."""

    entries: tuple[tuple[int, int, Mark], ...]
    n: int
    horizon: int

    def counting_process(self) -> np.ndarray:
        out = np.zeros((self.n, self.horizon + 1))
        for i, t, _ in self.entries:
            out[i, t] += 1.0
        return np.cumsum(out, axis=1)


def realized_marks(model: FiniteModel, X) -> list[list[Mark | None]]:
    """``marks[i][t]`` is the jump mark of outcome ``i`` at ``t`` or None."""
    dX = as_process(model, jump_process(model, as_process(model, X)))
    out: list[list[Mark | None]] = []
    for i in range(model.n):
        row: list[Mark | None] = [None]
        for t in range(1, model.horizon + 1):
            m = as_mark(dX[i, t])
            row.append(None if is_zero_mark(m) else m)
        out.append(row)
    return out


def jump_measure(model: FiniteModel, X) -> JumpMeasure:
    marks = realized_marks(model, X)
    entries = tuple(
        (i, t, m)
        for i in range(model.n)
        for t in range(1, model.horizon + 1)
        if (m := marks[i][t]) is not None
    )
    return JumpMeasure(entries, model.n, model.horizon)


@dataclass
class CompensatorTable:
    """``masses[(t, atom)]`` maps marks to ``nu({t} x {mark})`` on that atom of ``P_{t-1}``."""

    horizon: int
    dim_mark: int
    masses: dict[tuple[int, int], dict[Mark, float]] = field(default_factory=dict)

    def at(self, t: int, atom: int) -> dict[Mark, float]:
        return self.masses.get((t, atom), {})

    def total_mass(self, t: int, atom: int) -> float:
        return float(sum(self.at(t, atom).values()))

    def support(self) -> Iterator[Key]:
        for (t, atom), row in sorted(self.masses.items()):
            for mark in row:
                yield (t, atom, mark)

    def __len__(self) -> int:
        return sum(len(row) for row in self.masses.values())


def compensator_nu(model: FiniteModel, X) -> CompensatorTable:
    """Conditional jump law ``P[dX_t = x | A]`` for every atom ``A`` of ``P_{t-1}``."""
    arr = as_process(model, X)
    require_adapted(model, arr)
    marks = realized_marks(model, arr)
    table = CompensatorTable(model.horizon, arr.shape[2])
    for t in range(1, model.horizon + 1):
        mass = model.atom_mass(t - 1)
        for i in range(model.n):
            m = marks[i][t]
            if m is None:
                continue
            a = int(model.labels[t - 1, i])
            row = table.masses.setdefault((t, a), {})
            row[m] = row.get(m, 0.0) + float(model.weights[i] / mass[a])
    return table


@dataclass
class PredictableFunction:
    """Tabulated predictable function ``W(t, atom of P_{t-1}, mark)``."""

    dim_mark: int
    values: dict[Key, float] = field(default_factory=dict)

    def __call__(self, t: int, atom: int, mark: Mark) -> float:
        try:
            return self.values[(t, atom, mark)]
        except KeyError:
            raise MissingMark(f"W undefined at t={t}, atom={atom}, mark={mark}") from None

    @classmethod
    def from_callable(cls, nu: CompensatorTable, fn: Callable[[int, int, Mark], float]):
        return cls(nu.dim_mark, {k: float(fn(*k)) for k in nu.support()})

    @classmethod
    def from_mark_function(cls, nu: CompensatorTable, fn: Callable[[Mark], float]):
        return cls(nu.dim_mark, {k: float(fn(k[2])) for k in nu.support()})

    @classmethod
    def zero(cls, nu: CompensatorTable):
        return cls.from_mark_function(nu, lambda m: 0.0)

    @classmethod
    def unit(cls, nu: CompensatorTable, key: Key):
        out = cls.zero(nu)
        out.values[key] = 1.0
        return out

    def __add__(self, other: "PredictableFunction") -> "PredictableFunction":
        keys = set(self.values) | set(other.values)
        return PredictableFunction(
            self.dim_mark,
            {k: self.values.get(k, 0.0) + other.values.get(k, 0.0) for k in keys},
        )

    def scale(self, c: float) -> "PredictableFunction":
        return PredictableFunction(self.dim_mark, {k: c * v for k, v in self.values.items()})

    def to_rows(self) -> list[list]:
        """Quadruples ``[t, atom, mark, value]`` sorted by key."""
        return [[t, a, list(m), v] for (t, a, m), v in sorted(self.values.items())]

    @classmethod
    def from_rows(cls, rows, dim_mark: int | None = None):
        values = {(int(t), int(a), as_mark(m)): float(v) for t, a, m, v in rows}
        if dim_mark is None:
            dim_mark = len(next(iter(values))[2]) if values else 1
        return cls(dim_mark, values)


def _atom_index(model: FiniteModel, t: int) -> list[np.ndarray]:
    return model.atoms(t)


def w_hat(model: FiniteModel, W: PredictableFunction, nu: CompensatorTable) -> np.ndarray:
    """``sum_x W(t, A, x) nu({t} x {x})`` broadcast over outcomes; zero at t=0."""
    out = np.zeros((model.n, model.horizon + 1))
    for t in range(1, model.horizon + 1):
        for a, members in enumerate(_atom_index(model, t - 1)):
            row = nu.at(t, a)
            if row:
                out[members, t] = sum(W(t, a, x) * m for x, m in row.items())
    return out


def realized_values(model: FiniteModel, W: PredictableFunction, X) -> np.ndarray:
    """``W(t, dX_t) 1_{dX_t != 0}`` on every path."""
    marks = realized_marks(model, X)
    out = np.zeros((model.n, model.horizon + 1))
    for i in range(model.n):
        for t in range(1, model.horizon + 1):
            m = marks[i][t]
            if m is not None:
                out[i, t] = W(t, int(model.labels[t - 1, i]), m)
    return out


def w_tilde(model: FiniteModel, W: PredictableFunction, X, nu: CompensatorTable | None = None) -> np.ndarray:
    if nu is None:
        nu = compensator_nu(model, X)
    return realized_values(model, W, X) - w_hat(model, W, nu)


def compensated_integral(
    model: FiniteModel, W: PredictableFunction, X, nu: CompensatorTable | None = None
) -> np.ndarray:
    """``W * (mu - nu)``: the martingale null at 0 whose jumps are ``w_tilde``."""
    return np.cumsum(w_tilde(model, W, X, nu), axis=1)


def quadratic_covariation(model: FiniteModel, X, Y) -> np.ndarray:
    dX = jump_process(model, np.asarray(X, dtype=float))
    dY = jump_process(model, np.asarray(Y, dtype=float))
    if dX.ndim != 2 or dY.ndim != 2:
        raise ValueError("covariation is defined for scalar processes")
    return np.cumsum(dX * dY, axis=1)


def predictable_covariation(model: FiniteModel, X, Y) -> np.ndarray:
    """Compensator of ``[X, Y]`` via its positive and negative increment parts."""
    bracket = quadratic_covariation(model, X, Y)
    inc = np.zeros_like(bracket)
    inc[:, 1:] = np.diff(bracket, axis=1)
    up = np.cumsum(np.clip(inc, 0.0, None), axis=1)
    down = np.cumsum(np.clip(-inc, 0.0, None), axis=1)
    return compensator_increasing(model, up) - compensator_increasing(model, down)


def g_norm(model: FiniteModel, W: PredictableFunction, X, q: int = 2,
           nu: CompensatorTable | None = None) -> float:
    """``E[(sum_s w_tilde_s^2)^{q/2}]^{1/q}`` for q in {1, 2}."""
    if q not in (1, 2):
        raise Unsupported(f"G^q norm only implemented for q in (1, 2), got {q}")
    sq = np.sum(w_tilde(model, W, X, nu) ** 2, axis=1)
    return float(np.dot(model.weights, sq ** (q / 2)) ** (1.0 / q))


def g_norm2(model: FiniteModel, W: PredictableFunction, X, nu: CompensatorTable | None = None) -> float:
    return g_norm(model, W, X, 2, nu)


def defining_property_violation(model: FiniteModel, W: PredictableFunction, X,
                                tol: float = DEFAULT_TOL) -> float:
    """Largest martingale defect of ``W * mu - W * nu`` (should be ~0)."""
    from .finite_model import is_martingale

    nu = compensator_nu(model, X)
    integral = np.cumsum(realized_values(model, W, X), axis=1) - np.cumsum(w_hat(model, W, nu), axis=1)
    return is_martingale(model, integral, tol).max_violation
