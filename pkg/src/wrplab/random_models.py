"""Random finite models for the property suites.

``random_factor`` draws a small filtered space by successive random
refinement and a process whose increments are assigned per child atom.
Without collisions sibling atoms get distinct marks, so the process has
WRP in its filtration; with ``collisions=True`` siblings may share a mark
and WRP typically fails.  Unsplit atoms carry either no jump or a jump of
known size (a predictable jump with full mass).

``random_martingale`` draws a martingale tree: each atom of ``P_{t-1}``
has a conditional law with mean zero over its children.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .finite_model import FiniteModel, canonical_labels, new_model
from .jump_calculus import CompensatorTable, PredictableFunction

MARK_POOL = (0.0, 1.0, -1.0, 0.5, -0.5, 2.0, -2.0, 1.5, -0.25, 3.0)


@dataclass
class RandomFactor:
    model: FiniteModel
    X: np.ndarray  # (n, T+1, d)


def _refine(rng: np.random.Generator, labels: np.ndarray, max_split: int, p_split: float) -> np.ndarray:
    out = np.empty_like(labels)
    nxt = 0
    for a in np.unique(labels):
        members = np.flatnonzero(labels == a)
        k = 1
        if members.size > 1 and rng.random() < p_split:
            k = int(rng.integers(2, min(max_split, members.size) + 1))
        if k == 1:
            out[members] = nxt
        else:
            # every block non-empty: seed one member per block, scatter the rest
            perm = rng.permutation(members)
            blocks = np.concatenate([np.arange(k), rng.integers(0, k, members.size - k)])
            out[perm] = nxt + blocks
        nxt += k
    return canonical_labels(out)


def random_partitions(rng: np.random.Generator, n: int, horizon: int, trivial_f0: bool = True,
                      max_split: int = 3, p_split: float = 0.7) -> list[np.ndarray]:
    rows = [np.zeros(n, dtype=np.int64)]
    if not trivial_f0:
        rows[0] = _refine(rng, rows[0], 2, 1.0)
    for _ in range(horizon):
        rows.append(_refine(rng, rows[-1], max_split, p_split))
    return rows


def _random_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    w = rng.dirichlet(np.ones(n)) + 0.05
    return w / w.sum()


def _child_marks(rng: np.random.Generator, k: int, d: int, collisions: bool, p_det: float) -> list[tuple]:
    if k == 1:
        if rng.random() < p_det:
            nz = [m for m in MARK_POOL if m != 0]
            return [tuple(float(rng.choice(nz)) for _ in range(d))]
        return [(0.0,) * d]
    pool = list(MARK_POOL)
    if collisions:
        picks = [tuple(float(rng.choice(pool)) for _ in range(d)) for _ in range(k)]
        if len(set(picks)) == k:
            picks[1] = picks[0]
        return picks
    seen: set = set()
    while len(seen) < k:
        seen.add(tuple(float(rng.choice(pool)) for _ in range(d)))
    out = list(seen)
    rng.shuffle(out)
    return out


def random_factor(
    rng: np.random.Generator,
    max_outcomes: int = 6,
    max_horizon: int = 4,
    d: int = 1,
    collisions: bool = False,
    trivial_f0: bool = True,
    p_det: float = 0.3,
    horizon: int | None = None,
) -> RandomFactor:
    n = int(rng.integers(2, max_outcomes + 1))
    T = int(rng.integers(1, max_horizon + 1)) if horizon is None else horizon
    rows = random_partitions(rng, n, T, trivial_f0)
    model = new_model(_random_weights(rng, n), rows)
    X = np.zeros((n, T + 1, d))
    x0 = {int(a): tuple(float(rng.choice(MARK_POOL)) for _ in range(d)) for a in np.unique(rows[0])}
    X[:, 0] = [x0[int(a)] for a in rows[0]]
    for t in range(1, T + 1):
        for a in np.unique(rows[t - 1]):
            members = np.flatnonzero(rows[t - 1] == a)
            children = list(dict.fromkeys(rows[t][members].tolist()))
            marks = _child_marks(rng, len(children), d, collisions, p_det)
            for c, m in zip(children, marks):
                sel = members[rows[t][members] == c]
                X[sel, t] = X[sel, t - 1] + np.array(m)
    return RandomFactor(model, X)


def random_martingale(
    rng: np.random.Generator,
    max_outcomes: int = 6,
    max_horizon: int = 4,
    d: int = 1,
    max_split: int = 3,
) -> RandomFactor:
    """Martingale tree: children of each atom carry a mean-zero conditional law.

    Binary splits use dyadic marks ``(a, -b)`` with probabilities
    ``(b, a) / (a + b)``; wider splits solve for the last mark.
    """
    n = int(rng.integers(2, max_outcomes + 1))
    T = int(rng.integers(1, max_horizon + 1))
    rows = random_partitions(rng, n, T, True, max_split=max_split)
    X = np.zeros((n, T + 1, d))
    cond = np.ones(n)  # probability of the P_T atom path, per outcome
    for t in range(1, T + 1):
        for a in np.unique(rows[t - 1]):
            members = np.flatnonzero(rows[t - 1] == a)
            children = list(dict.fromkeys(rows[t][members].tolist()))
            k = len(children)
            if k == 1:
                X[members, t] = X[members, t - 1]
                continue
            if k == 2 and d == 1:
                a_, b_ = (float(rng.choice([0.5, 1.0, 2.0, 3.0])) for _ in range(2))
                marks = [np.array([a_]), np.array([-b_])]
                probs = [b_ / (a_ + b_), a_ / (a_ + b_)]
            else:
                probs = list(rng.dirichlet(np.ones(k)) * 0.8 + 0.2 / k)
                marks = [rng.normal(size=d) for _ in range(k - 1)]
                marks.append(-sum(p * m for p, m in zip(probs, marks)) / probs[-1])
            for c, m, p in zip(children, marks, probs):
                sel = members[rows[t][members] == c]
                X[sel, t] = X[sel, t - 1] + m
                cond[sel] *= p
    # split each terminal atom's mass among its outcomes
    w = np.empty(n)
    for a in np.unique(rows[-1]):
        sel = np.flatnonzero(rows[-1] == a)
        w[sel] = cond[sel] * (rng.dirichlet(np.ones(sel.size)) if sel.size > 1 else 1.0)
    model = new_model(w / w.sum(), rows)
    return RandomFactor(model, X)


def random_predictable(rng: np.random.Generator, nu: CompensatorTable, dyadic: bool = True) -> PredictableFunction:
    if dyadic:
        return PredictableFunction.from_callable(nu, lambda t, a, x: float(rng.integers(-8, 9)) / 4.0)
    return PredictableFunction.from_callable(nu, lambda t, a, x: float(rng.normal()))
