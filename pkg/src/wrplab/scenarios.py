"""Builtin scenario catalog.

Every entry is a run config (see :mod:`wrplab.cli`) with inline model
documents, so ``wrplab show NAME`` doubles as a format example.  Each of
the six product-enlargement examples has at least one ``example-N-*``
entry.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

from .enlargement import IDENTITIES


def _model(outcomes, weights, partitions, **processes) -> dict:
    return {"outcomes": outcomes, "weights": weights, "partitions": partitions, "processes": processes}


COIN = _model(["up", "down"], ["1/2", "1/2"], [[["up", "down"]], [["up"], ["down"]]],
              X=[[0, 1], [0, -1]])

# coin revealed at 1, nothing happens at 2: room for a random time in {1, 2}
COIN_T2 = _model(["up", "down"], ["1/2", "1/2"], [[["up", "down"]], [["up"], ["down"]], [["up"], ["down"]]],
                 X=[[0, 1, 1], [0, -1, -1]])

BERNOULLI = _model(["jump", "stay"], ["1/2", "1/2"], [[["jump", "stay"]], [["jump"], ["stay"]]],
                   Y=[[0, 1], [0, 0]])

# two outcomes share the mark +1 but are told apart by the filtration
COLLISION = _model(["a", "b", "c"], ["1/4", "1/4", "1/2"], [[["a", "b", "c"]], [["a"], ["b"], ["c"]]],
                   X=[[0, 1], [0, 1], [0, -1]])

REPAIRED = _model(["a", "b", "c"], ["1/4", "1/4", "1/2"], [[["a", "b", "c"]], [["a"], ["b"], ["c"]]],
                  X=[[0, 1], [0, 2], [0, -1]])

# certain jump at 1, random jump (or none) at 2
STEP_X = _model(["a", "b", "c"], ["1/4", "1/4", "1/2"],
                [[["a", "b", "c"]], [["a", "b", "c"]], [["a"], ["b"], ["c"]]],
                X=[[0, 1, 2], [0, 1, 0.5], [0, 1, 1]])

STEP_Y = _model(["p1", "p2", "q1", "q2"], ["1/4"] * 4,
                [[["p1", "p2", "q1", "q2"]], [["p1", "p2"], ["q1", "q2"]], [["p1"], ["p2"], ["q1"], ["q2"]]],
                Y=[[0, 1, 2], [0, 1, 1], [0, -1, 0], [0, -1, -2]])

# initial information: the regime is known at time 0 and fixes the jump law
REGIME_X = _model(["r1u", "r1d", "r2u", "r2d"], ["1/4", "1/4", "1/10", "2/5"],
                  [[["r1u", "r1d"], ["r2u", "r2d"]], [["r1u"], ["r1d"], ["r2u"], ["r2d"]]],
                  X=[[0, 1], [0, -1], [0, 2], [0, -0.5]])

REGIME_Y = _model(["s1u", "s1d", "s2u", "s2d"], ["3/10", "3/10", "3/10", "1/10"],
                  [[["s1u", "s1d"], ["s2u", "s2d"]], [["s1u"], ["s1d"], ["s2u"], ["s2d"]]],
                  Y=[[0, 1], [0, 0], [0, -1], [0, 3]])

TWO_COINS = _model(["uu", "ud", "du", "dd"], ["1/4"] * 4,
                   [[["uu", "ud", "du", "dd"]], [["uu"], ["ud"], ["du"], ["dd"]]],
                   X=[[0, 1], [0, 1], [0, -1], [0, -1]],
                   Y=[[0, 1], [0, -1], [0, 1], [0, -1]])

# first coin at time 1, second coin at time 2
STAGGERED_COINS = _model(["uu", "ud", "du", "dd"], ["1/4"] * 4,
                         [[["uu", "ud", "du", "dd"]], [["uu", "ud"], ["du", "dd"]], [["uu"], ["ud"], ["du"], ["dd"]]],
                         X=[[0, 1, 1], [0, 1, 1], [0, -1, -1], [0, -1, -1]],
                         Y=[[0, 0, 1], [0, 0, -1], [0, 0, 1], [0, 0, -1]])

# X jumps at 1 (outcomes j+, j-) or at 2 (outcomes l+, l-)
JUMP_TIME = _model(["j+", "j-", "l+", "l-"], ["1/4"] * 4,
                   [[["j+", "j-", "l+", "l-"]], [["j+"], ["j-"], ["l+", "l-"]], [["j+"], ["j-"], ["l+"], ["l-"]]],
                   X=[[0, 1, 1], [0, -1, -1], [0, 0, 1], [0, 0, -1]])

MC_LEVELS = [6, 7, 8, 9, 10]


def _mc(x: dict, y: dict, W, V, checks, seed: int, K=1.0, J=1.0, paths: int = 10_000) -> dict:
    return {
        "kind": "mc",
        "scenario": {"x": x, "y": y, "horizon": 1.0, "paths": paths, "m0": 1.0, "n0": 1.0},
        "levels": MC_LEVELS,
        "W": W, "V": V, "K": K, "J": J,
        "checks": checks,
        "seed": seed,
    }


def _poisson(rate, marks, probs) -> dict:
    return {"rate": rate, "marks": marks, "probs": probs}


@dataclass(frozen=True)
class Builtin:
    name: str
    description: str
    config: dict

    def materialize(self) -> dict:
        return copy.deepcopy(self.config)


_ALL_IDS = list(IDENTITIES)

_BUILTINS = [
    Builtin("coin-wrp", "Coin martingale: WRP and PRP hold, X represents itself.", {
        "kind": "finite-wrp", "model": COIN,
        "targets": [{"label": "X", "components": ["X"]}],
        "martingales": ["X"],
        "checks": ["wrp", "prp", "represent"],
    }),
    Builtin("collision-wrp", "Two atoms share a jump mark: WRP fails (expected exit 1).", {
        "kind": "finite-wrp", "model": COLLISION,
        "targets": [{"label": "X", "components": ["X"]}],
        "checks": ["wrp"],
    }),
    Builtin("collision-wrp-expected", "Collision model with the failure declared as expected.", {
        "kind": "finite-wrp", "model": COLLISION,
        "targets": [{"label": "X", "components": ["X"], "expect": False}],
        "checks": ["wrp"],
    }),
    Builtin("product-coin-bernoulli", "Coin x Bernoulli jump: every product identity, WRP of the pair.", {
        "kind": "product", "f": COIN, "h": BERNOULLI, "X": "X", "Y": "Y",
        "W": "identity", "V": "identity",
        "checks": _ALL_IDS + ["wrp", "invariance", "martingales"],
    }),
    Builtin("example-1-step-product", "Independent step processes with a certain jump and a shared jump time.", {
        "kind": "product", "f": STEP_X, "h": STEP_Y, "X": "X", "Y": "Y",
        "W": {"affine": [1, 1]}, "V": "identity", "M0": 1.0, "N0": 2.0,
        "checks": _ALL_IDS + ["wrp", "invariance", "martingales"],
    }),
    Builtin("example-1-mc-step-shared", "Step x step with a common predictable jump time: identity exact.",
            _mc({"steps": [{"time": 0.5, "marks": [1.0, -1.0], "probs": [0.5, 0.5]},
                           {"time": 0.75, "marks": [2.0], "probs": [1.0]}]},
                {"steps": [{"time": 0.5, "marks": [1.0, 0.0, -0.5], "probs": [0.25, 0.25, 0.5]}]},
                "identity", {"affine": [2, 1]}, ["exact", "drift"], seed=11)),
    Builtin("example-2-mc-brownian-step", "R = B + step, S = W + step: residual decays like sqrt(dt).",
            _mc({"sigma": 1.0, "poisson": _poisson(2.0, [1.0, -0.5], [0.5, 0.5]),
                 "steps": [{"time": 0.5, "marks": [1.0, -1.0], "probs": [0.5, 0.5]}]},
                {"sigma": 0.5, "poisson": _poisson(1.0, [1.0], [1.0]),
                 "steps": [{"time": 0.5, "marks": [1.0, 0.0], "probs": [0.5, 0.5]}]},
                "identity", "identity", ["ratio-band", "monotone", "drift"], seed=3)),
    Builtin("example-3-initial-information", "Factor with an initial sigma-field fixing its jump law, times a step process.", {
        "kind": "product", "f": REGIME_X, "h": STEP_Y, "X": "X", "Y": "Y",
        "W": "identity", "V": "square",
        "checks": _ALL_IDS + ["wrp", "invariance", "martingales"],
    }),
    Builtin("example-4-both-initial", "Both factors carry initial information; pair has WRP.", {
        "kind": "product", "f": REGIME_X, "h": REGIME_Y, "X": "X", "Y": "Y",
        "W": "identity", "V": {"affine": [1, -0.5]},
        "checks": _ALL_IDS + ["wrp", "invariance", "martingales"],
    }),
    Builtin("example-5-disjoint-jump-times", "Coins at disjoint times: the sum keeps WRP, so does the pair.", {
        "kind": "finite-wrp", "model": STAGGERED_COINS,
        "targets": [
            {"label": "X+Y", "components": ["X", "Y"], "sum": True},
            {"label": "(X,Y)", "components": ["X", "Y"]},
        ],
        "checks": ["wrp"],
    }),
    Builtin("example-6-sum-vs-pair", "Two coins: X+Y lacks WRP (zero jump on two atoms), (X,Y) has it.", {
        "kind": "finite-wrp", "model": TWO_COINS,
        "targets": [
            {"label": "X+Y", "components": ["X", "Y"], "sum": True, "expect": False},
            {"label": "(X,Y)", "components": ["X", "Y"]},
        ],
        "checks": ["wrp"],
    }),
    Builtin("iterated-three-coins", "Three independent coins: WRP of the triple (7 = 7).", {
        "kind": "iterated", "models": [COIN, COIN, COIN], "processes": ["X", "X", "X"],
        "checks": ["wrp", "invariance", "associativity"],
    }),
    Builtin("iterated-four-factors", "Coin x repaired collision x coin x step process.", {
        "kind": "iterated", "models": [COIN, REPAIRED, COIN, STEP_Y], "processes": ["X", "X", "X", "Y"],
        "checks": ["wrp", "invariance", "associativity"],
    }),
    Builtin("jacod-coin-tau", "Coin with a correlated random time in {1, 2}: Q uniform, WRP of (X, H).", {
        "kind": "jacod", "model": COIN_T2, "process": "X",
        "tau_values": [1, 2], "joint": [["3/10", "1/5"], ["1/5", "3/10"]],
        "checks": ["p1", "p2", "p3", "density-martingale", "l-martingale", "stopping-time", "wrp-direct", "wrp-q"],
    }),
    Builtin("jacod-tau-hits-jump", "Random time that usually equals the jump time of X; all densities positive.", {
        "kind": "jacod", "model": JUMP_TIME, "process": "X",
        "tau_values": [1, 2, "inf"],
        "joint": [["1/5", "1/40", "1/40"], ["1/5", "1/40", "1/40"],
                  ["1/40", "1/5", "1/40"], ["1/40", "1/5", "1/40"]],
        "checks": ["p1", "p2", "p3", "density-martingale", "l-martingale", "stopping-time", "wrp-direct", "wrp-q"],
    }),
    Builtin("jacod-independent-tau", "Random time independent of F: densities identically one, Q = P.", {
        "kind": "jacod", "model": COIN_T2, "process": "X",
        "tau_values": [1, 2, "inf"], "joint": [["1/4", "1/8", "1/8"], ["1/4", "1/8", "1/8"]],
        "checks": ["p1", "p2", "p3", "density-martingale", "l-martingale", "stopping-time", "wrp-direct", "wrp-q"],
    }),
    Builtin("mc-pure-jump", "Compound Poisson plus shared step time, no Brownian part: exact at every grid.",
            _mc({"poisson": _poisson(2.0, [1.0, -0.5], [0.5, 0.5]),
                 "steps": [{"time": 0.5, "marks": [1.0, 0.0], "probs": [0.5, 0.5]}]},
                {"poisson": _poisson(1.0, [1.0], [1.0]),
                 "steps": [{"time": 0.5, "marks": [1.0, -1.0], "probs": [0.25, 0.75]}]},
                "identity", {"affine": [2, 1]}, ["exact", "drift"], seed=1)),
    Builtin("mc-brownian-pair", "Two independent Brownian factors, K = J = 1.",
            _mc({"sigma": 1.0}, {"sigma": 1.0}, "zero", "zero", ["ratio-band", "monotone"], seed=2)),
    Builtin("mc-mixed", "Brownian plus compound Poisson in both factors.",
            _mc({"sigma": 1.0, "poisson": _poisson(3.0, [1.0, -1.0, 0.5], [0.25, 0.25, 0.5])},
                {"sigma": 1.0, "poisson": _poisson(1.5, [-0.5, 2.0], [0.5, 0.5])},
                "identity", "square", ["ratio-band", "monotone", "drift"], seed=4)),
]

BUILTINS: dict[str, Builtin] = {b.name: b for b in _BUILTINS}


def list_builtin_scenarios(filter_text: str = "") -> list[Builtin]:
    f = filter_text.lower()
    return [b for b in _BUILTINS if f in b.name.lower() or f in b.description.lower()]


def get_builtin(name: str) -> Builtin:
    try:
        return BUILTINS[name]
    except KeyError:
        raise KeyError(f"no builtin scenario named {name!r}") from None
