"""JSON (de)serialization for models, processes and integrand specs.

Model document::

    {
      "outcomes": ["w1", "w2"],
      "weights": ["1/2", "1/2"],
      "partitions": [[["w1", "w2"]], [["w1"], ["w2"]]],
      "processes": {"X": [[0, 1], [0, -1]]}
    }

Numbers may be JSON numbers or strings such as ``"1/3"`` or ``"0.25"``
(parsed with :class:`fractions.Fraction`).  Processes are ``(n, T+1)`` or
``(n, T+1, d)`` nested lists.  Floats are written with ``repr`` so a
load/save round trip is lossless.
"""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .finite_model import FiniteModel, new_model
from .jump_calculus import CompensatorTable, Mark, PredictableFunction


def number(v) -> float:
    if isinstance(v, bool):
        raise ConfigError(f"expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse number {v!r}") from exc
    raise ConfigError(f"expected a number, got {v!r}")


def numbers(obj) -> np.ndarray:
    if isinstance(obj, list):
        return np.array([numbers(o) for o in obj], dtype=float)
    return np.array(number(obj))


def model_from_dict(d: dict) -> tuple[FiniteModel, dict[str, np.ndarray]]:
    try:
        weights = [number(w) for w in d["weights"]]
        partitions = d["partitions"]
    except KeyError as exc:
        raise ConfigError(f"model document lacks {exc.args[0]!r}") from None
    outcomes = d.get("outcomes")
    model = new_model(weights, partitions, outcomes, tol=float(d.get("weight_tol", 1e-12)))
    procs = {name: numbers(v) for name, v in (d.get("processes") or {}).items()}
    for name, arr in procs.items():
        if arr.ndim not in (2, 3) or arr.shape[:2] != (model.n, model.horizon + 1):
            raise ConfigError(f"process {name!r} has shape {arr.shape}, expected ({model.n}, {model.horizon + 1}[, d])")
    return model, procs


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def model_to_dict(model: FiniteModel, processes: dict[str, Any] | None = None) -> dict:
    return {
        "outcomes": list(model.outcomes),
        "weights": [float(w) for w in model.weights],
        "partitions": [model.partition(t) for t in range(model.horizon + 1)],
        "processes": {k: _plain(np.asarray(v, dtype=float)) for k, v in (processes or {}).items()},
    }


def load_json(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def load_model(path: str | Path) -> tuple[FiniteModel, dict[str, np.ndarray]]:
    return model_from_dict(load_json(path))


def save_model(path: str | Path, model: FiniteModel, processes: dict | None = None) -> None:
    Path(path).write_text(dumps(model_to_dict(model, processes)), encoding="utf-8")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


# ---------------------------------------------------------------- integrands

_NAMED = {
    "identity": lambda x: x,
    "square": lambda x: x * x,
    "one": lambda x: 1.0,
    "zero": lambda x: 0.0,
    "abs": abs,
}


def mark_function(spec) -> Any:
    """Scalar mark function from a spec.

    Accepted: a name (``identity``, ``square``, ``one``, ``zero``, ``abs``),
    a number (constant), ``{"const": c}``, ``{"affine": [a, b]}`` for
    ``a x + b``, or ``{"map": [[mark, value], ...]}``.
    """
    if isinstance(spec, str):
        if spec not in _NAMED:
            raise ConfigError(f"unknown mark function {spec!r}")
        return _NAMED[spec]
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        c = float(spec)
        return lambda x: c
    if isinstance(spec, dict):
        if "const" in spec:
            c = number(spec["const"])
            return lambda x: c
        if "affine" in spec:
            a, b = (number(v) for v in spec["affine"])
            return lambda x: a * x + b
        if "map" in spec:
            table = {number(k): number(v) for k, v in spec["map"]}

            def lookup(x):
                try:
                    return table[float(x)]
                except KeyError:
                    raise ConfigError(f"mark {x} missing from integrand map") from None

            return lookup
    raise ConfigError(f"cannot interpret mark function spec {spec!r}")


def predictable_from_spec(spec, nu: CompensatorTable) -> PredictableFunction:
    """Predictable function on a finite model.

    ``{"rows": [[t, atom, mark, value], ...]}`` gives an explicit table;
    any :func:`mark_function` spec applies to the first mark coordinate
    (``{"coord": i, "of": spec}`` picks another one).
    """
    if isinstance(spec, dict) and "rows" in spec:
        W = PredictableFunction.from_rows(spec["rows"], nu.dim_mark)
        missing = [k for k in nu.support() if k not in W.values]
        if missing:
            from .errors import MissingMark

            raise MissingMark(f"integrand table lacks support point {missing[0]}")
        return W
    coord = 0
    if isinstance(spec, dict) and "of" in spec:
        coord = int(spec.get("coord", 0))
        spec = spec["of"]
    fn = mark_function(spec)
    return PredictableFunction.from_mark_function(nu, lambda m: fn(m[coord]))


def mark_key(mark: Mark) -> list[float]:
    return [float(v) for v in mark]
