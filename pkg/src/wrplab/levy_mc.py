"""Monte Carlo engine for products of independent Levy/step factors.

Each factor is ``x0 + sigma B + compound Poisson + step jumps at fixed
grid times``.  Compensators are analytic.  Paths are simulated once on
the finest grid; coarser grids reuse the same randomness
(:meth:`PathBundle.coarsen`), which couples the convergence ladder.

Per-path random streams come from ``SeedSequence(seed, spawn_key=(p,))``
and each stream is consumed in a fixed order: for the X factor then the
Y factor, the Gaussian increments, the Poisson count, the Poisson
arrival times, the Poisson marks, then one mark per step time.  Any
subset of paths can therefore be regenerated on its own.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ._kernels import default_backend, product_residual
from .errors import BadGrid, ConfigError

GRID_RTOL = 1e-9


@dataclass(frozen=True)
class StepSpec:
    time: float
    marks: tuple[float, ...]
    probs: tuple[float, ...]


@dataclass(frozen=True)
class FactorSpec:
    """One factor: Brownian part, compound Poisson part, step jumps."""

    x0: float = 0.0
    sigma: float = 0.0
    rate: float = 0.0
    marks: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()
    steps: tuple[StepSpec, ...] = ()

    def validate(self) -> None:
        if self.sigma < 0 or self.rate < 0:
            raise ConfigError("sigma and rate must be non-negative")
        if self.rate > 0:
            _check_law(self.marks, self.probs, "Poisson")
            if any(m == 0 for m in self.marks):
                raise ConfigError("Poisson marks must be nonzero")
        times = [s.time for s in self.steps]
        if len(set(times)) != len(times):
            raise ConfigError("step times must be distinct")
        for s in self.steps:
            _check_law(s.marks, s.probs, f"step at {s.time}")

    @classmethod
    def from_dict(cls, d: dict) -> "FactorSpec":
        poisson = d.get("poisson") or {}
        steps = tuple(
            StepSpec(float(s["time"]), tuple(map(float, s["marks"])), tuple(map(float, s["probs"])))
            for s in d.get("steps", [])
        )
        return cls(
            x0=float(d.get("x0", 0.0)),
            sigma=float(d.get("sigma", 0.0)),
            rate=float(poisson.get("rate", 0.0)),
            marks=tuple(map(float, poisson.get("marks", ()))),
            probs=tuple(map(float, poisson.get("probs", ()))),
            steps=steps,
        )

    def to_dict(self) -> dict:
        return {
            "x0": self.x0,
            "sigma": self.sigma,
            "poisson": {"rate": self.rate, "marks": list(self.marks), "probs": list(self.probs)},
            "steps": [{"time": s.time, "marks": list(s.marks), "probs": list(s.probs)} for s in self.steps],
        }


def _check_law(marks, probs, what: str) -> None:
    if len(marks) != len(probs) or not marks:
        raise ConfigError(f"{what}: marks and probs must be non-empty and of equal length")
    if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
        raise ConfigError(f"{what}: mark probabilities must be non-negative and sum to 1")


@dataclass(frozen=True)
class McScenario:
    x: FactorSpec
    y: FactorSpec
    dt: float
    horizon: float = 1.0
    paths: int = 1000
    seed: int = 0
    m0: float = 1.0
    n0: float = 1.0

    @property
    def n_cells(self) -> int:
        return int(round(self.horizon / self.dt))

    def validate(self) -> None:
        if not (self.dt > 0 and self.horizon > 0):
            raise BadGrid("dt and horizon must be positive")
        k = self.horizon / self.dt
        if abs(k - round(k)) > GRID_RTOL * max(k, 1.0) or round(k) < 1:
            raise BadGrid(f"dt={self.dt} does not divide horizon={self.horizon}")
        if self.paths < 1:
            raise ConfigError("paths must be >= 1")
        for f in (self.x, self.y):
            f.validate()
            for s in f.steps:
                j = s.time / self.dt
                if abs(j - round(j)) > GRID_RTOL * max(j, 1.0) or not (0 < round(j) <= self.n_cells):
                    raise BadGrid(f"step time {s.time} is not an interior grid point in (0, T]")


@dataclass(frozen=True)
class AnalyticCompensator:
    """``nu(dt, dx) = rate F(dx) dt`` plus atoms at the step times."""

    rate: float
    marks: tuple[float, ...]
    probs: tuple[float, ...]
    atoms: tuple[StepSpec, ...] = ()

    @classmethod
    def of(cls, f: FactorSpec) -> "AnalyticCompensator":
        return cls(f.rate, f.marks, f.probs, f.steps)

    def density_hat(self, W) -> float:
        """``rate * int W dF``: the compensator drift per unit time."""
        if self.rate == 0:
            return 0.0
        w = _as_markfn(W)
        return self.rate * sum(w(x) * p for x, p in zip(self.marks, self.probs))

    def atom_hat(self, k: int, W) -> float:
        w = _as_markfn(W)
        s = self.atoms[k]
        return sum(w(x) * p for x, p in zip(s.marks, s.probs) if x != 0)


def _as_markfn(W) -> Callable[[float], float]:
    if callable(W):
        return lambda x: float(W(x))
    if isinstance(W, dict):
        table = {float(k): float(v) for k, v in W.items()}
        return lambda x: table[float(x)]
    c = float(W)
    return lambda x: c


def _apply(W, marks: np.ndarray) -> np.ndarray:
    w = _as_markfn(W)
    if marks.size == 0:
        return np.zeros(marks.shape)
    uniq, inv = np.unique(marks, return_inverse=True)
    vals = np.array([w(float(u)) for u in uniq])
    return vals[inv].reshape(marks.shape)


@dataclass
class Jumps:
    path: np.ndarray
    cell: np.ndarray
    time: np.ndarray
    mark: np.ndarray

    def __len__(self) -> int:
        return self.path.size


@dataclass
class FactorPaths:
    spec: FactorSpec
    dc: np.ndarray | None  # (n, K) continuous increments, None when sigma == 0
    jumps: Jumps
    atom_cells: np.ndarray  # cell whose right end carries step k
    atom_marks: np.ndarray  # (n, S)


@dataclass
class PathBundle:
    scenario: McScenario
    dt: float
    n_cells: int
    x: FactorPaths
    y: FactorPaths
    paths: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n(self) -> int:
        return self.paths.size

    def factor(self, side: str) -> FactorPaths:
        if side not in ("x", "y"):
            raise ValueError("side must be 'x' or 'y'")
        return self.x if side == "x" else self.y

    def coarsen(self, m: int) -> "PathBundle":
        """Same paths on a grid ``m`` times coarser."""
        if m < 1 or self.n_cells % m:
            raise BadGrid(f"cannot coarsen {self.n_cells} cells by {m}")
        if m == 1:
            return self
        out = []
        for f in (self.x, self.y):
            if np.any((f.atom_cells + 1) % m):
                raise BadGrid(f"a step time is off the grid coarsened by {m}")
            dc = None if f.dc is None else f.dc.reshape(self.n, self.n_cells // m, m).sum(axis=2)
            j = f.jumps
            out.append(FactorPaths(f.spec, dc, Jumps(j.path, j.cell // m, j.time, j.mark),
                                   (f.atom_cells + 1) // m - 1, f.atom_marks))
        return PathBundle(self.scenario, self.dt * m, self.n_cells // m, out[0], out[1], self.paths)

    def times(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.dt

    def continuous_part(self, side: str) -> np.ndarray:
        f = self.factor(side)
        out = np.zeros((self.n, self.n_cells + 1))
        if f.dc is not None:
            np.cumsum(f.dc, axis=1, out=out[:, 1:])
        return out

    def jump_counts(self, side: str) -> np.ndarray:
        f = self.factor(side)
        return np.bincount(f.jumps.path, minlength=self.n)

    def grid_values(self, side: str) -> np.ndarray:
        """The factor sampled at grid times, shape ``(n, K+1)``."""
        f = self.factor(side)
        inc = np.zeros((self.n, self.n_cells + 1))
        if f.dc is not None:
            inc[:, 1:] += f.dc
        np.add.at(inc, (f.jumps.path, f.jumps.cell + 1), f.jumps.mark)
        for k, c in enumerate(f.atom_cells):
            inc[:, c + 1] += f.atom_marks[:, k]
        return f.spec.x0 + np.cumsum(inc, axis=1)


def path_rng(seed: int, p: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(p),)))


def _draw_factor(rng: np.random.Generator, f: FactorSpec, K: int, dt: float, T: float):
    dc = rng.standard_normal(K) * (f.sigma * math.sqrt(dt)) if f.sigma > 0 else None
    if f.rate > 0:
        cnt = int(rng.poisson(f.rate * T))
        times = np.sort(rng.uniform(0.0, T, cnt))
        marks = rng.choice(np.asarray(f.marks), size=cnt, p=np.asarray(f.probs))
    else:
        times = np.zeros(0)
        marks = np.zeros(0)
    steps = np.array([rng.choice(np.asarray(s.marks), p=np.asarray(s.probs)) for s in f.steps], dtype=float)
    return dc, times, marks, steps


def simulate(scenario: McScenario, path_range: Sequence[int] | None = None) -> PathBundle:
    scenario.validate()
    K, dt, T = scenario.n_cells, scenario.dt, scenario.horizon
    ids = np.arange(scenario.paths) if path_range is None else np.asarray(list(path_range), dtype=np.int64)
    n = ids.size
    parts = {}
    draws = {"x": [], "y": []}
    for i, p in enumerate(ids):
        rng = path_rng(scenario.seed, int(p))
        draws["x"].append(_draw_factor(rng, scenario.x, K, dt, T))
        draws["y"].append(_draw_factor(rng, scenario.y, K, dt, T))
    for side, spec in (("x", scenario.x), ("y", scenario.y)):
        rows = draws[side]
        dc = np.stack([r[0] for r in rows]) if spec.sigma > 0 else None
        counts = np.array([r[1].size for r in rows], dtype=np.int64)
        path = np.repeat(np.arange(n, dtype=np.int64), counts)
        time = np.concatenate([r[1] for r in rows]) if n else np.zeros(0)
        mark = np.concatenate([r[2] for r in rows]).astype(float) if n else np.zeros(0)
        cell = np.minimum(np.floor(time / dt).astype(np.int64), K - 1)
        atom_cells = np.array([int(round(s.time / dt)) - 1 for s in spec.steps], dtype=np.int64)
        atom_marks = np.stack([r[3] for r in rows]) if spec.steps else np.zeros((n, 0))
        parts[side] = FactorPaths(spec, dc, Jumps(path, cell, time, mark), atom_cells, atom_marks)
    return PathBundle(scenario, dt, K, parts["x"], parts["y"], ids)


def mc_compensated_integral(bundle: PathBundle, W, compensator: AnalyticCompensator | None = None,
                            side: str = "x") -> np.ndarray:
    """``W * (mu - nu)`` on the grid, shape ``(n, K+1)``."""
    f = bundle.factor(side)
    comp = compensator or AnalyticCompensator.of(f.spec)
    inc = np.zeros((bundle.n, bundle.n_cells + 1))
    np.add.at(inc, (f.jumps.path, f.jumps.cell + 1), _apply(W, f.jumps.mark))
    inc[:, 1:] -= comp.density_hat(W) * bundle.dt
    for k, c in enumerate(f.atom_cells):
        realized = np.where(f.atom_marks[:, k] != 0, _apply(W, f.atom_marks[:, k]), 0.0)
        inc[:, c + 1] += realized - comp.atom_hat(k, W)
    return np.cumsum(inc, axis=1)


def _left_integrand(bundle: PathBundle, K, side: str) -> np.ndarray | float:
    if callable(K):
        X = bundle.grid_values(side)
        t = bundle.times()
        return np.stack([np.broadcast_to(np.asarray(K(t[c], X[:, c]), dtype=float), (bundle.n,))
                         for c in range(bundle.n_cells)], axis=1)
    K = np.asarray(K, dtype=float)
    if K.ndim == 0:
        return float(K)
    if K.shape == (bundle.n_cells,):
        return K[None, :]
    if K.shape == (bundle.n, bundle.n_cells):
        return K
    raise ValueError(f"integrand shape {K.shape} does not match the grid")


def mc_continuous_integral(bundle: PathBundle, K, side: str = "x") -> np.ndarray:
    """Left-point sums ``sum K_{t_c} (X^c_{t_{c+1}} - X^c_{t_c})``, shape ``(n, K+1)``.

    ``K`` is a scalar, a per-cell array, an ``(n, K)`` array or a callable
    ``K(t, x_left)`` evaluated at left grid points.
    """
    f = bundle.factor(side)
    out = np.zeros((bundle.n, bundle.n_cells + 1))
    if f.dc is None:
        return out
    np.cumsum(_left_integrand(bundle, K, side) * f.dc, axis=1, out=out[:, 1:])
    return out


@dataclass
class DriftResult:
    mean: float
    se: float
    n_se: float
    passed: bool
    borderline: bool

    @property
    def z(self) -> float:
        return self.mean / self.se if self.se > 0 else (0.0 if self.mean == 0 else math.inf)


def drift_test(values, n_se: float = 3.0) -> DriftResult:
    """Is the sample mean within ``n_se`` standard errors of zero?"""
    v = np.asarray(values, dtype=float).ravel()
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    passed = abs(mean) <= n_se * se or abs(mean) <= 1e-12
    borderline = se > 0 and abs(abs(mean) / se - n_se) < 1e-6
    return DriftResult(mean, se, n_se, bool(passed), bool(borderline))


@dataclass
class IsometryResult:
    lhs: float
    rhs: float
    se: float
    paths: int

    @property
    def z(self) -> float:
        return (self.lhs - self.rhs) / self.se if self.se > 0 else 0.0

    @property
    def rel_error(self) -> float:
        return abs(self.lhs - self.rhs) / abs(self.rhs)


def ito_isometry_check(scenario: McScenario, K, side: str = "x", chunk: int = 10_000) -> IsometryResult:
    """``E[(K.X^c_T)^2]`` against ``E[sum K^2 sigma^2 dt]``, streamed over path chunks."""
    sigma2 = scenario.x.sigma ** 2 if side == "x" else scenario.y.sigma ** 2
    s1 = s2 = 0.0
    rhs_sum = 0.0
    n = scenario.paths
    for start in range(0, n, chunk):
        b = simulate(scenario, range(start, min(start + chunk, n)))
        k = np.broadcast_to(_left_integrand(b, K, side), (b.n, b.n_cells))
        i_t = mc_continuous_integral(b, k, side)[:, -1]
        q = np.sum(k * k, axis=1) * sigma2 * b.dt
        d = i_t ** 2 - q
        s1 += float(d.sum())
        s2 += float((d * d).sum())
        rhs_sum += float(q.sum())
    mean_d = s1 / n
    var = max(s2 / n - mean_d ** 2, 0.0) * n / max(n - 1, 1)
    rhs = rhs_sum / n
    return IsometryResult(rhs + mean_d, rhs, math.sqrt(var / n), n)


def _deterministic(K, times: np.ndarray) -> np.ndarray:
    if callable(K):
        return np.array([float(K(t)) for t in times])
    return np.full(times.size, float(K))


@dataclass
class ProductMcReport:
    dt: float
    residual: float
    sup_per_path: np.ndarray
    M_T: np.ndarray
    N_T: np.ndarray
    hc_T: np.ndarray
    gi_T: np.ndarray
    backend: str


def _kernel_inputs(bundle: PathBundle, W, V, K, J):
    n, Kc, dt = bundle.n, bundle.n_cells, bundle.dt
    left = bundle.times()[:-1]
    dmc = np.zeros((n, Kc)) if bundle.x.dc is None else bundle.x.dc * _deterministic(K, left)[None, :]
    dnc = np.zeros((n, Kc)) if bundle.y.dc is None else bundle.y.dc * _deterministic(J, left)[None, :]

    jx, jy = bundle.x.jumps, bundle.y.jumps
    cell = np.concatenate([jx.cell, jy.cell])
    path = np.concatenate([jx.path, jy.path])
    time = np.concatenate([jx.time, jy.time])
    side = np.concatenate([np.zeros(len(jx), np.int64), np.ones(len(jy), np.int64)])
    val = np.concatenate([_apply(W, jx.mark), _apply(V, jy.mark)])
    order = np.lexsort((time, path, cell))
    cell, path, time, side, val = cell[order], path[order], time[order], side[order], val[order]
    cell_off = np.searchsorted(cell, np.arange(Kc + 1), side="left").astype(np.int64)
    # rank of each event among the events of the same (cell, path)
    rank = np.zeros(cell.size, dtype=np.int64)
    if cell.size:
        key = cell * n + path
        new = np.r_[True, key[1:] != key[:-1]]
        start = np.flatnonzero(new)
        rank = np.arange(cell.size) - np.repeat(start, np.diff(np.r_[start, cell.size]))

    cx = AnalyticCompensator.of(bundle.x.spec)
    cy = AnalyticCompensator.of(bundle.y.spec)
    atom_cells = sorted(set(bundle.x.atom_cells.tolist()) | set(bundle.y.atom_cells.tolist()))
    A = len(atom_cells)
    atom_at = np.full(Kc, -1, dtype=np.int64)
    c1, c2 = np.zeros(A), np.zeros(A)
    awx, avy = np.zeros((n, A)), np.zeros((n, A))
    for a, c in enumerate(atom_cells):
        atom_at[c] = a
        for f, comp, fn, hat, real in ((bundle.x, cx, W, c1, awx), (bundle.y, cy, V, c2, avy)):
            hits = np.flatnonzero(f.atom_cells == c)
            if hits.size:
                k = int(hits[0])
                hat[a] = comp.atom_hat(k, fn)
                marks = f.atom_marks[:, k]
                real[:, a] = np.where(marks != 0, _apply(fn, marks), 0.0)
    c3 = -c1 * c2
    au = awx * avy - c1[None, :] * avy - c2[None, :] * awx
    return dict(
        cell_off=cell_off, ev_path=path, ev_time=time, ev_side=side, ev_val=val, ev_rank=rank,
        dmc=dmc, dnc=dnc, a_x=cx.density_hat(W), a_y=cy.density_hat(V), dt=dt,
        atom_at=atom_at, c1=c1, c2=c2, c3=c3, awx=awx, avy=avy, au=au,
        m0=bundle.scenario.m0, n0=bundle.scenario.n0,
    )


def mc_verify_product(scenario: McScenario | PathBundle, W, V, K=1.0, J=1.0,
                      backend: str | None = None) -> ProductMcReport:
    """Residual of ``MN - M_0N_0 = H.Z^c + G*(mu^Z - nu^Z)`` on the grid.

    ``M = M_0 + K.X^c + W*(mu^X - nu^X)`` and ``N`` likewise are built
    alongside the identity.  ``K`` and ``J`` are deterministic: scalars or
    functions of time.  ``H = (N_- K, M_- J)``.
    """
    bundle = scenario if isinstance(scenario, PathBundle) else simulate(scenario)
    backend = backend or default_backend()
    sup, M, N, hc, gi = product_residual(**_kernel_inputs(bundle, W, V, K, J), backend=backend)
    return ProductMcReport(bundle.dt, float(sup.max()) if sup.size else 0.0, sup, M, N, hc, gi, backend)


@dataclass
class ConvergenceRow:
    dt: float
    residual: float
    ratio: float | None


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    monotone: bool
    violations: list[int]

    def ratios(self) -> list[float]:
        return [r.ratio for r in self.rows if r.ratio is not None]

    def to_csv(self) -> str:
        lines = ["dt,R,ratio"]
        for r in self.rows:
            lines.append(f"{r.dt!r},{r.residual!r},{'' if r.ratio is None else repr(r.ratio)}")
        return "\n".join(lines) + "\n"


def convergence_study(scenario: McScenario, W, V, K=1.0, J=1.0, dts: Sequence[float] | None = None,
                      backend: str | None = None, noise: float = 0.05, floor: float = 1e-10,
                      bundle: PathBundle | None = None) -> ConvergenceTable:
    """Residual ladder from coarse to fine, all grids sharing one set of paths.

    A row whose residual exceeds its predecessor by more than ``noise``
    (relative) and ``floor`` (absolute) is flagged as non-monotone.
    ``bundle`` may supply paths already simulated on the finest grid.
    """
    dts = sorted({float(d) for d in (dts or [scenario.dt])}, reverse=True)
    finest = dts[-1]
    if bundle is None:
        bundle = simulate(replace(scenario, dt=finest))
    elif abs(bundle.dt - finest) > GRID_RTOL * finest:
        raise BadGrid("supplied bundle is not on the finest grid of the ladder")
    rows: list[ConvergenceRow] = []
    for d in dts:
        m = d / finest
        if abs(m - round(m)) > GRID_RTOL * m:
            raise BadGrid(f"grid {d} is not a multiple of {finest}")
        rep = mc_verify_product(bundle.coarsen(int(round(m))), W, V, K, J, backend)
        prev = rows[-1].residual if rows else None
        ratio = None if prev is None or prev == 0 else rep.residual / prev
        rows.append(ConvergenceRow(d, rep.residual, ratio))
    violations = [
        i for i in range(1, len(rows))
        if rows[i].residual > rows[i - 1].residual * (1 + noise) and rows[i].residual > floor
    ]
    return ConvergenceTable(rows, not violations, violations)
