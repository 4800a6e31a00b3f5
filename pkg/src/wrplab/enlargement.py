"""Independent products of finite filtered models and the product-martingale constructions.

For factor models ``F`` and ``H`` the product has outcomes ``(i, j)`` in
lexicographic order, weights ``w_F[i] * w_H[j]`` and atoms
``P^F_t x P^H_t``.  Factors with a shorter horizon are frozen after their
last time.

Given ``M = M_0 + W * (mu^X - nu^X)`` on ``F`` and
``N = N_0 + V * (mu^Y - nu^Y)`` on ``H``, the product ``MN`` is written as
``M_0 N_0 + G * (mu^Z - nu^Z)`` on the product with ``Z = (X, Y)`` and

    U = W V 1_{x!=0, y!=0} - W_hat V 1_{y!=0} - V_hat W 1_{x!=0}
    G = N_- W 1_{x!=0} + M_- V 1_{y!=0} + U

where the hats are the atom compensators at the current time.  The
continuous-martingale part of that identity has no discrete analogue and
is exercised by :mod:`wrplab.levy_mc`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FactorLacksWrp, RepresentationMismatch
from .finite_model import (
    DEFAULT_TOL,
    FiniteModel,
    as_process,
    canonical_labels,
    is_martingale,
    jump_process,
    new_model,
    predictable_projection,
)
from .jump_calculus import (
    CompensatorTable,
    Mark,
    PredictableFunction,
    compensated_integral,
    compensator_nu,
    is_zero_mark,
    predictable_covariation,
    quadratic_covariation,
    realized_marks,
    w_hat,
    w_tilde,
)
from .wrp_check import WrpReport, has_wrp


def extend_horizon(X: np.ndarray, horizon: int) -> np.ndarray:
    """Freeze a path array after its last time."""
    X = np.asarray(X, dtype=float)
    extra = horizon + 1 - X.shape[1]
    if extra <= 0:
        return X
    tail = np.repeat(X[:, -1:], extra, axis=1)
    return np.concatenate([X, tail], axis=1)


@dataclass(frozen=True, eq=False)
class ProductModel:
    factors: tuple[FiniteModel, ...]
    product: FiniteModel
    coords: np.ndarray  # (n, k): factor outcome index of each product outcome

    @property
    def base_f(self) -> FiniteModel:
        return self.factors[0]

    @property
    def base_h(self) -> FiniteModel:
        return self.factors[1]

    def lift(self, k: int, X) -> np.ndarray:
        """Lift a factor-``k`` process (or random variable) to the product."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return X[self.coords[:, k]]
        return extend_horizon(X, self.product.horizon)[self.coords[:, k]]

    def lift_increments(self, k: int, D) -> np.ndarray:
        """Lift a per-step quantity (jumps, hats, tildes); zero past the factor horizon."""
        D = np.asarray(D, dtype=float)
        pad = self.product.horizon + 1 - D.shape[1]
        if pad:
            D = np.concatenate([D, np.zeros((D.shape[0], pad) + D.shape[2:])], axis=1)
        return D[self.coords[:, k]]

    def factor_atom(self, k: int, t: int, g_atom: int) -> int:
        f = self.factors[k]
        i = int(self.product.representative(t)[g_atom])
        return int(f.labels[min(t, f.horizon), self.coords[i, k]])

    def _atom_map(self, k: int, t: int) -> np.ndarray:
        f = self.factors[k]
        reps = self.product.representative(t)
        return f.labels[min(t, f.horizon), self.coords[reps, k]]

    def lift_table(self, k: int, nu: CompensatorTable) -> CompensatorTable:
        out = CompensatorTable(self.product.horizon, nu.dim_mark)
        for t in range(1, self.product.horizon + 1):
            amap = self._atom_map(k, t - 1)
            for g, a in enumerate(amap):
                row = nu.at(t, int(a))
                if row:
                    out.masses[(t, g)] = dict(row)
        return out

    def lift_function(self, k: int, W: PredictableFunction) -> PredictableFunction:
        values = {}
        for t in range(1, self.product.horizon + 1):
            amap = self._atom_map(k, t - 1)
            for (s, a, x), v in W.values.items():
                if s != t:
                    continue
                for g in np.flatnonzero(amap == a):
                    values[(t, int(g), x)] = v
        return PredictableFunction(W.dim_mark, values)


def _combine(models: list[FiniteModel], coords: np.ndarray, names: list[str]) -> FiniteModel:
    horizon = max(m.horizon for m in models)
    weights = np.ones(coords.shape[0])
    for k, m in enumerate(models):
        weights = weights * m.weights[coords[:, k]]
    rows = []
    for t in range(horizon + 1):
        key = np.zeros(coords.shape[0], dtype=np.int64)
        for k, m in enumerate(models):
            lab = m.labels[min(t, m.horizon), coords[:, k]]
            key = key * m.n + lab
        rows.append(canonical_labels(key))
    weights = weights / weights.sum()
    return new_model(weights, rows, names)


def _pair(a: FiniteModel, b: FiniteModel) -> tuple[FiniteModel, np.ndarray]:
    coords = np.array([(i, j) for i in range(a.n) for j in range(b.n)], dtype=np.int64)
    names = [f"({a.outcomes[i]},{b.outcomes[j]})" for i, j in coords]
    return _combine([a, b], coords, names), coords


def product_model(*models: FiniteModel) -> ProductModel:
    """Independent product built by left association ``((F1 x F2) x F3) ...``."""
    if not models:
        raise ValueError("need at least one factor")
    current = models[0]
    coords = np.arange(current.n, dtype=np.int64)[:, None]
    for m in models[1:]:
        current, pair = _pair(current, m)
        coords = np.column_stack([coords[pair[:, 0]], pair[:, 1]])
    return ProductModel(tuple(models), current, coords)


# ------------------------------------------------------------ invariance


@dataclass
class InvarianceReport:
    ok: bool
    nu_violation: float
    what_violation: float
    wtilde_violation: float
    support_match: bool


def table_violation(a: CompensatorTable, b: CompensatorTable) -> tuple[bool, float]:
    keys_a = set(a.masses)
    keys_b = set(b.masses)
    if keys_a != keys_b:
        return False, float("inf")
    worst = 0.0
    for key in keys_a:
        ra, rb = a.masses[key], b.masses[key]
        if set(ra) != set(rb):
            return False, float("inf")
        worst = max(worst, max(abs(ra[x] - rb[x]) for x in ra))
    return True, worst


def characteristics_invariance_check(
    P: ProductModel,
    X,
    k: int = 0,
    n_random: int = 20,
    rng: np.random.Generator | None = None,
    tol: float = DEFAULT_TOL,
) -> InvarianceReport:
    """Compare compensator, hat and tilde of factor-``k`` process ``X`` before and after lifting."""
    rng = np.random.default_rng(0) if rng is None else rng
    f = P.factors[k]
    Xf = as_process(f, X)
    nu_f = compensator_nu(f, Xf)
    XG = as_process(P.product, P.lift(k, Xf))
    nu_g = compensator_nu(P.product, XG)
    match, nu_viol = table_violation(P.lift_table(k, nu_f), nu_g)
    what_v = wt_v = 0.0
    for _ in range(n_random):
        W = PredictableFunction.from_callable(nu_f, lambda t, a, x: rng.normal())
        WG = P.lift_function(k, W)
        what_v = max(what_v, float(np.max(np.abs(P.lift_increments(k, w_hat(f, W, nu_f)) - w_hat(P.product, WG, nu_g)))))
        wt_v = max(wt_v, float(np.max(np.abs(
            P.lift_increments(k, w_tilde(f, W, Xf, nu_f)) - w_tilde(P.product, WG, XG, nu_g)))))
    ok = match and max(nu_viol, what_v, wt_v) <= tol
    return InvarianceReport(ok, nu_viol, what_v, wt_v, match)


# ------------------------------------------------------------ embedding


def _split(mark: Mark, d: int) -> tuple[Mark, Mark]:
    return mark[:d], mark[d:]


def embed_integrand(
    model: FiniteModel,
    W: PredictableFunction,
    nu_z: CompensatorTable,
    d: int,
    side: int = 0,
) -> PredictableFunction:
    """``(x, y) -> W(x) 1_{x != 0}`` (side 0) or ``W(y) 1_{y != 0}`` (side 1) on ``mu^Z``.

    ``d`` is the dimension of the first block of ``Z = (X, Y)``.
    """
    values = {}
    for t, a, z in nu_z.support():
        part = _split(z, d)[side]
        values[(t, a, z)] = 0.0 if is_zero_mark(part) else W(t, a, part)
    return PredictableFunction(nu_z.dim_mark, values)


def stack(*processes) -> np.ndarray:
    arrs = []
    for p in processes:
        p = np.asarray(p, dtype=float)
        arrs.append(p[:, :, None] if p.ndim == 2 else p)
    return np.concatenate(arrs, axis=2)


# ------------------------------------------------------------ product integrands


@dataclass
class ProductIntegrands:
    U: PredictableFunction
    G: PredictableFunction
    Wg1: PredictableFunction
    Vg2: PredictableFunction
    NWg1: PredictableFunction
    MVg2: PredictableFunction
    F: PredictableFunction
    XG: np.ndarray
    YG: np.ndarray
    Z: np.ndarray
    MG: np.ndarray
    NG: np.ndarray
    WG: PredictableFunction
    VG: PredictableFunction
    nu_x: CompensatorTable
    nu_y: CompensatorTable
    nu_z: CompensatorTable
    what: np.ndarray
    vhat: np.ndarray
    d: int = field(default=1)


def _check_representation(model: FiniteModel, M, W, X, tol: float, name: str) -> None:
    M = np.asarray(M, dtype=float)
    resid = np.max(np.abs(M - M[:, :1] - compensated_integral(model, W, X)))
    if resid > tol:
        raise RepresentationMismatch(f"{name} differs from its stated representation by {resid:.3e}")
    rep = is_martingale(model, M, tol)
    if not rep.ok:
        raise RepresentationMismatch(f"{name} is not a martingale ({rep.max_violation:.3e})")


def build_product_integrands(
    P: ProductModel,
    X, W: PredictableFunction, M,
    Y, V: PredictableFunction, N,
    tol: float = DEFAULT_TOL,
) -> ProductIntegrands:
    """Construct ``U`` and ``G`` for ``M`` on factor 0 and ``N`` on factor 1."""
    f, h = P.factors[0], P.factors[1]
    Xf, Yh = as_process(f, X), as_process(h, Y)
    _check_representation(f, M, W, Xf, tol, "M")
    _check_representation(h, N, V, Yh, tol, "N")
    G_model = P.product
    XG, YG = P.lift(0, Xf), P.lift(1, Yh)
    MG, NG = P.lift(0, M), P.lift(1, N)
    Z = stack(XG, YG)
    d = Xf.shape[2]
    nu_x = compensator_nu(G_model, XG)
    nu_y = compensator_nu(G_model, YG)
    nu_z = compensator_nu(G_model, Z)
    WG, VG = P.lift_function(0, W), P.lift_function(1, V)
    what = w_hat(G_model, WG, nu_x)
    vhat = w_hat(G_model, VG, nu_y)

    U, Gv, Fv, NW, MV = {}, {}, {}, {}, {}
    Wg1 = embed_integrand(G_model, WG, nu_z, d, 0)
    Vg2 = embed_integrand(G_model, VG, nu_z, d, 1)
    for t in range(1, G_model.horizon + 1):
        reps = G_model.representative(t - 1)
        for g, i in enumerate(reps):
            row = nu_z.at(t, g)
            if not row:
                continue
            wh, vh = what[i, t], vhat[i, t]
            n_prev, m_prev = NG[i, t - 1], MG[i, t - 1]
            for z in row:
                x, y = _split(z, d)
                xn, yn = not is_zero_mark(x), not is_zero_mark(y)
                wx = WG(t, g, x) if xn else 0.0
                vy = VG(t, g, y) if yn else 0.0
                fval = wx * vy if (xn and yn) else 0.0
                u = fval - wh * vy - vh * wx
                key = (t, g, z)
                Fv[key] = fval
                U[key] = u
                NW[key] = n_prev * wx
                MV[key] = m_prev * vy
                Gv[key] = n_prev * wx + m_prev * vy + u
    dim = nu_z.dim_mark
    return ProductIntegrands(
        U=PredictableFunction(dim, U), G=PredictableFunction(dim, Gv),
        Wg1=Wg1, Vg2=Vg2, NWg1=PredictableFunction(dim, NW), MVg2=PredictableFunction(dim, MV),
        F=PredictableFunction(dim, Fv), XG=XG, YG=YG, Z=Z, MG=MG, NG=NG, WG=WG, VG=VG,
        nu_x=nu_x, nu_y=nu_y, nu_z=nu_z, what=what, vhat=vhat, d=d,
    )


@dataclass
class IdentityResult:
    name: str
    max_violation: float
    ok: bool
    location: tuple[str, int] | None


@dataclass
class ProductReport:
    identities: dict[str, IdentityResult]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.identities.values())

    @property
    def max_violation(self) -> float:
        return max(r.max_violation for r in self.identities.values())

    @property
    def first_failure(self) -> IdentityResult | None:
        return next((r for r in self.identities.values() if not r.ok), None)


IDENTITIES = ("par-int", "rep-sq-br", "util", "proj", "embed", "terminal", "bracket-orth")


def _compare(model: FiniteModel, name: str, pairs, tol: float) -> IdentityResult:
    worst, loc = -1.0, None
    for lhs, rhs in pairs:
        diff = np.abs(np.asarray(lhs, dtype=float) - np.asarray(rhs, dtype=float))
        if diff.ndim == 3:
            diff = diff.max(axis=2)
        i, t = np.unravel_index(int(np.argmax(diff)), diff.shape)
        if diff[i, t] > worst:
            worst = float(diff[i, t])
            loc = (model.outcomes[i], int(t))
    ok = worst <= tol
    return IdentityResult(name, worst, ok, None if ok else loc)


def _bracket_integral(model: FiniteModel, K: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``sum_{s<=t} K_{s-} dX_s`` for scalar ``K``, ``X``."""
    dX = jump_process(model, X)
    Kl = np.zeros_like(K)
    Kl[:, 1:] = K[:, :-1]
    return np.cumsum(Kl * dX, axis=1)


def verify_product_representation(
    P: ProductModel,
    X, W: PredictableFunction, M,
    Y, V: PredictableFunction, N,
    tol: float = DEFAULT_TOL,
    identities=IDENTITIES,
) -> ProductReport:
    """Evaluate every product identity pathwise and report max violations."""
    pi = build_product_integrands(P, X, W, M, Y, V, N, tol)
    G_model = P.product
    MG, NG = pi.MG, pi.NG
    M0N0 = MG[:, :1] * NG[:, :1]
    results: dict[str, IdentityResult] = {}
    wt_x = w_tilde(G_model, pi.WG, pi.XG, pi.nu_x)
    wt_y = w_tilde(G_model, pi.VG, pi.YG, pi.nu_y)
    mn_bracket = quadratic_covariation(G_model, MG, NG)
    Nm = np.zeros_like(NG)
    Nm[:, 1:] = NG[:, :-1]
    Mm = np.zeros_like(MG)
    Mm[:, 1:] = MG[:, :-1]
    nm_dm = _bracket_integral(G_model, NG, MG)
    mm_dn = _bracket_integral(G_model, MG, NG)
    for name in identities:
        if name == "par-int":
            first = M0N0 + nm_dm + mm_dn + mn_bracket
            second = M0N0 + np.cumsum(Nm * wt_x, axis=1) + np.cumsum(Mm * wt_y, axis=1) + mn_bracket
            results[name] = _compare(G_model, name, [(MG * NG, first), (MG * NG, second)], tol)
        elif name == "rep-sq-br":
            rhs = compensated_integral(G_model, pi.U, pi.Z, pi.nu_z)
            results[name] = _compare(G_model, name, [(mn_bracket, rhs)], tol)
        elif name == "util":
            results[name] = _compare(G_model, name, [(w_tilde(G_model, pi.U, pi.Z, pi.nu_z), wt_x * wt_y)], tol)
        elif name == "proj":
            u_hat = w_hat(G_model, pi.U, pi.nu_z)
            f_proj = predictable_projection(G_model, _realized_f(G_model, pi))
            f_proj[:, 0] = 0.0
            pairs = [(u_hat, -pi.what * pi.vhat), (f_proj, pi.what * pi.vhat)]
            results[name] = _compare(G_model, name, pairs, tol)
        elif name == "embed":
            wx_int = compensated_integral(G_model, pi.WG, pi.XG, pi.nu_x)
            vy_int = compensated_integral(G_model, pi.VG, pi.YG, pi.nu_y)
            pairs = [
                (compensated_integral(G_model, pi.Wg1, pi.Z, pi.nu_z), wx_int),
                (compensated_integral(G_model, pi.Vg2, pi.Z, pi.nu_z), vy_int),
                (compensated_integral(G_model, pi.NWg1, pi.Z, pi.nu_z), _bracket_integral(G_model, NG, wx_int)),
                (compensated_integral(G_model, pi.MVg2, pi.Z, pi.nu_z), _bracket_integral(G_model, MG, vy_int)),
            ]
            results[name] = _compare(G_model, name, pairs, tol)
        elif name == "terminal":
            rhs = M0N0 + compensated_integral(G_model, pi.G, pi.Z, pi.nu_z)
            results[name] = _compare(G_model, name, [(MG * NG, rhs)], tol)
        elif name == "bracket-orth":
            angle = predictable_covariation(G_model, MG, NG)
            results[name] = _compare(G_model, name, [(angle, np.zeros_like(angle))], tol)
        else:
            raise ValueError(f"unknown identity {name!r}")
    return ProductReport(results)


def _realized_f(model: FiniteModel, pi: ProductIntegrands) -> np.ndarray:
    """``W(dX) V(dY) 1_{dX != 0, dY != 0}`` on every path."""
    marks = realized_marks(model, pi.Z)
    out = np.zeros((model.n, model.horizon + 1))
    for i in range(model.n):
        for t in range(1, model.horizon + 1):
            z = marks[i][t]
            if z is not None:
                out[i, t] = pi.F(t, int(model.labels[t - 1, i]), z)
    return out


# ------------------------------------------------------------ iterated products


@dataclass
class IteratedReport:
    holds: bool
    wrp: WrpReport
    factor_wrp: list[WrpReport]
    invariance: list[InvarianceReport]
    product: ProductModel


def iterated_product(
    models, Zs, tol: float = DEFAULT_TOL, n_random: int = 5,
    rng: np.random.Generator | None = None,
) -> IteratedReport:
    """n-fold independent product; checks WRP of the stacked process and per-factor invariance."""
    models = list(models)
    Zs = [as_process(m, z) for m, z in zip(models, Zs)]
    if len(models) != len(Zs):
        raise ValueError("one process per factor")
    factor_reports = []
    for k, (m, z) in enumerate(zip(models, Zs)):
        rep = has_wrp(m, z, tol)
        if not rep.holds:
            raise FactorLacksWrp(f"factor {k} lacks WRP ({rep.repr_dim} < {rep.mart_dim})")
        factor_reports.append(rep)
    P = product_model(*models)
    Zprod = stack(*[P.lift(k, z) for k, z in enumerate(Zs)])
    wrp = has_wrp(P.product, Zprod, tol)
    inv = [characteristics_invariance_check(P, z, k, n_random, rng, tol) for k, z in enumerate(Zs)]
    return IteratedReport(wrp.holds and all(r.ok for r in inv), wrp, factor_reports, inv, P)


def lifted_martingale_checks(P: ProductModel, M, N, tol: float = DEFAULT_TOL) -> tuple[bool, bool, bool]:
    """Lifted martingales stay martingales and their product is one."""
    MG, NG = P.lift(0, M), P.lift(1, N)
    return (
        is_martingale(P.product, MG, tol).ok,
        is_martingale(P.product, NG, tol).ok,
        is_martingale(P.product, MG * NG, tol).ok,
    )
