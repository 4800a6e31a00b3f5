"""Command-line scenario runner.

``wrplab run CONFIG`` runs a JSON config (or a builtin by name) and
writes a JSON report; ``wrplab list [FILTER]`` prints the builtin
catalog; ``wrplab show NAME`` prints a builtin's config.

Exit codes: 0 when every requested check passes, 1 when some check fails
(the report is still written), 2 on config or IO errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import io as wio
from .enlargement import (
    IDENTITIES,
    characteristics_invariance_check,
    lifted_martingale_checks,
    product_model,
    stack,
    verify_product_representation,
)
from .errors import BaseLacksWrp, ConfigError, FactorLacksWrp, NotAMartingale, WrpLabError
from .finite_model import as_process, is_martingale
from .jacod import build_tau_model, density_process, verify_wrp_theorem
from .jump_calculus import compensated_integral, compensator_nu
from .levy_mc import (
    FactorSpec,
    McScenario,
    convergence_study,
    drift_test,
    mc_compensated_integral,
    mc_continuous_integral,
    simulate,
)
from .scenarios import BUILTINS, get_builtin, list_builtin_scenarios
from .wrp_check import has_prp, has_wrp, solve_representation

KINDS = ("finite-wrp", "product", "iterated", "mc", "jacod")
CHECKS = {
    "finite-wrp": ("wrp", "prp", "represent"),
    "product": IDENTITIES + ("wrp", "invariance", "martingales"),
    "iterated": ("wrp", "invariance", "associativity"),
    "mc": ("exact", "ratio-band", "monotone", "drift"),
    "jacod": ("p1", "p2", "p3", "density-martingale", "l-martingale", "stopping-time", "wrp-direct", "wrp-q"),
}
REQUIRED = {
    "finite-wrp": ("model", "targets"),
    "product": ("f", "h", "X", "Y", "W", "V"),
    "iterated": ("models", "processes"),
    "mc": ("scenario", "W", "V"),
    "jacod": ("model", "process", "tau_values", "joint"),
}
DEFAULT_TOL = 1e-10
P3_TOL = 1e-12
REPR_TOL = 1e-9


def _clean(obj):
    """JSON-safe, deterministic plain data."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _row(name: str, ok: bool, **info) -> dict:
    return {"check": name, "status": "PASS" if ok else "FAIL", **info}


class Context:
    def __init__(self, cfg: dict, base: Path, seed: int, tol: float):
        self.cfg = cfg
        self.base = base
        self.seed = seed
        self.tol = tol

    def model(self, spec):
        if isinstance(spec, str):
            return wio.load_model(self.base / spec)
        if isinstance(spec, dict):
            return wio.model_from_dict(spec)
        raise ConfigError(f"model input must be a path or an inline document, got {type(spec).__name__}")

    @staticmethod
    def process(procs: dict, name: str) -> np.ndarray:
        try:
            return procs[name]
        except KeyError:
            raise ConfigError(f"model has no process named {name!r}") from None


# ------------------------------------------------------------------ runners


def run_finite_wrp(ctx: Context, checks) -> tuple[list, dict]:
    model, procs = ctx.model(ctx.cfg["model"])
    rows, details = [], {"mart_dim": None}
    targets = []
    for t in ctx.cfg["targets"]:
        comps = [as_process(model, ctx.process(procs, c)) for c in t.get("components", [])]
        if not comps:
            raise ConfigError("a target needs at least one component")
        Z = sum(comps) if t.get("sum") else np.concatenate(comps, axis=2)
        targets.append((t.get("label", "+".join(t["components"])), Z, bool(t.get("expect", True))))
    for label, Z, expect in targets:
        if "wrp" in checks:
            rep = has_wrp(model, Z, ctx.tol)
            details["mart_dim"] = rep.mart_dim
            rows.append(_row(f"wrp:{label}", rep.holds == expect, holds=rep.holds, expected=expect,
                             mart_dim=rep.mart_dim, repr_dim=rep.repr_dim, gap=rep.gap))
        if "prp" in checks:
            try:
                rep = has_prp(model, Z, ctx.tol)
                rows.append(_row(f"prp:{label}", rep.holds, holds=rep.holds,
                                 mart_dim=rep.mart_dim, prp_dim=rep.prp_dim))
            except NotAMartingale as exc:
                rows.append(_row(f"prp:{label}", False, error=str(exc)))
    if "represent" in checks:
        names = ctx.cfg.get("martingales")
        if not names:
            raise ConfigError("check 'represent' needs a 'martingales' list")
        for label, Z, expect in targets:
            if not expect:
                continue
            for name in names:
                N = ctx.process(procs, name)
                if N.ndim == 3:
                    N = N[:, :, 0]
                try:
                    res = solve_representation(model, N, Z, ctx.tol)
                except NotAMartingale as exc:
                    rows.append(_row(f"represent:{name}/{label}", False, error=str(exc)))
                    continue
                ok = res.residual <= REPR_TOL and res.pathwise_error <= ctx.tol
                rows.append(_row(f"represent:{name}/{label}", ok, residual=res.residual,
                                 pathwise_error=res.pathwise_error, W=res.W.to_rows()))
    return rows, details


def _factor_integrals(ctx: Context, model, X, spec, m0):
    nu = compensator_nu(model, X)
    W = wio.predictable_from_spec(spec, nu)
    return W, float(m0) + compensated_integral(model, W, X, nu)


def run_product(ctx: Context, checks) -> tuple[list, dict]:
    cfg = ctx.cfg
    f, fp = ctx.model(cfg["f"])
    h, hp = ctx.model(cfg["h"])
    X, Y = as_process(f, ctx.process(fp, cfg["X"])), as_process(h, ctx.process(hp, cfg["Y"]))
    W, M = _factor_integrals(ctx, f, X, cfg["W"], wio.number(cfg.get("M0", 0.0)))
    V, N = _factor_integrals(ctx, h, Y, cfg["V"], wio.number(cfg.get("N0", 0.0)))
    P = product_model(f, h)
    rows = []
    ids = [c for c in checks if c in IDENTITIES]
    if ids:
        rep = verify_product_representation(P, X, W, M, Y, V, N, ctx.tol, ids)
        for name in ids:
            r = rep.identities[name]
            rows.append(_row(name, r.ok, max_violation=r.max_violation,
                             location=None if r.ok else list(r.location) if r.location else None))
    details: dict[str, Any] = {"product_outcomes": P.product.n, "horizon": P.product.horizon}
    if "wrp" in checks:
        rf, rh = has_wrp(f, X, ctx.tol), has_wrp(h, Y, ctx.tol)
        rz = has_wrp(P.product, stack(P.lift(0, X), P.lift(1, Y)), ctx.tol)
        rows.append(_row("wrp", rz.holds, mart_dim=rz.mart_dim, repr_dim=rz.repr_dim,
                         factor_f=[rf.holds, rf.mart_dim, rf.repr_dim],
                         factor_h=[rh.holds, rh.mart_dim, rh.repr_dim]))
    if "invariance" in checks:
        rng = np.random.default_rng(ctx.seed)
        for k, proc in ((0, X), (1, Y)):
            inv = characteristics_invariance_check(P, proc, k, 20, rng, ctx.tol)
            rows.append(_row(f"invariance:{'fh'[k]}", inv.ok, nu_violation=inv.nu_violation,
                             what_violation=inv.what_violation, wtilde_violation=inv.wtilde_violation))
    if "martingales" in checks:
        mg, ng, prod = lifted_martingale_checks(P, M, N, ctx.tol)
        rows.append(_row("martingales", mg and ng and prod, lifted_m=mg, lifted_n=ng, product=prod))
    return rows, details


def run_iterated(ctx: Context, checks) -> tuple[list, dict]:
    from .enlargement import iterated_product

    loaded = [ctx.model(m) for m in ctx.cfg["models"]]
    names = ctx.cfg["processes"]
    if len(names) != len(loaded):
        raise ConfigError("one process name per model")
    models = [m for m, _ in loaded]
    Zs = [as_process(m, ctx.process(p, name)) for (m, p), name in zip(loaded, names)]
    rows: list = []
    try:
        rep = iterated_product(models, Zs, ctx.tol, 5, np.random.default_rng(ctx.seed))
    except FactorLacksWrp as exc:
        return [_row("precondition", False, error=str(exc))], {}
    if "wrp" in checks:
        rows.append(_row("wrp", rep.wrp.holds, mart_dim=rep.wrp.mart_dim, repr_dim=rep.wrp.repr_dim,
                         factors=[[r.mart_dim, r.repr_dim] for r in rep.factor_wrp]))
    if "invariance" in checks:
        rows.append(_row("invariance", all(r.ok for r in rep.invariance),
                         max_violation=max(max(r.nu_violation, r.what_violation, r.wtilde_violation)
                                           for r in rep.invariance)))
    if "associativity" in checks:
        left = rep.product.product
        right = models[-1]
        for m in reversed(models[:-1]):
            right = product_model(m, right).product
        same = left.same_as(right, ctx.tol)
        rz = has_wrp(right, stack(*[rep.product.lift(k, z) for k, z in enumerate(Zs)]), ctx.tol) if same else None
        ok = same and rz is not None and rz.repr_dim == rep.wrp.repr_dim
        rows.append(_row("associativity", ok, same_model=same))
    return rows, {"product_outcomes": rep.product.product.n}


def run_jacod(ctx: Context, checks) -> tuple[list, dict]:
    cfg = ctx.cfg
    base, procs = ctx.model(cfg["model"])
    X = ctx.process(procs, cfg["process"])
    joint = wio.numbers(cfg["joint"])
    tm = build_tau_model(base, cfg["tau_values"], joint)
    try:
        rep = verify_wrp_theorem(tm, X, ctx.tol)
    except BaseLacksWrp as exc:
        return [_row("precondition", False, error=str(exc))], {}
    dens = density_process(tm)
    q = rep.q
    table = {
        "p1": (q.p1, {"min_q": float(q.weights.min())}),
        "p2": (q.p2, {"f_violation": q.p2_f, "tau_violation": q.p2_tau}),
        "p3": (q.p3_residual <= P3_TOL, {"factorization_residual": q.p3_residual}),
        "density-martingale": (rep.density_martingale <= ctx.tol, {"max_violation": rep.density_martingale}),
        "l-martingale": (rep.l_martingale <= ctx.tol, {"max_violation": rep.l_martingale}),
        "stopping-time": (rep.tau_stopping_time, {}),
        "wrp-direct": (rep.direct.holds, {"mart_dim": rep.direct.mart_dim, "repr_dim": rep.direct.repr_dim}),
        "wrp-q": (rep.constructive, {
            "under_q": [rep.under_q.mart_dim, rep.under_q.repr_dim],
            "tau_model": [rep.tau_wrp.mart_dim, rep.tau_wrp.repr_dim],
            "product": [rep.product_wrp.mart_dim, rep.product_wrp.repr_dim],
            "q_vs_product_residual": rep.product_residual,
        }),
    }
    rows = [_row(c, table[c][0], **table[c][1]) for c in checks]
    details = {
        "tau_values": [_tau_json(u) for u in tm.tau_values],
        "density": dens.p,
        "q_weights": q.weights,
    }
    return rows, details


def _tau_json(u: float):
    return "inf" if math.isinf(u) else u


def run_mc(ctx: Context, checks) -> tuple[list, dict]:
    cfg = ctx.cfg
    sc = cfg["scenario"]
    levels = cfg.get("levels")
    dts = [2.0 ** -int(k) for k in levels] if levels else [float(d) for d in cfg.get("dts", [])]
    if not dts:
        raise ConfigError("mc config needs 'levels' or 'dts'")
    try:
        scenario = McScenario(
            x=FactorSpec.from_dict(sc.get("x", {})), y=FactorSpec.from_dict(sc.get("y", {})),
            dt=min(dts), horizon=float(sc.get("horizon", 1.0)), paths=int(sc.get("paths", 1000)),
            seed=ctx.seed, m0=float(sc.get("m0", 1.0)), n0=float(sc.get("n0", 1.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad mc scenario: {exc}") from exc
    W, V = wio.mark_function(cfg["W"]), wio.mark_function(cfg["V"])
    K, J = wio.number(cfg.get("K", 1.0)), wio.number(cfg.get("J", 1.0))
    bundle = simulate(scenario)
    table = convergence_study(scenario, W, V, K, J, dts, backend=cfg.get("backend"), bundle=bundle)
    exact_tol = float(cfg.get("exact_tol", ctx.tol))
    lo, hi = (float(v) for v in cfg.get("band", [0.5, 0.95]))
    rows = []
    if "exact" in checks:
        worst = max(r.residual for r in table.rows)
        rows.append(_row("exact", worst <= exact_tol, max_residual=worst))
    if "ratio-band" in checks:
        ratios = table.ratios()
        ok = bool(ratios) and all(lo <= r <= hi for r in ratios)
        rows.append(_row("ratio-band", ok, ratios=ratios, band=[lo, hi]))
    if "monotone" in checks:
        rows.append(_row("monotone", table.monotone, violations=table.violations))
    if "drift" in checks:
        integrals = {
            "W*(mu^X-nu^X)": mc_compensated_integral(bundle, W, side="x")[:, -1],
            "V*(mu^Y-nu^Y)": mc_compensated_integral(bundle, V, side="y")[:, -1],
            "K.X^c": mc_continuous_integral(bundle, K, side="x")[:, -1],
            "J.Y^c": mc_continuous_integral(bundle, J, side="y")[:, -1],
        }
        for name, vals in integrals.items():
            d = drift_test(vals)
            rows.append(_row(f"drift:{name}", d.passed, mean=d.mean, se=d.se, borderline=d.borderline))
    details = {
        "paths": scenario.paths,
        "ladder": [{"dt": r.dt, "R": r.residual, "ratio": r.ratio} for r in table.rows],
        "_csv": table.to_csv(),
    }
    return rows, details


RUNNERS = {
    "finite-wrp": run_finite_wrp,
    "product": run_product,
    "iterated": run_iterated,
    "mc": run_mc,
    "jacod": run_jacod,
}


# ------------------------------------------------------------------ driver


def validate_config(cfg: Any) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    missing = [k for k in REQUIRED[kind] if k not in cfg]
    if missing:
        raise ConfigError(f"{kind} config lacks required field(s): {', '.join(missing)}")
    checks = cfg.get("checks")
    if not isinstance(checks, list) or not checks:
        raise ConfigError("config needs a non-empty 'checks' list")
    unknown = [c for c in checks if c not in CHECKS[kind]]
    if unknown:
        raise ConfigError(f"unknown check(s) for {kind}: {', '.join(map(str, unknown))}")


def load_config(target: str) -> tuple[dict, Path, str]:
    path = Path(target)
    if path.is_file():
        return wio.load_json(path), path.resolve().parent, path.stem
    if target in BUILTINS:
        return get_builtin(target).materialize(), Path.cwd(), target
    raise ConfigError(f"no config file or builtin scenario named {target!r}")


def execute(cfg: dict, base: Path, name: str, seed: int | None = None,
            tolerance: float | None = None) -> dict:
    """Run a validated config and return the report (plain data)."""
    validate_config(cfg)
    seed = int(cfg.get("seed", 0)) if seed is None else int(seed)
    tol = float(cfg.get("tolerance", DEFAULT_TOL)) if tolerance is None else float(tolerance)
    checks = list(dict.fromkeys(cfg["checks"]))
    ctx = Context(cfg, base, seed, tol)
    rows, details = RUNNERS[cfg["kind"]](ctx, checks)
    passed = sum(r["status"] == "PASS" for r in rows)
    failed = len(rows) - passed
    report = {
        "scenario": name,
        "kind": cfg["kind"],
        "seed": seed,
        "tolerance": tol,
        "checks": rows,
        "details": details,
        "summary": {
            "passed": passed,
            "failed": failed,
            "status": "PASS" if failed == 0 and rows else "FAIL",
            "lines": [f"{r['status']} {r['check']}" for r in rows],
        },
    }
    return report


def run(target: str, seed: int | None = None, out: str | None = None,
        tolerance: float | None = None, stream=None) -> int:
    stream = stream or sys.stdout
    try:
        cfg, base, name = load_config(target)
        report = execute(cfg, base, name, seed, tolerance)
        csv = report["details"].pop("_csv", None) if isinstance(report.get("details"), dict) else None
        if out:
            out_path = Path(out)
        elif cfg.get("output"):
            out_path = base / cfg["output"]
        else:
            out_path = Path(f"{name}.report.json")
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(wio.dumps(_clean(report)), encoding="utf-8")
        if csv is not None:
            out_path.with_suffix(".ladder.csv").write_text(csv, encoding="utf-8")
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (WrpLabError, KeyError, ValueError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return 2
    for line in report["summary"]["lines"]:
        print(line, file=stream)
    s = report["summary"]
    print(f"{s['status']}: {s['passed']} passed, {s['failed']} failed -> {out_path}", file=stream)
    return 0 if s["status"] == "PASS" else 1


def _cmd_list(args) -> int:
    for b in list_builtin_scenarios(args.filter or ""):
        print(f"{b.name:34s} {b.config['kind']:11s} {b.description}")
    return 0


def _cmd_show(args) -> int:
    try:
        b = get_builtin(args.name)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    sys.stdout.write(wio.dumps(b.materialize()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wrplab", description="WRP verification scenarios")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a config file or builtin scenario")
    r.add_argument("config", help="path to a JSON config, or a builtin scenario name")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.add_argument("--out", default=None, help="report path (default: <name>.report.json)")
    r.add_argument("--tolerance", type=float, default=None, help="exact-check tolerance (default 1e-10)")
    ls = sub.add_parser("list", help="list builtin scenarios")
    ls.add_argument("filter", nargs="?", default="", help="substring filter")
    sh = sub.add_parser("show", help="print a builtin scenario config")
    sh.add_argument("name")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run(args.config, args.seed, args.out, args.tolerance)
    if args.command == "list":
        return _cmd_list(args)
    return _cmd_show(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
