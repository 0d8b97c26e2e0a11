"""Command-line interface: ``projsplit {solve,compare,sweep,gen}``.

Settings are layered as built-in defaults < ``--config`` JSON file <
command-line flags. Exit codes: 0 converged (or Step-3 stop), 3 iteration
cap reached, 4 solver failure, 5 bad input. Failures also print one JSON
object ``{"status": ..., "reason": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import lasso
from .params import ParameterDomainError, beta_from_alpha
from .problem_io import MANIFEST_FILE, Manifest, ProblemFormatError, gen_problem, load_problem, parse_gen_spec
from .solver import SolverConfig, Status, solve
from .trace import FORMATS, save_trace

EXIT_OK = 0
EXIT_NOT_CONVERGED = 3
EXIT_FAILED = 4
EXIT_BAD_INPUT = 5

# flag name -> default; None means "not set"
DEFAULTS = {
    "alpha": 0.1,
    "alpha_bar": 0.17,
    "beta": None,
    "sigma": 0.99,
    "gamma": 1.0,
    "rho": 1.0,
    "tol": 1e-4,
    "residual_tol": 1e-6,
    "stop": "objective",
    "max_outer": 10_000,
    "blocks": None,
    "seed": 0,
    "format": "jsonl",
    "header": False,
    "workers": 1,
    "instances": 1,
    "baseline": "classical",
    "alpha_bar_grid": "0.05,0.10,0.15,0.20,0.25,0.30",
    "alpha_ratio": 0.5,
}


class InputError(ValueError):
    pass


@dataclass
class RunSpec:
    command: str
    settings: dict
    problem: list[str] | None = None
    gen: str | None = None
    trace: str | None = None
    report: str | None = None
    out: str | None = None


def _add_common(p: argparse.ArgumentParser, problem: bool = True) -> None:
    if problem:
        src = p.add_mutually_exclusive_group()
        src.add_argument("--problem", action="append", metavar="PATH",
                         help="problem CSV (rows q_1..q_d,b), a Q.csv/b.csv directory, or a manifest")
        src.add_argument("--gen", metavar="m,d,r[,seed]", help="generate a seeded random instance")
        p.add_argument("--blocks", type=int, help="row cells r for --problem (manifest value if present, else 1)")
    p.add_argument("--alpha", type=float, help="inertial parameter alpha_k (constant)")
    p.add_argument("--alpha-bar", type=float, dest="alpha_bar", help="upper bound alpha_bar, sets beta_bar")
    p.add_argument("--beta", type=float, help="relaxation beta_k (default beta_bar)")
    p.add_argument("--sigma", type=float, help="relative-error tolerance in [0, 1)")
    p.add_argument("--gamma", type=float, help="primal weight of the product-space metric")
    p.add_argument("--rho", type=float, help="resolvent stepsize for every block")
    p.add_argument("--tol", type=float, help="relative objective-gap tolerance")
    p.add_argument("--residual-tol", type=float, dest="residual_tol", help="residual tolerance for --stop residual")
    p.add_argument("--stop", choices=("objective", "residual"), help="termination rule")
    p.add_argument("--max-outer", type=int, dest="max_outer", help="outer iteration cap")
    p.add_argument("--seed", type=int, help="seed for --gen when it omits one")
    p.add_argument("--workers", type=int, help="threads for the per-block resolvents")
    p.add_argument("--report", metavar="PATH", help="write the JSON summary/report here")
    p.add_argument("--config", metavar="PATH", help="JSON file of settings (flag names as keys)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="projsplit", description="Inertial relative-error projective splitting for LASSO.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one LASSO instance")
    _add_common(s)
    s.add_argument("--trace", metavar="PATH", help="write one record per outer iteration")
    s.add_argument("--format", choices=FORMATS, help="trace format (default jsonl)")
    s.add_argument("--header", action="store_true", default=None, help="CSV header row")

    c = sub.add_parser("compare", help="classical vs inertial variant on the same instances")
    _add_common(c)
    c.add_argument("--instances", type=int, help="with --gen: number of consecutive seeds")
    c.add_argument("--baseline", choices=("classical", "same"),
                   help="variant A: alpha=0, beta=1, sigma=0 (classical) or the variant B settings (same)")

    w = sub.add_parser("sweep", help="beta_bar over an alpha_bar grid, optionally solving at each point")
    _add_common(w)
    w.add_argument("--alpha-bar-grid", dest="alpha_bar_grid", help="comma-separated alpha_bar values")
    w.add_argument("--alpha-ratio", type=float, dest="alpha_ratio",
                   help="with a problem, solve with alpha = ratio * alpha_bar (default 0.5)")
    w.add_argument("--format", choices=FORMATS, help="row format (default jsonl)")
    w.add_argument("--header", action="store_true", default=None, help="CSV header row")

    g = sub.add_parser("gen", help="write a seeded random instance and its manifest")
    g.add_argument("--gen", required=True, metavar="m,d,r[,seed]")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True, metavar="DIR")
    return ap


def resolve_settings(ns: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    cfg_path = getattr(ns, "config", None)
    if cfg_path:
        try:
            cfg = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {cfg_path}: {exc}") from None
        if not isinstance(cfg, dict):
            raise InputError(f"config {cfg_path} must hold a JSON object")
        for k, v in cfg.items():
            key = k.replace("-", "_")
            if key not in DEFAULTS:
                raise InputError(f"unknown config key {k!r}")
            settings[key] = v
    for key in DEFAULTS:
        v = getattr(ns, key, None)
        if v is not None:
            settings[key] = v
    return settings


def solver_config(st: dict) -> SolverConfig:
    """Variant-B configuration from settings, validated before any solve."""
    cfg = SolverConfig(
        alpha=float(st["alpha"]),
        alpha_bar=float(st["alpha_bar"]),
        beta=None if st["beta"] is None else float(st["beta"]),
        sigma=float(st["sigma"]),
        gamma=float(st["gamma"]),
        max_outer=int(st["max_outer"]),
        residual_tol=float(st["residual_tol"]) if st["stop"] == "residual" else None,
        workers=int(st["workers"]),
    )
    cfg.validate()
    return cfg


def _instances(spec: RunSpec, st: dict) -> list[lasso.Instance]:
    if spec.gen:
        m, d, r, seed = parse_gen_spec(spec.gen, int(st["seed"]))
        out = []
        for s in range(seed, seed + int(st["instances"])):
            Q, b, _ = gen_problem(m, d, r, s)
            out.append(lasso.Instance(f"rand{m}x{d}r{r}s{s}", Q, b, r, s))
        return out
    if not spec.problem:
        raise InputError("need --problem or --gen")
    out = []
    for path in spec.problem:
        Q, b = load_problem(path)
        r = st["blocks"]
        if r is None:
            p = Path(path)
            man = p if p.name == MANIFEST_FILE else (p if p.is_dir() else p.parent) / MANIFEST_FILE
            r = Manifest.read(man).r if man.exists() else 1
        out.append(lasso.Instance(Path(path).stem or str(path), Q, b, int(r)))
    return out


def _fail(status: str, reason: str, code: int) -> int:
    print(json.dumps({"status": status, "reason": reason}), file=sys.stderr)
    return code


def _write_report(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _reference(lp: lasso.LassoProblem) -> float:
    x, _ = lasso.ista_oracle(lp, 1e-10)
    return lasso.objective(lp, lasso.polish(lp, x))


def cmd_solve(spec: RunSpec, st: dict) -> int:
    cfg = solver_config(st)
    insts = _instances(spec, st)
    if len(insts) != 1:
        raise InputError("solve takes exactly one problem")
    inst = insts[0]
    lp, sp = lasso.build_problem(inst.Q, inst.b, inst.r, rho=float(st["rho"]))
    f_star = None
    cfg = replace(cfg, objective=lambda z: lasso.objective(lp, z))
    if st["stop"] == "objective":
        f_star = _reference(lp)
        tol = float(st["tol"])
        cfg = replace(cfg, objective_stop=lambda f: lasso.stop_criterion(f, f_star, tol))
    res = solve(sp, cfg)
    if spec.trace:
        save_trace(res.trace, spec.trace, st["format"], bool(st["header"]))
    xn = res.x_last if res.x_last is not None else res.z
    # the objective-gap rule is tested at z; x_n is the sparse prox output
    payload = {
        "status": res.status.value,
        "message": res.message,
        "iterations": res.iterations,
        "elapsed": res.elapsed,
        "lambda": lp.lam,
        "f_star": f_star,
        "objective_z": lasso.objective(lp, res.z),
        "objective_x_n": lasso.objective(lp, xn),
        "optimality_residual_x_n": lasso.optimality_residual(lp, xn),
        "z": res.z.tolist(),
        "x_n": xn.tolist(),
    }
    _write_report(spec.report, payload)
    if res.status in (Status.CONVERGED, Status.STOPPED_STEP3):
        return EXIT_OK
    if res.status is Status.FAILED:
        return _fail(res.status.value, res.message, EXIT_FAILED)
    return _fail(res.status.value, res.message, EXIT_NOT_CONVERGED)


def cmd_compare(spec: RunSpec, st: dict) -> int:
    cfg_b = solver_config(st)
    if st["baseline"] == "same":
        cfg_a = cfg_b
    else:
        cfg_a = lasso.classical_config(gamma=cfg_b.gamma, max_outer=cfg_b.max_outer, workers=cfg_b.workers)
    insts = _instances(spec, st)
    report = lasso.run_comparison(insts, cfg_a, cfg_b, tol=float(st["tol"]), rho=float(st["rho"]))
    if st["baseline"] == "same":
        report = replace(report, label_a="B (copy)")
    print("Outer iterations")
    print(report.table("iters"))
    print()
    print("Runtime (s)")
    print(report.table("times"))
    for note in report.notes:
        print(note)
    if spec.report:
        Path(spec.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    if not all(r.ok for r in report.rows):
        return _fail("failed", "; ".join(report.notes), EXIT_NOT_CONVERGED)
    return EXIT_OK


def _grid(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise InputError(f"bad alpha_bar grid {text!r}") from None


def cmd_sweep(spec: RunSpec, st: dict) -> int:
    grid = _grid(st["alpha_bar_grid"])
    insts = _instances(spec, st) if (spec.gen or spec.problem) else []
    rows = []
    for ab in grid:
        base = {"alpha_bar": ab, "beta_bar": beta_from_alpha(ab)}
        if not insts:
            rows.append(base)
        for inst in insts:
            lp, sp = lasso.build_problem(inst.Q, inst.b, inst.r, rho=float(st["rho"]))
            f_star = _reference(lp)
            tol = float(st["tol"])
            cfg = replace(
                solver_config({**st, "alpha_bar": ab, "alpha": float(st["alpha_ratio"]) * ab, "beta": None}),
                objective=lambda z, lp=lp: lasso.objective(lp, z),
                objective_stop=lambda f, fs=f_star: lasso.stop_criterion(f, fs, tol),
                residual_tol=None,
            )
            res = solve(sp, cfg)
            rows.append({**base, "problem": inst.name, "alpha": cfg.alpha,
                         "iterations": res.iterations, "status": res.status.value})
    out = open(spec.report, "w", newline="") if spec.report else sys.stdout
    try:
        if st["format"] == "jsonl":
            for row in rows:
                out.write(json.dumps(row) + "\n")
        else:
            keys = list(rows[0]) if rows else []
            if st["header"]:
                out.write(",".join(keys) + "\n")
            for row in rows:
                out.write(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k]) for k in keys) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_gen(spec: RunSpec, st: dict) -> int:
    m, d, r, seed = parse_gen_spec(spec.gen, int(st["seed"]))
    _, _, man = gen_problem(m, d, r, seed, spec.out)
    print(man.to_json())
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "compare": cmd_compare, "sweep": cmd_sweep, "gen": cmd_gen}


def run(spec: RunSpec) -> int:
    try:
        return COMMANDS[spec.command](spec, spec.settings)
    except (InputError, ProblemFormatError, FileNotFoundError, ParameterDomainError, ValueError) as exc:
        return _fail("bad_input", str(exc), EXIT_BAD_INPUT)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        settings = resolve_settings(ns)
    except InputError as exc:
        return _fail("bad_input", str(exc), EXIT_BAD_INPUT)
    spec = RunSpec(
        ns.command,
        settings,
        problem=getattr(ns, "problem", None),
        gen=getattr(ns, "gen", None),
        trace=getattr(ns, "trace", None),
        report=getattr(ns, "report", None),
        out=getattr(ns, "out", None),
    )
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
