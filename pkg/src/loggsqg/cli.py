"""Command line entry point ``loggsqg``.

Subcommands
-----------
check     class checks and admissibility scan for the suite of a config file
simulate  run the solver, write the norm CSV and snapshots
verify    run a comma-separated list of named experiments
probe     commutator | product | convexity | logidentity
norms     norms of a snapshot file

Exit status: 0 success, 1 failed assertion or inadmissible suite,
2 usage or parse error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import harness
from ._io import atomic_write_text
from .config import ConfigFile, load_config, parse_config, with_seed
from .errors import Blowup, GsqgError, ParseError, UsageError
from .multipliers import GAMMA_GRID, admissibility_check, log_identity_quadrature, verify_class
from .solver import run
from .spectral import WeightedNormSpec, lp_norm, read_snapshot, transform_backward, weighted_norm, write_snapshot

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


def _say(out, text: str):
    out.write(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------------------
# check


def cmd_check(cfg: ConfigFile, out=sys.stdout) -> int:
    """Class checks for every symbol plus admissibility over the gamma grid."""
    suite = cfg.multiplier_suite()
    ok = True
    checks = [("m", suite.m, "D"), ("p", suite.p, "C"), ("nu", suite.nu, "S")]
    checks += [(n, getattr(suite, n), "W") for n in ("p_a", "p_b", "omega_a", "omega_b")]
    for name, sym, cls in checks:
        rep = verify_class(sym, cls, m=suite.m if cls == "S" else None)
        ok &= rep.passed
        _say(out, f"class {cls} {name} = {sym}: {'pass' if rep.passed else 'FAIL'}")
        for line in rep.lines():
            _say(out, "  " + line)
    admissible_any = False
    for g in GAMMA_GRID:
        res = admissibility_check(suite, gamma=g)
        admissible_any |= res.admissible
        _say(
            out,
            f"admissibility gamma={g!r}: sup1={res.sup1!r} sup2={res.sup2!r} growth1={res.growth1!r} "
            f"growth2={res.growth2!r} {'admissible' if res.admissible else 'not admissible'}",
        )
    ok &= admissible_any
    _say(out, f"verdict={'admissible' if admissible_any else 'not admissible'} classes={'pass' if ok or not admissible_any else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(cfg: ConfigFile, out_dir: str | Path, base_dir: str | Path | None = None, out=sys.stdout) -> int:
    """Run the configured simulation; write ``norms.csv`` and ``snap_XXXXXX.bin`` files."""
    out_dir = Path(out_dir)
    theta0 = cfg.initial_field(base_dir)
    rc = cfg.run_config()
    try:
        traj, ns = run(rc, theta0)
    except Blowup as exc:
        series = getattr(exc, "series", None)
        if series is not None:
            atomic_write_text(out_dir / "norms.csv", series.to_csv_text())
        _say(out, f"blowup: {exc} (last good time {exc.last_good_time!r})")
        return EXIT_RUNTIME
    atomic_write_text(out_dir / "norms.csv", ns.to_csv_text())
    atomic_write_text(out_dir / "config.ini", cfg.to_text())
    for i, (t, f) in enumerate(traj.snapshots):
        write_snapshot(out_dir / f"snap_{i:06d}.bin", f)
    fin = ns.as_arrays()
    _say(out, f"final_time={traj.final_time!r}")
    for col in ("l2", "linf", "sob", "gevrey"):
        _say(out, f"final_{col}={float(fin[col][-1])!r}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _experiment_with_config(name: str, seed: int, cfg_text: str | None):
    if cfg_text is None:
        return harness.EXPERIMENTS[name](seed=seed)
    cfg = parse_config(cfg_text)
    rc, th0 = cfg.run_config(), cfg.initial_field()
    table = {
        "energy": lambda: harness.exp_energy_balance(rc, th0, seed=seed),
        "maxprin": lambda: harness.exp_max_principle(rc, th0),
        "smoothing": lambda: harness.exp_smoothing(rc, th0, seed=seed),
        "stability": lambda: harness.exp_stability(rc, th0, seed=seed),
        "kato": lambda: harness.exp_kato_split(rc, th0, seed=seed),
        "euler": lambda: harness.exp_global_euler(rc, th0, seed=seed),
        "viscosity": lambda: harness.exp_artificial_viscosity(rc, th0, seed=seed),
    }
    if name in table:
        return table[name]()
    return harness.EXPERIMENTS[name](seed=seed)


def cmd_verify(names: str, out_dir: str | Path | None, seed: int = 0, cfg: ConfigFile | None = None, jobs: int = 1, out=sys.stdout) -> int:
    """Run named experiments and aggregate their verdicts."""
    todo = [n.strip() for n in names.split(",") if n.strip()]
    unknown = [n for n in todo if n not in harness.EXPERIMENTS]
    if unknown:
        raise UsageError(f"unknown experiment(s) {', '.join(unknown)}; known: {', '.join(harness.EXPERIMENTS)}")
    cfg_text = cfg.to_text() if cfg is not None else None
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_experiment_with_config, todo, [seed] * len(todo), [cfg_text] * len(todo)))
    else:
        reports = [_experiment_with_config(n, seed, cfg_text) for n in todo]
    lines = []
    for rep in reports:
        if out_dir is not None:
            rep.write(out_dir)
        lines.append(f"{rep.experiment}={'pass' if rep.passed else 'FAIL'}")
        for a in rep.assertions:
            if not a.passed:
                lines.append(f"  {a.name}: measured {a.measured!r} {a.relation} {a.threshold!r}")
    passed = all(r.passed for r in reports)
    lines.append(f"aggregate={'pass' if passed else 'FAIL'} experiments={len(reports)}")
    if out_dir is not None:
        atomic_write_text(Path(out_dir) / "verify.report.txt", "\n".join(lines) + "\n")
    _say(out, "\n".join(lines))
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# probe


def cmd_probe(kind: str, args, out=sys.stdout) -> int:
    seed, trials = args.seed, args.trials
    if kind == "logidentity":
        lines, ok = [], True
        for lam in args.lam:
            q = log_identity_quadrature(lam)
            err = abs(q - math.log1p(lam))
            ok &= err <= 1e-8
            lines.append(f"lambda={lam!r} quadrature={q!r} log1p={math.log1p(lam)!r} error={err!r}")
        _say(out, "\n".join(lines))
        if args.out:
            atomic_write_text(Path(args.out) / "logidentity.report.txt", "\n".join(lines) + "\n")
        return EXIT_OK if ok else EXIT_FAIL
    js = tuple(range(args.j_min, args.j_max + 1))
    if kind == "commutator":
        samples = harness.probe_commutator(js, args.s, args.eps, trials=trials, seed=seed, N=args.n, variant=args.variant)
        rep = harness.probe_report("commutator", samples, js=js, s=args.s, eps=args.eps, trials=trials, seed=seed, N=args.n, variant=args.variant)
    elif kind == "product":
        samples, bony = harness.probe_product(js, args.s_prod, args.sbar, trials=trials, seed=seed, N=args.n)
        rep = harness.probe_report("product", samples, js=js, s=args.s_prod, sbar=args.sbar, trials=trials, seed=seed, N=args.n)
        rep.check("bony_residual", bony, 1e-11)
    else:
        rep = harness.EXPERIMENTS["convexity"](seed=seed)
    if args.out:
        rep.write(args.out)
    _say(out, rep.to_text())
    return EXIT_OK if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# norms


def cmd_norms(path: str | Path, beta: float = 1.0, out=sys.stdout) -> int:
    f = read_snapshot(path)
    x = transform_backward(f)
    grid = f.grid
    vals = {
        "N": grid.N,
        "mean": f.mean,
        "l2": lp_norm(x, 2.0, grid),
        "l4": lp_norm(x, 4.0, grid),
        "linf": lp_norm(x, math.inf, grid),
        "h1": weighted_norm(f, WeightedNormSpec(1.0)),
        "h1_beta": weighted_norm(f, WeightedNormSpec(1.0 + beta)),
    }
    for k, v in vals.items():
        _say(out, f"{k}={v!r}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loggsqg", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=_u64, default=None, help="RNG seed (overrides the config)")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers for verify")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="class checks and admissibility")
    sub.add_parser("simulate", parents=[common], help="run the solver")
    v = sub.add_parser("verify", parents=[common], help="run named experiments")
    v.add_argument("experiments", nargs="?", default="", help="comma-separated names: " + ",".join(harness.EXPERIMENTS))
    p = sub.add_parser("probe", parents=[common], help="estimate probes")
    p.add_argument("kind", choices=("commutator", "product", "convexity", "logidentity"))
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--j-min", type=int, default=3)
    p.add_argument("--j-max", type=int, default=5)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--s", type=float, default=0.0, help="commutator order s")
    p.add_argument("--eps", type=float, default=0.0, help="commutator epsilon")
    p.add_argument("--variant", choices=("localized", "nonlocal", "gevrey"), default="localized")
    p.add_argument("--s-prod", type=float, default=0.5, help="product exponent s")
    p.add_argument("--sbar", type=float, default=0.5, help="product exponent sbar")
    p.add_argument("--lam", type=float, nargs="+", default=[0.5, 1.0, 2.0, 10.0, 100.0])
    n = sub.add_parser("norms", parents=[common], help="norms of a snapshot")
    n.add_argument("snapshot")
    n.add_argument("--beta", type=float, default=1.0)
    return ap


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = None
        if args.config:
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg = with_seed(cfg, args.seed)
        seed = args.seed if args.seed is not None else (cfg.run.seed if cfg else 0)
        if args.command == "check":
            return cmd_check(cfg or ConfigFile(), out)
        if args.command == "simulate":
            if cfg is None:
                raise UsageError("simulate needs --config")
            base = Path(args.config).parent
            return cmd_simulate(cfg, args.out or (base / cfg.output.dir), base, out)
        if args.command == "verify":
            return cmd_verify(args.experiments, args.out, seed, cfg, max(1, args.jobs), out)
        if args.command == "probe":
            args.seed = seed
            return cmd_probe(args.kind, args, out)
        return cmd_norms(args.snapshot, args.beta, out)
    except (ParseError, UsageError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (GsqgError, OSError, ValueError, ArithmeticError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
