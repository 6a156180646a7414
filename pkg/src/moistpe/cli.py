"""Command-line interface.

Exit codes: 0 success, 1 a check failed (report still written), 2 usage or
configuration error, 3 runtime fault (non-finite state, solver failure).
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, Config, load_config, serialize
from .diagnostic import CompatibilityError, NonConvergence
from .io import write_json
from .scenarios import BOUND_SCENARIOS, SCENARIOS, scenario_config
from .stepper import NumericalFault

log = logging.getLogger("moistpe")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_FAULT = 0, 1, 2, 3


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset after it
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="sectioned key = value configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=S, metavar="KEY=VALUE",
                   help="override a dotted config key (repeatable)")
    p.add_argument("--threads", type=int, default=S,
                   help="thread count (the solver is single-threaded; value is recorded)")
    p.add_argument("--seed", type=int, default=S, help="seed for the initial perturbation")
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--overwrite", action="store_true", default=S,
                   help="replace existing output files")
    p.add_argument("--dump-defaults", action="store_true", default=S,
                   help="print the fully resolved configuration and exit")
    p.add_argument("-v", "--verbose", action="store_true", default=S)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="moistpe", parents=[common],
                                 description="Moist primitive-equations simulator and verification suite.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("run", parents=[common], help="integrate one configuration")
    p.add_argument("--scenario", choices=sorted(SCENARIOS), help="start from a named preset")
    p.add_argument("--steps", type=int, help="number of steps (default from time.steps/t_end)")
    p.add_argument("--regression", action="store_true",
                   help="run the frozen warm-bubble regression and compare with the baseline")

    sub.add_parser("verify-operators", parents=[common],
                   help="operator, continuity, inequality and microphysics property checks")

    p = sub.add_parser("verify-bounds", parents=[common],
                       help="maximum-principle monitor and energy checks on the acceptance scenarios")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--scenarios", default=",".join(BOUND_SCENARIOS))

    p = sub.add_parser("converge-eps", parents=[common], help="regularization-limit study")
    p.add_argument("--which", choices=("eps1", "eps2"), required=True)
    p.add_argument("--values", type=_floats, default=None)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--scenario", choices=sorted(SCENARIOS), default="saturated_blob")

    p = sub.add_parser("uniqueness", parents=[common], help="paired-run continuous-dependence experiment")
    p.add_argument("--amplitudes", type=_floats, default=[1e-4, 1e-5, 1e-6])
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--perturb", default="velocity", choices=("velocity", "T", "qv", "qc", "qr"))
    p.add_argument("--scenario", choices=sorted(SCENARIOS), default="uniqueness")

    p = sub.add_parser("mms", parents=[common], help="manufactured-solution convergence study")
    p.add_argument("--scheme", choices=("centered", "upwind"), default="centered")
    p.add_argument("--sizes", type=_ints, default=[16, 32, 64])
    p.add_argument("--t-end", type=float, default=0.02)
    return ap


def _opt(args, name, default=None):
    return getattr(args, name, default)


def _overrides(args) -> dict[str, str]:
    out = {}
    for item in _opt(args, "overrides", []) or []:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected KEY=VALUE")
        key, val = item.split("=", 1)
        out[key.strip()] = val.strip()
    seed = _opt(args, "seed")
    if seed is not None:
        out["initial.seed"] = str(seed)
    return out


def _config(args, scenario: str | None = None) -> Config:
    if scenario is not None:
        return scenario_config(scenario, _opt(args, "config"), _overrides(args))
    return load_config(_opt(args, "config"), _overrides(args))


def _out_dir(args, cfg: Config | None, name: str) -> Path:
    out = _opt(args, "out")
    if out is None:
        out = Path(cfg.run.out_dir if cfg is not None else "output") / name
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(out: Path, summary: dict, passed: bool, args) -> int:
    summary.update({"passed": bool(passed), "version": __version__,
                    "threads": _opt(args, "threads", 1), "command": args.command})
    write_json(out / "summary.json", summary)
    print(f"\n{'PASS' if passed else 'FAIL'}  summary written to {out / 'summary.json'}")
    return EXIT_OK if passed else EXIT_CHECK


# --- subcommands -----------------------------------------------------------------


def cmd_run(args) -> int:
    from .baselines import check_regression, regression_config
    from .runner import run

    if args.regression:
        cfg = regression_config(_overrides(args))
        steps = args.steps or 200
    else:
        cfg = _config(args, args.scenario)
        steps = args.steps
    out = _out_dir(args, cfg, "run")
    _, records, violations = run(cfg, out, overwrite=bool(_opt(args, "overwrite", False)), nsteps=steps)
    summary = {"steps": records[-1].step, "time": records[-1].time,
               "final_v_H1": records[-1].v_H1, "bound_violations": len(violations)}
    passed = True
    if args.regression:
        reg = check_regression(records[-1].v_H1)
        summary["regression"] = reg
        passed = reg["passed"]
        print(f"regression |v|_H1 = {reg['value']!r} expected {reg['expected']!r}: "
              f"{'PASS' if passed else 'FAIL'}")
    return _finish(out, summary, passed, args)


def cmd_verify_operators(args) -> int:
    from .baselines import load_baselines
    from .io import read_snapshot, write_snapshot
    from .stepper import Model, initial_state
    from .verification import Check, format_table, operator_checks

    cfg = _config(args)
    out = _out_dir(args, cfg, "verify-operators")
    checks = operator_checks(load_baselines())
    model = Model.build(cfg.replace(run={"nx": 8, "ny": 8, "nlev": 4}))
    s = initial_state(model)
    write_snapshot(s, out, "roundtrip", overwrite=True)
    back = read_snapshot(out, "roundtrip")
    exact = all(np.array_equal(getattr(s, n), getattr(back, n)) for n in ("v1", "v2", "T", "qv", "w", "Phi"))
    checks.append(Check("snapshot round-trip bit-exact", 0.0 if exact else 1.0, 0.0, exact))
    print(format_table(checks))
    passed = all(c.passed for c in checks)
    return _finish(out, {"checks": [c.as_dict() for c in checks]}, passed, args)


def cmd_verify_bounds(args) -> int:
    from .analysis.energy import dissipation_check, energy_budget_check
    from .baselines import load_baselines
    from .plotting import plot_bars
    from .runner import run
    from .verification import Check, format_table

    base = load_baselines()
    names = [s for s in args.scenarios.split(",") if s]
    out = _out_dir(args, None, "verify-bounds")
    checks, report = [], {}
    for name in names + ["decay"]:
        cfg = scenario_config(name, _opt(args, "config"), _overrides(args))
        print(f"--- {name}")
        _, records, violations = run(cfg, out / name, overwrite=True, nsteps=args.steps)
        entry = {"violations": [dict(v.__dict__) for v in violations[:20]],
                 "n_violations": len(violations)}
        if name != "decay":
            worst = max((v.magnitude for v in violations), default=0.0)
            checks.append(Check(f"{name}: bounds hold at every step", worst, 0.0, not violations,
                                f"{len(violations)} violations"))
        c_hat = base.get(name, {}).get("C_hat")
        if c_hat is not None:
            bud = energy_budget_check(records, cfg.phys.mu_v, c_hat)
            entry["budget"] = bud.as_dict()
            checks.append(Check(f"{name}: energy budget with recorded C_hat", bud.max_margin, 0.0,
                                bud.passed, f"C_hat = {c_hat:.3g}"))
        if name == "decay":
            d = dissipation_check(records, cfg.phys.mu_v)
            entry["dissipation"] = d.as_dict()
            checks.append(Check("decay: |v|^2 nonincreasing", 0.0 if d.monotone else 1.0, 0.0, d.monotone,
                                "" if d.monotone else f"first increase at step {d.first_increase}"))
            checks.append(Check("decay: drop matches 2 mu int |grad v|^2", d.relative_gap, 0.05,
                                d.passed()))
        report[name] = entry
    print(format_table(checks))
    plot_bars([c.name.split(":")[0] for c in checks], [max(c.value, 1e-300) for c in checks],
              out / "margins.png", ylabel="measured value")
    return _finish(out, {"steps": args.steps, "scenarios": report,
                         "checks": [c.as_dict() for c in checks]},
                   all(c.passed for c in checks), args)


def cmd_converge_eps(args) -> int:
    from .analysis.convergence import converge_eps
    from .plotting import plot_bars

    values = args.values or ([1e-1, 1e-2, 1e-3] if args.which == "eps2" else [1e-2, 1e-3, 1e-4])
    cfg = _config(args, args.scenario)
    out = _out_dir(args, cfg, "converge-eps")
    res = converge_eps(cfg, args.which, values, args.steps)
    for v, d in zip(res["values"], res["differences"]):
        print(f"{args.which} = {v:.1e}   difference = {d:.6e}")
    print("ratios:", ", ".join(f"{r:.4g}" for r in res["ratios"]))
    plot_bars([f"{v:g}" for v in values], res["differences"], out / f"converge_{args.which}.png",
              ylabel="L2 difference")
    return _finish(out, res, res["passed"], args)


def cmd_uniqueness(args) -> int:
    from .analysis.uniqueness import scaling_check, uniqueness_experiment
    from .baselines import load_baselines
    from .plotting import plot_psi

    cfg = _config(args, args.scenario)
    out = _out_dir(args, cfg, "uniqueness")
    C = load_baselines().get("uniqueness", {}).get("a7")
    amps = list(args.amplitudes)
    metrics = uniqueness_experiment(cfg, amps + [0.0], args.steps, perturb=args.perturb)
    zero = metrics.pop()
    scale = scaling_check(metrics)
    zero_exact = bool(np.all(zero.psi == 0.0))
    envelope = C is not None and all(m.within_envelope(C) for m in metrics)
    for m in metrics:
        print(f"a = {m.amplitude:.1e}  Psi(0)/a^2 = {m.psi[0] / m.amplitude**2:.6e}  "
              f"Psi(T)/a^2 = {m.psi[-1] / m.amplitude**2:.6e}  C_est = {m.a7_constant():.4g}")
    print(f"spread {scale['spread']:.6f}  zero perturbation exact: {zero_exact}  "
          f"within envelope (C = {C}): {envelope}")
    plot_psi(metrics, out / "psi.png", C)
    summary = {"amplitudes": amps, "perturb": args.perturb, "steps": args.steps,
               "scaling": scale, "zero_perturbation_exact": zero_exact,
               "a7_constant": C, "within_envelope": envelope,
               "runs": [m.summary(C) for m in metrics]}
    return _finish(out, summary, scale["passed"] and zero_exact and envelope, args)


def cmd_mms(args) -> int:
    from .analysis.convergence import mms
    from .plotting import plot_convergence

    out = _out_dir(args, None, "mms")
    res = mms(args.scheme, args.sizes, args.t_end)
    for n, e in zip(res["sizes"], res["errors"]):
        print(f"n = {n:4d}   L2 error = {e:.6e}")
    print(f"fitted slope {res['fitted_slope']:.4f} (required >= {res['required']})")
    plot_convergence([1.0 / n for n in args.sizes], res["errors"], out / f"mms_{args.scheme}.png",
                     label=args.scheme, order=2.0 if args.scheme == "centered" else 1.0)
    return _finish(out, res, res["passed"], args)


COMMANDS = {
    "run": cmd_run,
    "verify-operators": cmd_verify_operators,
    "verify-bounds": cmd_verify_bounds,
    "converge-eps": cmd_converge_eps,
    "uniqueness": cmd_uniqueness,
    "mms": cmd_mms,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if _opt(args, "verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if _opt(args, "dump_defaults"):
            scenario = getattr(args, "scenario", None)
            sys.stdout.write(serialize(_config(args, scenario)))
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            print("moistpe: error: a subcommand is required", file=sys.stderr)
            return EXIT_USAGE
        t0 = time.perf_counter()
        code = COMMANDS[args.command](args)
        log.info("%s finished in %.1f s", args.command, time.perf_counter() - t0)
        return code
    except (ConfigError, FileExistsError, argparse.ArgumentTypeError) as exc:
        print(f"moistpe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFault, NonConvergence, CompatibilityError, FloatingPointError) as exc:
        print(f"moistpe: runtime fault: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
