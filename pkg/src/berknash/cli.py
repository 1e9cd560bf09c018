"""Command-line client: thin argument parsing over the service handlers.

Every subcommand writes JSON/CSV artifacts (default directory ``./out``) and
prints a one-screen summary with 15-significant-digit numerics.  Exit codes:
0 success, 1 file/parse/domain errors, 2 unknown command or bad arguments.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .service import handlers


@dataclass
class CommandOutcome:
    exit_code: int
    artifacts: list[str] = field(default_factory=list)
    summary: str = ""


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.15g}"
    return str(x)


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"cannot parse {path}: {exc}") from exc


def _write_json(path: Path, payload) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return str(path)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="berknash", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate an instance file")
    p.add_argument("instance")
    p.add_argument("--out", default="out")

    p = sub.add_parser("kl", help="KL profiles and misspecification level")
    p.add_argument("instance")
    p.add_argument("--out", default="out")

    p = sub.add_parser("breakpoints", help="break-point diagram of a two-action instance")
    p.add_argument("instance")
    p.add_argument("--contract", default=None)
    p.add_argument("--out", default="out")

    p = sub.add_parser("equilibria", help="grid scan for Berk-Nash equilibria")
    p.add_argument("instance")
    p.add_argument("--contract", required=True)
    p.add_argument("--grid", type=int, default=10_000)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--out", default="out")

    p = sub.add_parser("solve", help="revenue-optimal contract (two actions)")
    p.add_argument("instance")
    p.add_argument("--out", default="out")

    p = sub.add_parser("simulate", help="run the myopic Bayesian learner")
    p.add_argument("instance")
    p.add_argument("--contract", required=True)
    p.add_argument("-T", "--horizon", type=int, required=True, dest="horizon")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None, help="trajectory CSV path (default out/trajectory.csv)")

    p = sub.add_parser("scenario", help="build a named instance")
    scen = p.add_subparsers(dest="scenario", required=True)
    u = scen.add_parser("unhappy", help="revenue-loss environment")
    u.add_argument("--p", type=float, required=True)
    u.add_argument("--c", type=float, required=True)
    u.add_argument("--delta", type=float, required=True)
    u.add_argument("--correct", action="store_true")
    u.add_argument("--out", default="out")
    d = scen.add_parser("divergence", help="three-action cycling environment")
    d.add_argument("--out", default="out")

    p = sub.add_parser("reduce", help="embed a rounded bimatrix game into a contract instance")
    p.add_argument("--game", required=True, help="JSON file with integer matrices Y and Z")
    p.add_argument("--eps-prime", type=float, required=True, dest="eps_prime")
    p.add_argument("--out", default="out")
    return parser


def _cmd_validate(args) -> CommandOutcome:
    result = handlers.handle_validate(_load_json(args.instance))
    path = _write_json(Path(args.out) / "validated_instance.json", result["instance"])
    level = result["misspecification_level"]
    summary = (
        f"valid instance: {result['n_actions']} actions, {result['n_rewards']} rewards,"
        f" {result['n_beliefs']} beliefs\n"
        f"misspecification level: {'inf' if level is None else _fmt(level)}"
    )
    return CommandOutcome(0, [path], summary)


def _cmd_kl(args) -> CommandOutcome:
    result = handlers.handle_kl(_load_json(args.instance))
    path = _write_json(Path(args.out) / "kl_profiles.json", result)
    lines = []
    for prof in result["profiles"]:
        vals = ", ".join(
            "inf" if v is None else _fmt(v) for v in prof["kl_by_action"]
        )
        lines.append(f"{prof['belief']}: [{vals}]")
    level = result["misspecification_level"]
    lines.append(f"misspecification level: {'inf' if level is None else _fmt(level)}")
    return CommandOutcome(0, [path], "\n".join(lines))


def _cmd_breakpoints(args) -> CommandOutcome:
    contract = _load_json(args.contract) if args.contract else None
    result = handlers.handle_breakpoints(_load_json(args.instance), contract)
    path = _write_json(Path(args.out) / "break_points.json", result)
    summary = (
        "break points: [" + ", ".join(_fmt(v) for v in result["break_points"]) + "]\n"
        "region actions: " + str(result["region_actions"]) + "\n"
        f"reliable: {result['reliable']}"
    )
    if result["warnings"]:
        summary += "\nwarnings: " + "; ".join(result["warnings"])
    return CommandOutcome(0, [path], summary)


def _cmd_equilibria(args) -> CommandOutcome:
    result = handlers.handle_equilibria(
        _load_json(args.instance), _load_json(args.contract), args.grid, args.eps
    )
    path = _write_json(Path(args.out) / "equilibria.json", result)
    lines = [f"{result['count']} certificate(s) valid at eps = {_fmt(args.eps)}"]
    for cert in result["certificates"][:10]:
        lines.append(
            f"  alpha(a1) = {_fmt(cert['alpha'][0])},"
            f" optimality residual = {_fmt(cert['optimality_residual'])}"
        )
    if result["count"] > 10:
        lines.append(f"  ... ({result['count'] - 10} more)")
    return CommandOutcome(0, [path], "\n".join(lines))


def _cmd_solve(args) -> CommandOutcome:
    workers_env = os.environ.get("BERK_THREADS")
    max_workers = int(workers_env) if workers_env else (os.cpu_count() or 1)
    result = handlers.handle_solve(_load_json(args.instance), max_workers=max_workers)
    path = _write_json(Path(args.out) / "solve_report.json", result["report"])
    rep = result["report"]
    summary = (
        f"optimal revenue: {_fmt(rep['revenue'])}\n"
        f"contract: [{', '.join(_fmt(v) for v in rep['contract'])}]\n"
        f"alpha: [{', '.join(_fmt(v) for v in rep['alpha'])}]\n"
        f"support: actions {rep['support']['actions']} beliefs {rep['support']['beliefs']}\n"
        f"branch: {rep['branch']}"
    )
    return CommandOutcome(0, [path], summary)


def _cmd_simulate(args) -> CommandOutcome:
    instance_raw = _load_json(args.instance)
    contract_raw = _load_json(args.contract)
    traj = handlers.run_simulation(instance_raw, contract_raw, args.horizon, args.seed)
    summary_dict = handlers.summarize_trajectory(instance_raw, contract_raw, traj)
    csv_path = Path(args.out) if args.out else Path("out") / "trajectory.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    traj.to_csv(csv_path)
    json_path = _write_json(csv_path.with_name(csv_path.stem + "_summary.json"), summary_dict)
    freq = ", ".join(_fmt(v) for v in summary_dict["final_freq"])
    summary = (
        f"simulated T = {traj.horizon} with seed {traj.seed} ({traj.rng_algorithm})\n"
        f"final action frequency: [{freq}]\n"
        f"switches: {len(traj.switch_times)}"
    )
    cert = summary_dict["certificate"]
    if cert is not None:
        summary += (
            f"\nfinal-frequency certificate valid: {cert['valid']}"
            f" (optimality residual {_fmt(cert['optimality_residual'])})"
        )
    return CommandOutcome(0, [str(csv_path), json_path], summary)


def _cmd_scenario(args) -> CommandOutcome:
    if args.scenario == "unhappy":
        result = handlers.handle_scenario_unhappy(args.p, args.c, args.delta, args.correct)
        tag = "correct" if args.correct else "misspecified"
        path = _write_json(Path(args.out) / f"unhappy_{tag}_instance.json", result["instance"])
        b = result["bounds"]
        summary = (
            f"wrote {tag} revenue-loss instance (p = {_fmt(args.p)}, c = {_fmt(args.c)},"
            f" delta = {_fmt(args.delta)})\n"
            f"closed-form correct revenue:      {_fmt(b['correct_revenue'])}\n"
            f"closed-form misspecified revenue: {_fmt(b['misspec_revenue'])}\n"
            f"gap ratio: {_fmt(b['gap_ratio'])}"
        )
        return CommandOutcome(0, [path], summary)
    result = handlers.handle_scenario_divergence()
    p1 = _write_json(Path(args.out) / "divergence_instance.json", result["instance"])
    p2 = _write_json(Path(args.out) / "divergence_contract.json", result["contract"])
    return CommandOutcome(0, [p1, p2], "wrote three-action cycling instance and its contract")


def _cmd_reduce(args) -> CommandOutcome:
    game = _load_json(args.game)
    if not isinstance(game, dict) or "Y" not in game or "Z" not in game:
        raise ValueError(f"{args.game}: game file must be a JSON object with keys 'Y' and 'Z'")
    result = handlers.handle_reduce(game["Y"], game["Z"], args.eps_prime)
    red = result["reduction"]
    out = Path(args.out)
    paths = [
        _write_json(out / "reduction_instance.json", red["instance"]),
        _write_json(out / "reduction_contract.json", red["contract"]),
        _write_json(
            out / "reduction_meta.json",
            {
                "k": red["k"],
                "e_tilde": red["e_tilde"],
                "action_map": red["action_map"],
                "belief_map": red["belief_map"],
                "reward_layout": red["reward_layout"],
                "verification": result["verification"],
            },
        ),
    ]
    v = result["verification"]
    summary = (
        f"reduction built with k = {red['k']}, e_tilde = {_fmt(red['e_tilde'])}\n"
        f"max utility deviation: {_fmt(v['max_utility_deviation'])}\n"
        f"max KL deviation:      {_fmt(v['max_kl_deviation'])}\n"
        f"verified at eps' = {_fmt(v['eps_prime'])}: {v['passed']}"
    )
    return CommandOutcome(0, paths, summary)


_DISPATCH = {
    "validate": _cmd_validate,
    "kl": _cmd_kl,
    "breakpoints": _cmd_breakpoints,
    "equilibria": _cmd_equilibria,
    "solve": _cmd_solve,
    "simulate": _cmd_simulate,
    "scenario": _cmd_scenario,
    "reduce": _cmd_reduce,
}


def execute(argv: list[str]) -> CommandOutcome:
    """Run one command; never raises, always returns an outcome with exit code."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return CommandOutcome(int(exc.code or 0), [], "")
    try:
        return _DISPATCH[args.command](args)
    except handlers.DOMAIN_ERRORS as exc:
        return CommandOutcome(1, [], f"error: {exc}")
    except (FileNotFoundError, ValueError, OSError) as exc:
        return CommandOutcome(1, [], f"error: {exc}")


def main(argv: list[str] | None = None) -> int:
    outcome = execute(sys.argv[1:] if argv is None else argv)
    stream = sys.stdout if outcome.exit_code == 0 else sys.stderr
    if outcome.summary:
        print(outcome.summary, file=stream)
    for path in outcome.artifacts:
        print(f"wrote {path}", file=sys.stdout if outcome.exit_code == 0 else sys.stderr)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
