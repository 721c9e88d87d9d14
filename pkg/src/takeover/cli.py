"""Command-line front end: run experiments, validate configs, compare runs,
calibrate thresholds."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .envs import make_env, max_action_discrepancy
from .harness import ConfigError, compare, run_experiment, run_single_seed, validate_config
from .meta import AnalyticSupervisor, collect_offline, derive_seed
from .policy import RobotPolicy, train_bc
from .safety import calibrate_tau_sup


def _load_config(path: str):
    text = Path(path).read_text()
    return validate_config(text)


def _parse_grid(text: str) -> list[float]:
    try:
        grid = [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError("latency grid must be comma-separated numbers")
    if not grid or any(x < 0 for x in grid):
        raise argparse.ArgumentTypeError("latency grid must be nonempty and nonnegative")
    return grid


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.latency_grid:
        cfg.latency_grid = args.latency_grid
    out = run_experiment(cfg, resume=args.resume)
    print(f"run complete: {out}")
    return 0


def cmd_validate(args) -> int:
    try:
        cfg = _load_config(args.config)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return 2
    print(json.dumps(cfg.to_json_dict(), indent=2, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    result = compare(args.run_dir_a, args.run_dir_b, args.latency_grid or [0.0, 1.0, 5.0, 10.0])
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_calibrate(args) -> int:
    """Collect offline data, pretrain, and report the calibrated entry
    threshold without running the online phase."""
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    env = make_env(cfg.environment, **cfg.env_params)
    supervisor = AnalyticSupervisor(env)
    offline = collect_offline(env, supervisor, cfg.offline_pairs, derive_seed(seed, 901, 0))
    policy = RobotPolicy(
        [env.spec.state_dim, *cfg.policy_hidden, env.spec.action_dim],
        env.spec.low, env.spec.high, seed=derive_seed(seed, 903, 0),
    )
    for e in range(cfg.bc_pretrain_epochs):
        train_bc(policy, offline, cfg.policy_train, derive_seed(seed, 900 + e, 1))
    target = 0.2
    if isinstance(cfg.tau_sup, str):
        target = float(cfg.tau_sup.split(":", 1)[1])
    tau = calibrate_tau_sup(policy, offline, target)
    diameter = max_action_discrepancy(env.spec)
    print(json.dumps({
        "seed": seed,
        "target_fraction": target,
        "tau_sup_abs": tau,
        "tau_sup_fraction_of_diameter": tau / diameter,
        "action_diameter": diameter,
    }, indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    """Run one seed with a remote human in the loop: starts the intervention
    service, prints its endpoints, and blocks on the console for every
    supervision request."""
    from .meta import SupervisorUnavailable
    from .service import HybridSupervisor, InterventionService, ServiceConfig

    cfg = _load_config(args.config)
    if args.out:
        cfg.out_dir = args.out
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    holder: dict = {}

    def factory(env):
        service = InterventionService(env, ServiceConfig(
            host=args.host, port=args.port, health_port=args.health_port,
            token=args.token, timeout_s=args.timeout, decimation=args.decimation,
        ))
        service.serve()
        holder["service"] = service
        host, port = service.address
        h_host, h_port = service.health_address
        print(f"console endpoint: {host}:{port}  token: {args.token}", flush=True)
        print(f"health: http://{h_host}:{h_port}/health", flush=True)
        # offline demonstrations stay scripted; the console only handles
        # online intervention requests
        return HybridSupervisor(env, service)

    try:
        run = run_single_seed(cfg, seed, Path(cfg.out_dir) / f"seed_{seed}",
                              supervisor_factory=factory, resume=args.resume)
        print(f"run complete: {run.summary_path}")
        return 0
    except SupervisorUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("rerun with --resume to continue from the last completed epoch", file=sys.stderr)
        return 1
    finally:
        if "service" in holder:
            holder["service"].stop()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="takeover", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment sweep from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="run a single seed instead of the sweep")
    p_run.add_argument("--out", default=None, help="override the config's output directory")
    p_run.add_argument("--latency-grid", type=_parse_grid, default=None)
    p_run.add_argument("--resume", action="store_true", help="continue from the last epoch checkpoint")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="validate a config and echo it with defaults applied")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)

    p_cmp = sub.add_parser("compare", help="burden comparison of two completed runs")
    p_cmp.add_argument("run_dir_a")
    p_cmp.add_argument("run_dir_b")
    p_cmp.add_argument("--latency-grid", type=_parse_grid, default=None)
    p_cmp.add_argument("--out", default=None)
    p_cmp.set_defaults(func=cmd_compare)

    p_cal = sub.add_parser("calibrate", help="report the calibrated switching threshold")
    p_cal.add_argument("--config", required=True)
    p_cal.add_argument("--seed", type=int, default=None)
    p_cal.set_defaults(func=cmd_calibrate)

    p_srv = sub.add_parser("serve", help="run one seed with a remote console as the supervisor")
    p_srv.add_argument("--config", required=True)
    p_srv.add_argument("--seed", type=int, default=None)
    p_srv.add_argument("--out", default=None)
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=7781)
    p_srv.add_argument("--health-port", type=int, default=7782)
    p_srv.add_argument("--token", default="local")
    p_srv.add_argument("--timeout", type=float, default=120.0)
    p_srv.add_argument("--decimation", type=int, default=10)
    p_srv.add_argument("--resume", action="store_true")
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
