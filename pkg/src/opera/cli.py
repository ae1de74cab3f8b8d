"""Command line interface.

    opera run experiment.json --threads 4 --format markdown
    opera testbed testbed.toml
    opera value graph noised:0.1 --env-config '{"stochastic_transitions": true}'
    opera export-env sepsis sepsis.json

Exit codes: 0 success, 2 configuration error, 3 estimator failure in at least
one trial (the table is still written).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .envs import make_environment
from .exceptions import ConfigError
from .harness import (COLUMNS, FORMATS, emit_table, gaussian_config_from_dict, load_config, read_config_file,
                      run_experiment, run_gaussian_testbed)

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_FAILURE = 0, 1, 2, 3


def _env_config(text: str | None) -> dict:
    if not text:
        return {}
    if Path(text).is_file():
        return read_config_file(text)
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--env-config is neither a file nor JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("--env-config must be a JSON object")
    return cfg


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        emit_path = Path(out)
        try:
            emit_path.write_text(text)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write results to {out}: {exc.strerror}") from None


def cmd_run(args) -> int:
    cfg = load_config(args.config, seed=args.seed)
    results = run_experiment(cfg, threads=args.threads)
    out = args.out or cfg.output
    text = emit_table(results.rows, args.format, out)
    if out is None:
        sys.stdout.write(text)
    if results.num_failures:
        for t in results.trials:
            if t.failed:
                print(f"trial failed: policy={t.policy} n={t.n} trial={t.trial}: {t.error}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_testbed(args) -> int:
    raw = read_config_file(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    result = run_gaussian_testbed(gaussian_config_from_dict(raw))
    if args.format == "json":
        _write(json.dumps(result.to_dict(), indent=2) + "\n", args.out)
        return EXIT_OK
    text = emit_table(result.rows, args.format, columns=COLUMNS[:8])
    labels = result.config.labels
    summary = "".join(
        f"# {name}: " + ", ".join(f"{lab}={w:.6g}" for lab, w in zip(labels, wv.alpha)) + "\n"
        for name, wv in (("analytic weights", result.analytic), ("simulated weights", result.simulated))
    )
    _write(text if args.out else summary + text, args.out)
    return EXIT_OK


def cmd_value(args) -> int:
    env = make_environment(args.env, _env_config(args.env_config))
    value, stderr = env.truth(env.policy(args.policy), args.seed or 0)
    print(f"{format(value, '.12g')}\t{format(stderr, '.12g')}")
    return EXIT_OK


def cmd_export_env(args) -> int:
    env = make_environment(args.env_id, _env_config(args.env_config))
    env.export(args.path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opera", description="Stacked off-policy evaluation experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_format=True):
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
        sp.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
        if with_format:
            sp.add_argument("--format", choices=FORMATS, default="csv")
            sp.add_argument("--out", default=None, help="output path (default: config value or stdout)")

    sp = sub.add_parser("run", help="run a full experiment")
    sp.add_argument("config")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("testbed", help="run the synthetic Gaussian testbed")
    sp.add_argument("config")
    common(sp)
    sp.set_defaults(func=cmd_testbed)

    sp = sub.add_parser("value", help="ground-truth value of a policy")
    sp.add_argument("env")
    sp.add_argument("policy")
    sp.add_argument("--env-config", default=None, help="JSON object or path to a JSON/TOML file")
    common(sp, with_format=False)
    sp.set_defaults(func=cmd_value)

    sp = sub.add_parser("export-env", help="write a tabular environment as JSON")
    sp.add_argument("env_id")
    sp.add_argument("path")
    sp.add_argument("--env-config", default=None, help="JSON object or path to a JSON/TOML file")
    common(sp, with_format=False)
    sp.set_defaults(func=cmd_export_env)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
