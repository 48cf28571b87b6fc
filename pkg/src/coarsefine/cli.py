"""Command-line entry point.

Three subcommands: ``run`` executes one or more methods over a dataset,
``route`` audits the difficulty decisions of a previous run, and ``mock``
drives the full engine against a scripted suite (the CI path).

Configuration lives in a TOML file; command-line flags override file values.
Every config default matches the engine's reference operating point and is
echoed in the report header.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .backends.client import BackendBundle, build_http_backends
from .backends.mock import load_suite, mock_world
from .backends.suites import BUILTIN_SUITES, builtin_suite_path
from .core import EndpointConfig, EngineConfig
from .errors import ConfigError, DatasetError, EngineError
from .harness import METHODS, load_dataset, routing_agreement, run_method, emit_report

_ENDPOINT_KEYS = {"base_url", "model", "api_key_env"}
_SCALAR_KEYS = {
    "k",
    "temperature",
    "max_iterations",
    "alpha",
    "concurrency_limit",
    "seed",
    "max_retries",
    "backoff_base",
    "backend",
    "mock_suite",
    "prm_aggregation",
    "weight_mode",
    "joint_roles",
    "answer_style",
    "entropy_log_base",
    "routing_override",
    "prompt_dir",
}


def load_config(path: str | Path | None) -> EngineConfig:
    """Build an :class:`EngineConfig` from a TOML file (or defaults)."""
    if path is None:
        return EngineConfig()
    try:
        raw = tomllib.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("<config>", f"file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<config>", f"invalid TOML: {exc}")

    kwargs: dict = {}
    for key, value in raw.items():
        if key in ("generation", "orm", "prm"):
            if not isinstance(value, dict):
                raise ConfigError(key, "must be a table")
            unknown = set(value) - _ENDPOINT_KEYS
            if unknown:
                raise ConfigError(f"{key}.{sorted(unknown)[0]}", "unknown field")
            kwargs[key] = EndpointConfig(**value)
        elif key in _SCALAR_KEYS:
            kwargs[key] = value
        else:
            raise ConfigError(key, "unknown field")
    return EngineConfig(**kwargs)


def apply_overrides(config: EngineConfig, args: argparse.Namespace) -> EngineConfig:
    updates = {}
    if getattr(args, "k", None) is not None:
        updates["k"] = args.k
    if getattr(args, "max_iter", None) is not None:
        updates["max_iterations"] = args.max_iter
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "concurrency", None) is not None:
        updates["concurrency_limit"] = args.concurrency
    return dataclasses.replace(config, **updates) if updates else config


def _resolve_suite_path(name_or_path: str) -> Path:
    if name_or_path in BUILTIN_SUITES:
        return builtin_suite_path(name_or_path)
    return Path(name_or_path)


def build_backends(config: EngineConfig) -> BackendBundle:
    if config.backend == "http":
        return build_http_backends(config)
    if not config.mock_suite:
        raise ConfigError("mock_suite", "required when backend = 'mock'")
    return mock_world(load_suite(_resolve_suite_path(config.mock_suite)))


def _parse_methods(spec: str) -> list[str]:
    methods = [m.strip() for m in spec.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigError("method", f"unknown method {m!r}; choose from {METHODS}")
    if not methods:
        raise ConfigError("method", "no method given")
    return methods


def cmd_run(args: argparse.Namespace) -> int:
    config = apply_overrides(load_config(args.config), args)
    methods = _parse_methods(args.method)
    dataset_path = Path(args.dataset)
    if not dataset_path.is_file():
        print(f"error: dataset not found: {dataset_path}", file=sys.stderr)
        return 2
    problems = load_dataset(dataset_path)
    backends = build_backends(config)
    reports = [run_method(m, problems, config, backends) for m in methods]
    paths = emit_report(reports, args.out)
    for rep in reports:
        acc = "n/a" if rep.accuracy is None else f"{rep.accuracy:.3f}"
        print(
            f"{rep.method}: accuracy={acc} "
            f"mean_samples={rep.mean_generation_calls:.1f} over {len(rep.records)} problems"
        )
    print(f"report: {paths['run']}")
    return 0


def _routing_rows(run_payload: dict) -> list[dict]:
    rows = []
    for run in run_payload.get("runs", []):
        for record in run.get("records", []):
            if record.get("routing"):
                rows.append(record)
    return rows


def cmd_route(args: argparse.Namespace) -> int:
    payload = json.loads(Path(args.run).read_text())
    rows = _routing_rows(payload)
    if not rows:
        print("error: run.json contains no routing decisions", file=sys.stderr)
        return 1

    fmt = "{:<16} {:>4} {:>10} {:>6} {:>10} {:>6} {:>10} {:>6} {:>10} {:>6}  {}"
    print(
        fmt.format(
            "problem", "", "c1-orm", "pass", "c1-prm", "pass",
            "c2-orm", "pass", "c2-prm", "pass", "difficulty",
        )
    )
    for record in rows:
        routing = record["routing"]
        c1, c2 = routing["cond1"], routing["cond2"]

        def norm(rm):
            v = c1.get(rm, {}).get("normalized")
            return "n/a" if v is None else f"{v:+.4f}"

        def conf(rm):
            v = c2.get(rm, {}).get("confidence")
            return "n/a" if v is None else f"{v:.4f}"

        def passed(cond, rm):
            entry = cond.get(rm)
            return "-" if entry is None else ("yes" if entry["passed"] else "no")

        print(
            fmt.format(
                record["problem_id"], "",
                norm("orm"), passed(c1, "orm"), norm("prm"), passed(c1, "prm"),
                conf("orm"), passed(c2, "orm"), conf("prm"), passed(c2, "prm"),
                routing["difficulty"],
            )
        )

    if args.labels:
        labeled = {
            p.id: p.difficulty_label
            for p in load_dataset(args.labels)
            if p.difficulty_label in ("easy", "hard")
        }
        pairs = [
            (record["routing"]["difficulty"], labeled[record["problem_id"]])
            for record in rows
            if record["problem_id"] in labeled
        ]
        if not pairs:
            print("no labeled problems overlap the run", file=sys.stderr)
            return 1
        metrics = routing_agreement([d for d, _ in pairs], [l for _, l in pairs])
        flag = " (no hard predictions)" if metrics.no_positive_predictions else ""
        print(
            f"P={metrics.precision:.3f} R={metrics.recall:.3f} F1={metrics.f1:.3f} "
            f"over {len(pairs)} labeled problems{flag}"
        )
    return 0


def cmd_mock(args: argparse.Namespace) -> int:
    suite_path = _resolve_suite_path(args.suite)
    if not suite_path.is_file():
        print(f"error: suite not found: {suite_path}", file=sys.stderr)
        return 2
    suite = load_suite(suite_path)
    config = EngineConfig(
        k=suite.k,
        seed=args.seed,
        max_iterations=args.max_iter if args.max_iter is not None else 3,
        concurrency_limit=args.concurrency if args.concurrency is not None else 8,
        backend="mock",
        mock_suite=str(suite_path),
    )
    backends = mock_world(suite)
    problems = suite.problem_list()
    methods = _parse_methods(args.method)
    reports = [run_method(m, problems, config, backends) for m in methods]
    paths = emit_report(reports, args.out)
    for rep in reports:
        acc = "n/a" if rep.accuracy is None else f"{rep.accuracy:.3f}"
        print(f"{rep.method}: accuracy={acc} mean_samples={rep.mean_generation_calls:.1f}")
    print(f"report: {paths['run']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coarsefine",
        description="Adaptive coarse-to-fine reasoning orchestration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run methods over a dataset")
    run.add_argument("--config", default=None, help="TOML config file")
    run.add_argument("--method", default="magicore", help="comma-separated method list")
    run.add_argument("--dataset", required=True, help="JSONL dataset path")
    run.add_argument("--out", required=True, help="report output directory")
    run.add_argument("--k", type=int, default=None)
    run.add_argument("--max-iter", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--concurrency", type=int, default=None)
    run.set_defaults(func=cmd_run)

    route = sub.add_parser("route", help="audit routing decisions of a run")
    route.add_argument("--run", required=True, help="path to run.json")
    route.add_argument("--labels", default=None, help="JSONL with difficulty_label")
    route.set_defaults(func=cmd_route)

    mock = sub.add_parser("mock", help="run the engine against a scripted suite")
    mock.add_argument("--suite", default="mixed", help="builtin name or suite file")
    mock.add_argument("--method", default="magicore", help="comma-separated method list")
    mock.add_argument("--out", required=True, help="report output directory")
    mock.add_argument("--seed", type=int, default=0)
    mock.add_argument("--max-iter", type=int, default=None)
    mock.add_argument("--concurrency", type=int, default=None)
    mock.set_defaults(func=cmd_mock)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
