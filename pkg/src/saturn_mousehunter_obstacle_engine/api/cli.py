"""
Command Line Interface
solve / rate / check / serve 子命令；退出码 0 成功，2 配置错误，3 求解中止
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from saturn_mousehunter_obstacle_engine.api.dependencies.services import get_experiment_service
from saturn_mousehunter_obstacle_engine.application.services.assumption_service import check_assumptions, check_hjb
from saturn_mousehunter_obstacle_engine.domain.errors import ConfigError, ObstacleEngineError
from saturn_mousehunter_obstacle_engine.domain.models import RATE_COLUMNS, RunConfig
from saturn_mousehunter_obstacle_engine.domain.problems.registry import build, problem_ids
from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import get_app_config
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger
from saturn_mousehunter_obstacle_engine.infrastructure.repositories import emit_csv, write_csv

log = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """key=value，key 可用点号访问嵌套字段，value 按JSON解析（失败则当字符串）"""
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"override '{key}' descends into a non-object field")
            node = child
        node[parts[-1]] = _parse_value(text)
    return raw


def load_run_config(path: Path, overrides: Sequence[str] = ()) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    try:
        return RunConfig.model_validate(apply_overrides(raw, overrides))
    except ValidationError as e:
        raise ConfigError(str(e)) from None


def cmd_solve(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, args.override)
    if args.dump_ensemble:
        config = config.model_copy(update={"dump_ensemble": True})
    result = get_experiment_service().run(config, output_dir=args.out)
    for path in result.files:
        print(path)
    return EXIT_ABORT if result.failed else EXIT_OK


def cmd_rate(args: argparse.Namespace) -> int:
    reference: Any = args.reference
    if reference != "auto":
        try:
            reference = float(reference)
        except ValueError:
            raise ConfigError(f"--reference must be 'auto' or a number, got '{args.reference}'") from None
    table = get_experiment_service().rate_from_csv(args.inputs, reference, args.ref_floor)
    if args.out:
        emit_csv(table.rows, Path(args.out), columns=RATE_COLUMNS)
        print(args.out)
    else:
        write_csv(table.rows, sys.stdout, columns=RATE_COLUMNS)
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    params = apply_overrides({}, args.param)
    spec = build(args.problem, sigma_floor=get_app_config().sigma_floor, **params)
    report = check_assumptions(spec, probe_count=args.probes, fd_step=args.fd_step, seed=args.seed, tolerance=args.tolerance)
    out: Dict[str, Any] = {"assumptions": report.model_dump(mode="json", by_alias=True)}
    if spec.control_family is not None:
        out["hjb"] = check_hjb(spec, probe_count=args.probes, seed=args.seed).model_dump(mode="json")
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    config = get_app_config()
    uvicorn.run(
        "saturn_mousehunter_obstacle_engine.api.app:app",
        host=args.host or config.host,
        port=args.port or config.port,
        reload=config.debug,
        log_level=config.log_level.lower(),
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saturn-mousehunter-obstacle-engine",
        description="Regression Monte-Carlo solver for fully nonlinear parabolic obstacle problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run a configuration and write results.csv / reports.jsonl")
    solve.add_argument("--config", required=True, type=Path)
    solve.add_argument("--out", type=Path, default=None)
    solve.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    solve.add_argument("--dump-ensemble", action="store_true")
    solve.set_defaults(handler=cmd_solve)

    rate = sub.add_parser("rate", help="error-ratio table from a results CSV")
    rate.add_argument("--in", dest="inputs", nargs="+", required=True, type=Path)
    rate.add_argument("--reference", default="auto")
    rate.add_argument("--ref-floor", type=float, default=1e-6)
    rate.add_argument("--out", type=Path, default=None)
    rate.set_defaults(handler=cmd_rate)

    check = sub.add_parser("check", help="numeric spot check of the structural assumptions")
    check.add_argument("--problem", required=True, choices=problem_ids())
    check.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    check.add_argument("--probes", type=int, default=256)
    check.add_argument("--fd-step", type=float, default=1e-4)
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--tolerance", type=float, default=1e-6)
    check.set_defaults(handler=cmd_check)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.set_defaults(handler=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ObstacleEngineError as e:
        log.error(f"{args.command} failed ({e.code}): {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        log.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ABORT
