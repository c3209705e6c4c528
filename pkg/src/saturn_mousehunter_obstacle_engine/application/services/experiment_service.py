"""
Experiment Service
实验编排 - 按 (n, N, seed) 运行求解、写出CSV、收敛率分析
"""
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from saturn_mousehunter_obstacle_engine.application.services.assumption_service import check_assumptions
from saturn_mousehunter_obstacle_engine.application.services.reference_service import geometric_put_reference
from saturn_mousehunter_obstacle_engine.application.services.sampling_service import simulate
from saturn_mousehunter_obstacle_engine.application.services.scheme_service import solve_mc, solve_quadrature
from saturn_mousehunter_obstacle_engine.domain.errors import (
    InsufficientDataError,
    InvalidParameterError,
    ObstacleEngineError,
)
from saturn_mousehunter_obstacle_engine.domain.models import (
    AssumptionReport,
    RateRow,
    RateTable,
    ResultRow,
    RunConfig,
    RunResult,
    SolveReport,
    TimeGrid,
)
from saturn_mousehunter_obstacle_engine.domain.problems.registry import REDUCED_OF, build
from saturn_mousehunter_obstacle_engine.infrastructure.aop.decorators import measure
from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import AppConfig, get_app_config
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger
from saturn_mousehunter_obstacle_engine.infrastructure.repositories import EnsembleDumpRepo, ResultCsvRepo

log = get_logger(__name__)

RESULTS_FILE = "results.csv"
REPORTS_FILE = "reports.jsonl"


def rate_analysis(values: Sequence[Tuple[float, float]], reference: float, ref_floor: float = 1e-6) -> RateTable:
    """相邻步长误差比；h1 为较细步长，|v^{h2} − ref| < ref_floor 时比值未定义"""
    if len(values) < 2:
        raise InsufficientDataError(f"rate analysis needs at least 2 points, got {len(values)}")
    hs = [h for h, _ in values]
    if len(set(hs)) != len(hs):
        raise InvalidParameterError("rate analysis needs distinct step sizes")

    ordered = sorted(values, key=lambda item: item[0])
    rows = []
    for (h1, v1), (h2, v2) in zip(ordered[:-1], ordered[1:]):
        denominator = v2 - reference
        ratio = None if abs(denominator) < ref_floor else (v1 - reference) / denominator
        rows.append(RateRow(
            h1=h1,
            h2=h2,
            value_h1=v1,
            value_h2=v2,
            reference=reference,
            error_ratio=ratio,
            theory_quarter=(h1 / h2) ** 0.25,
            theory_half=(h1 / h2) ** 0.5,
        ))
    return RateTable(reference=reference, ref_floor=ref_floor, rows=rows)


def collapse_rows(rows: Sequence[ResultRow], problem: str) -> List[Tuple[float, float]]:
    """每个 n 取最大路径数、对种子取平均，得到 (h, value)"""
    by_n: Dict[int, List[ResultRow]] = defaultdict(list)
    for row in rows:
        if row.problem == problem and row.status == "ok" and row.value is not None:
            by_n[row.n].append(row)
    points = []
    for n in sorted(by_n):
        budget = max(r.paths for r in by_n[n])
        chosen = [r.value for r in by_n[n] if r.paths == budget]
        points.append((by_n[n][0].h, float(np.mean(chosen))))
    return points


class ExperimentService:
    """实验服务"""

    def __init__(
        self,
        result_repo: ResultCsvRepo,
        ensemble_repo: EnsembleDumpRepo,
        app_config: Optional[AppConfig] = None,
    ):
        self.result_repo = result_repo
        self.ensemble_repo = ensemble_repo
        self.app_config = app_config or get_app_config()

    def _assumptions(self, config: RunConfig, spec) -> AssumptionReport:
        return check_assumptions(
            spec,
            probe_count=config.probe_count,
            fd_step=config.fd_step,
            seed=config.seeds[0],
            tolerance=config.assumption_tolerance,
        )

    def _combinations(self, config: RunConfig) -> List[Tuple[int, int, int]]:
        if config.backend == "quadrature":
            return [(n, 0, config.seeds[0]) for n in config.steps]
        return [(n, paths, seed) for n in config.steps for paths in config.paths for seed in config.seeds]

    def solve_one(
        self,
        config: RunConfig,
        n: int,
        paths: int,
        seed: int,
        assumptions: Optional[AssumptionReport] = None,
        output_dir: Optional[Path] = None,
    ) -> SolveReport:
        spec = build(config.problem, sigma_floor=self.app_config.sigma_floor, **config.params)
        grid = TimeGrid(horizon=spec.horizon, steps=n)
        if config.backend == "quadrature":
            return solve_quadrature(
                spec, grid, config.quadrature, config.estimator,
                assumptions=assumptions, override=config.override_assumptions, seed=seed,
            )
        ensemble = None
        if config.dump_ensemble:
            ensemble = simulate(spec, grid, paths, seed, workers=config.workers)
            target = (output_dir or self.app_config.ensemble_dump_dir or self.app_config.output_dir)
            self.ensemble_repo.dump(ensemble, Path(target) / f"ensemble_{config.problem}_n{n}_N{paths}_s{seed}.pfe")
        return solve_mc(
            spec, grid, paths, seed, config.estimator,
            assumptions=assumptions, override=config.override_assumptions,
            workers=config.workers, ensemble=ensemble,
        )

    def execute(self, config: RunConfig, output_dir: Optional[Path] = None) -> Tuple[List[ResultRow], List[SolveReport]]:
        """每个 (n, N, seed) 一行；求解失败记录状态码后继续"""
        out = Path(output_dir or config.output_dir or self.app_config.output_dir)
        spec = build(config.problem, sigma_floor=self.app_config.sigma_floor, **config.params)
        assumptions = None
        try:
            assumptions = self._assumptions(config, spec)
        except ObstacleEngineError as e:
            log.error(f"Assumption check failed for {config.problem}: {e}")

        rows: List[ResultRow] = []
        reports: List[SolveReport] = []
        for n, paths, seed in self._combinations(config):
            row = dict(
                problem=config.problem,
                backend=config.backend,
                n=n,
                h=spec.horizon / n,
                paths=paths,
                seed=seed,
                cells_per_dim=config.estimator.cells_per_dim,
            )
            try:
                report = self.solve_one(config, n, paths, seed, assumptions=assumptions, output_dir=out)
            except ObstacleEngineError as e:
                log.error(f"Row n={n}, N={paths}, seed={seed} aborted: {e}")
                rows.append(ResultRow(status=e.code, **row))
                continue
            reports.append(report)
            rows.append(ResultRow(
                value=report.value_at_origin,
                exercise_frac_t0=report.exercise_frac_t0,
                wall_ms=report.wall_ms if config.include_timings else None,
                **row,
            ))

        failed = sum(1 for r in rows if r.status != "ok")
        log.info(f"Run {config.problem} finished: {len(rows)} rows, {failed} failed")
        return rows, reports

    @measure("experiment_run_seconds")
    def run(self, config: RunConfig, output_dir: Optional[Path] = None) -> RunResult:
        """执行并写出 results.csv 与 reports.jsonl"""
        out = Path(output_dir or config.output_dir or self.app_config.output_dir)
        rows, reports = self.execute(config, out)
        files = [
            self.result_repo.write_rows(rows, out / RESULTS_FILE),
            self.result_repo.write_reports(reports, out / REPORTS_FILE, include_timings=config.include_timings),
        ]
        log.info(f"Run output written to {out}")
        return RunResult(rows=rows, files=files)

    def reference_value(self, problem: str, rows: Sequence[ResultRow] = ()) -> float:
        """auto 参考值：几何看跌用二叉树，无差别定价用同一CSV中降维问题最细步长的值"""
        if problem.startswith("geometric_put"):
            value = geometric_put_reference(steps=self.app_config.binomial_reference_steps)["american"]
            if abs(value - self.app_config.expected_binomial_value) > self.app_config.reference_tolerance:
                log.warning(
                    f"Binomial reference {value:.6f} differs from {self.app_config.expected_binomial_value} "
                    f"by more than {self.app_config.reference_tolerance}"
                )
            return value
        reduced = REDUCED_OF.get(problem)
        if reduced is None:
            raise InvalidParameterError(f"no automatic reference for problem '{problem}'")
        points = collapse_rows(rows, reduced)
        if not points:
            raise InsufficientDataError(f"no '{reduced}' rows available as reference for '{problem}'")
        return points[-1][1]

    def rate_from_rows(
        self,
        rows: Sequence[ResultRow],
        reference: Union[str, float] = "auto",
        ref_floor: float = 1e-6,
        problem: Optional[str] = None,
    ) -> RateTable:
        problems = sorted({r.problem for r in rows})
        if problem is None:
            # 降维问题的行只作为参考
            candidates = [p for p in problems if p not in REDUCED_OF.values()] or problems
            if len(candidates) != 1:
                raise InvalidParameterError(f"CSV holds several problems {candidates}; choose one")
            problem = candidates[0]
        points = collapse_rows(rows, problem)
        ref = self.reference_value(problem, rows) if reference == "auto" else float(reference)
        return rate_analysis(points, ref, ref_floor)

    def rate_from_csv(
        self,
        paths: Union[Path, Sequence[Path]],
        reference: Union[str, float] = "auto",
        ref_floor: float = 1e-6,
    ) -> RateTable:
        """一个或多个结果CSV（例如全维与降维问题分开运行）"""
        if isinstance(paths, (str, Path)):
            paths = [paths]
        rows: List[ResultRow] = []
        for path in paths:
            rows.extend(self.result_repo.read_rows(Path(path)))
        return self.rate_from_rows(rows, reference, ref_floor)
