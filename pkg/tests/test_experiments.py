"""
实验编排测试 - 运行配置、结果行、收敛率分析
"""
import json

import pytest
from pydantic import ValidationError

from saturn_mousehunter_obstacle_engine.application.services.experiment_service import (
    REPORTS_FILE,
    RESULTS_FILE,
    collapse_rows,
    rate_analysis,
)
from saturn_mousehunter_obstacle_engine.domain.errors import InsufficientDataError, InvalidParameterError
from saturn_mousehunter_obstacle_engine.domain.models import RESULT_COLUMNS, ResultRow, RunConfig
from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import AppConfig

# 6M 路径、σ0² = 1 的公开结果
LONGSTAFF_SCHWARTZ_VALUES = {5: 0.326258, 10: 0.334205, 15: 0.337974, 20: 0.340397, 40: 0.347909, 50: 0.346041}


def _small_config(**overrides):
    payload = dict(
        problem="geometric_put_1d",
        steps=[2, 3],
        paths=[2000],
        seeds=[1, 2],
        override_assumptions=True,
        probe_count=32,
        workers=1,
    )
    payload.update(overrides)
    return RunConfig(**payload)


def _row(problem, n, value, paths=1000, seed=1, status="ok"):
    return ResultRow(
        problem=problem, backend="mc", n=n, h=1.0 / n, paths=paths, seed=seed,
        cells_per_dim=8, value=value, exercise_frac_t0=0.0, status=status,
    )


class TestRateAnalysis:
    """误差比"""

    def test_linear_errors_give_step_ratio(self):
        values = [(h, 0.3 + 2.0 * h) for h in (0.2, 0.1, 0.05, 0.025)]
        table = rate_analysis(values, 0.3)
        assert [row.h1 for row in table.rows] == [0.025, 0.05, 0.1]
        for row in table.rows:
            assert row.error_ratio == pytest.approx(row.h1 / row.h2, abs=1e-12)
            assert row.theory_half == pytest.approx((row.h1 / row.h2) ** 0.5)

    def test_quarter_power_errors(self):
        values = [(h, 1.0 + 0.5 * h ** 0.25) for h in (0.2, 0.1, 0.05)]
        table = rate_analysis(values, 1.0)
        for row in table.rows:
            assert row.error_ratio == pytest.approx(row.theory_quarter, abs=1e-12)

    def test_input_order_is_irrelevant(self):
        values = [(0.05, 0.31), (0.2, 0.35), (0.1, 0.32)]
        assert rate_analysis(values, 0.3) == rate_analysis(sorted(values), 0.3)

    def test_reference_floor(self):
        table = rate_analysis([(0.1, 0.31), (0.2, 0.3 + 1e-9)], 0.3, ref_floor=1e-6)
        assert table.rows[0].error_ratio is None

    def test_longstaff_schwartz_values(self):
        values = [(1.0 / n, v) for n, v in LONGSTAFF_SCHWARTZ_VALUES.items()]
        table = rate_analysis(values, 0.338778)
        assert len(table.rows) == 5
        coarse = table.rows[-1]
        assert (coarse.h1, coarse.h2) == (0.1, 0.2)
        assert coarse.error_ratio == pytest.approx((0.334205 - 0.338778) / (0.326258 - 0.338778))
        assert coarse.error_ratio < coarse.theory_quarter

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            rate_analysis([(0.1, 0.3)], 0.3)

    def test_duplicate_steps(self):
        with pytest.raises(InvalidParameterError):
            rate_analysis([(0.1, 0.3), (0.1, 0.31)], 0.3)


class TestCollapseRows:
    """按 n 汇总"""

    def test_largest_budget_averaged_over_seeds(self):
        rows = [
            _row("p", 5, 1.0, paths=100),
            _row("p", 5, 2.0, paths=1000, seed=1),
            _row("p", 5, 4.0, paths=1000, seed=2),
            _row("p", 10, 3.0),
            _row("p", 10, None, status="path_blowup"),
            _row("q", 10, 9.0),
        ]
        assert collapse_rows(rows, "p") == [(0.2, 3.0), (0.1, 3.0)]


class TestRunConfig:
    """运行配置校验"""

    def test_empty_seed_list(self):
        with pytest.raises(ValidationError):
            _small_config(seeds=[])

    def test_unknown_problem(self):
        with pytest.raises(ValidationError):
            _small_config(problem="heston")

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            RunConfig(problem="geometric_put_1d", steps=[2], colour="red")

    def test_non_positive_steps(self):
        with pytest.raises(ValidationError):
            _small_config(steps=[0, 2])

    def test_json_document(self):
        config = RunConfig.model_validate_json(
            '{"problem": "geometric_put_3d", "steps": [5], "estimator": {"cells_per_dim": 4}}'
        )
        assert config.estimator.cells_per_dim == 4
        assert config.paths == [100000]
        assert config.backend == "mc"


class TestExperimentService:
    """run / execute"""

    def test_run_writes_one_row_per_combination(self, experiment_service, tmp_path):
        result = experiment_service.run(_small_config(), tmp_path / "a")
        assert len(result.rows) == 4
        assert not result.failed
        lines = (tmp_path / "a" / RESULTS_FILE).read_text().splitlines()
        assert lines[0] == ",".join(RESULT_COLUMNS)
        assert len(lines) == 5
        reports = (tmp_path / "a" / REPORTS_FILE).read_text().splitlines()
        assert len(reports) == 4
        assert "timings" not in json.loads(reports[0])
        assert all(row.wall_ms is None for row in result.rows)

    def test_runs_are_byte_identical(self, experiment_service, tmp_path):
        experiment_service.run(_small_config(), tmp_path / "a")
        experiment_service.run(_small_config(), tmp_path / "b")
        for name in (RESULTS_FILE, REPORTS_FILE):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_timings_on_request(self, experiment_service, tmp_path):
        result = experiment_service.run(_small_config(include_timings=True, seeds=[1], steps=[2]), tmp_path)
        assert result.rows[0].wall_ms is not None
        assert "timings" in json.loads((tmp_path / REPORTS_FILE).read_text().splitlines()[0])

    def test_failed_rows_do_not_stop_the_run(self, experiment_service, tmp_path):
        result = experiment_service.run(_small_config(override_assumptions=False), tmp_path)
        assert len(result.rows) == 4
        assert {row.status for row in result.rows} == {"assumption_violation"}
        assert all(row.value is None for row in result.rows)
        assert (tmp_path / RESULTS_FILE).exists()

    def test_path_budget_applies_to_requests_only(self, tmp_path):
        # max_paths 只约束API请求，批量运行照常求解
        from saturn_mousehunter_obstacle_engine.application.services.experiment_service import ExperimentService
        from saturn_mousehunter_obstacle_engine.infrastructure.repositories import EnsembleDumpRepo, ResultCsvRepo

        service = ExperimentService(ResultCsvRepo(), EnsembleDumpRepo(), AppConfig(max_paths=100, workers=1))
        rows, reports = service.execute(_small_config(seeds=[1]), tmp_path)
        assert len(reports) == 2
        assert {row.status for row in rows} == {"ok"}
        assert all(row.paths == 2000 for row in rows)

    def test_quadrature_rows(self, experiment_service, tmp_path):
        config = _small_config(
            backend="quadrature", steps=[2, 4], seeds=[3, 4], quadrature={"nodes": 10, "mesh_nodes": [100]}
        )
        rows, reports = experiment_service.execute(config, tmp_path)
        assert [(r.n, r.paths, r.seed) for r in rows] == [(2, 0, 3), (4, 0, 3)]
        assert all(r.backend == "quadrature" for r in rows)
        assert all(rep.boundary_escapes >= 0 for rep in reports)

    def test_ensemble_dump(self, experiment_service, tmp_path):
        config = _small_config(seeds=[1], steps=[2], dump_ensemble=True)
        result = experiment_service.run(config, tmp_path)
        dump = tmp_path / "ensemble_geometric_put_1d_n2_N2000_s1.pfe"
        assert dump.exists()
        ensemble = experiment_service.ensemble_repo.load(dump, horizon=1.0)
        assert ensemble.count == 2000
        assert ensemble.grid.steps == 2
        assert result.rows[0].status == "ok"


class TestRateFromRows:
    """auto 参考值"""

    def test_indifference_uses_finest_reduced_value(self, experiment_service):
        rows = [
            _row("indifference_2+1d", 5, -0.30),
            _row("indifference_2+1d", 10, -0.32),
            _row("indifference_1+1d", 5, -0.33),
            _row("indifference_1+1d", 10, -0.34),
        ]
        table = experiment_service.rate_from_rows(rows, "auto")
        assert table.reference == pytest.approx(-0.34)
        assert len(table.rows) == 1

    def test_indifference_without_reduced_rows(self, experiment_service):
        rows = [_row("indifference_2+1d", 5, -0.30), _row("indifference_2+1d", 10, -0.32)]
        with pytest.raises(InsufficientDataError):
            experiment_service.rate_from_rows(rows, "auto")

    def test_geometric_put_uses_binomial(self, experiment_service):
        rows = [_row("geometric_put_3d", n, v) for n, v in LONGSTAFF_SCHWARTZ_VALUES.items()]
        table = experiment_service.rate_from_rows(rows, "auto")
        # 2000 步二叉树已接近收敛值
        assert table.reference == pytest.approx(0.338778, abs=2e-3)

    def test_numeric_reference(self, experiment_service):
        rows = [_row("geometric_put_3d", n, v) for n, v in LONGSTAFF_SCHWARTZ_VALUES.items()]
        assert experiment_service.rate_from_rows(rows, 0.34).reference == 0.34

    def test_several_problems_need_a_choice(self, experiment_service):
        rows = [_row("geometric_put_3d", 5, 0.3), _row("indifference_2+1d", 5, -0.3)]
        with pytest.raises(InvalidParameterError):
            experiment_service.rate_from_rows(rows, 0.3)

    def test_rate_from_several_files(self, experiment_service, tmp_path):
        full = [_row("indifference_2+1d", 5, -0.30), _row("indifference_2+1d", 10, -0.32)]
        reduced = [_row("indifference_1+1d", 10, -0.34)]
        experiment_service.result_repo.write_rows(full, tmp_path / "full.csv")
        experiment_service.result_repo.write_rows(reduced, tmp_path / "reduced.csv")
        table = experiment_service.rate_from_csv([tmp_path / "full.csv", tmp_path / "reduced.csv"])
        assert table.reference == pytest.approx(-0.34)
