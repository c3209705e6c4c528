"""
Repository测试 - 结果CSV、求解报告JSONL、路径集合二进制
"""
import csv
import io
import json

import numpy as np
import pytest

from saturn_mousehunter_obstacle_engine.application.services.sampling_service import simulate
from saturn_mousehunter_obstacle_engine.application.services.scheme_service import solve_mc
from saturn_mousehunter_obstacle_engine.domain.errors import ConfigError
from saturn_mousehunter_obstacle_engine.domain.models import RATE_COLUMNS, RESULT_COLUMNS, ResultRow, TimeGrid
from saturn_mousehunter_obstacle_engine.infrastructure.repositories import (
    EnsembleDumpRepo,
    ResultCsvRepo,
    emit_csv,
    write_csv,
)
from saturn_mousehunter_obstacle_engine.infrastructure.repositories.ensemble_dump_repo import MAGIC
from saturn_mousehunter_obstacle_engine.infrastructure.repositories.result_csv_repo import format_cell


def _row(**overrides):
    payload = dict(
        problem="geometric_put_3d", backend="mc", n=10, h=0.1, paths=500000, seed=1,
        cells_per_dim=8, value=1.0 / 3.0, exercise_frac_t0=0.0,
    )
    payload.update(overrides)
    return ResultRow(**payload)


class TestFormatCell:
    """单元格格式"""

    @pytest.mark.parametrize("value, expected", [
        (None, ""),
        (True, "true"),
        (12, "12"),
        (0.1, "0.1"),
        (1.0 / 3.0, "0.333333333"),
        (1e-12, "1e-12"),
        ("ok", "ok"),
    ])
    def test_format(self, value, expected):
        assert format_cell(value) == expected


class TestResultCsv:
    """结果CSV"""

    def test_empty_rows_give_header_only(self, tmp_path):
        path = emit_csv([], tmp_path / "empty.csv")
        assert path.read_text() == ",".join(RESULT_COLUMNS) + "\n"

    def test_row_parses_back(self, tmp_path):
        repo = ResultCsvRepo()
        path = repo.write_rows([_row(), _row(seed=2, value=None, status="scheme_error")], tmp_path / "r.csv")
        with path.open() as fh:
            records = list(csv.DictReader(fh))
        assert records[0]["value"] == "0.333333333"
        assert records[0]["wall_ms"] == ""
        assert records[1]["status"] == "scheme_error"

        rows = repo.read_rows(path)
        assert rows[0].value == pytest.approx(1.0 / 3.0, rel=1e-9)
        assert rows[0].paths == 500000
        assert rows[1].value is None

    def test_stream_output_with_custom_columns(self):
        buffer = io.StringIO()
        write_csv([{"h1": 0.05, "h2": 0.1, "error_ratio": None}], buffer, columns=RATE_COLUMNS)
        header, line = buffer.getvalue().splitlines()
        assert header.split(",") == list(RATE_COLUMNS)
        assert line.startswith("0.05,0.1,")

    def test_reports_exclude_timings_by_default(self, tmp_path, put_1d):
        report = solve_mc(put_1d, TimeGrid(horizon=1.0, steps=2), 500, seed=1, override=True, workers=1)
        repo = ResultCsvRepo()
        plain = json.loads(repo.write_reports([report], tmp_path / "a.jsonl").read_text())
        timed = json.loads(repo.write_reports([report], tmp_path / "b.jsonl", include_timings=True).read_text())
        assert "timings" not in plain
        assert set(timed["timings"]) == {"assumptions", "simulate", "backward"}
        assert plain["assumptions"]["pass"]["v"] is False


class TestEnsembleDump:
    """路径集合二进制"""

    def test_dump_and_load(self, tmp_path, put_3d):
        ensemble = simulate(put_3d, TimeGrid(horizon=1.0, steps=3), 64, seed=5, workers=1)
        repo = EnsembleDumpRepo()
        path = repo.dump(ensemble, tmp_path / "dump" / "e.pfe")
        assert path.read_bytes()[:4] == MAGIC
        loaded = repo.load(path, horizon=1.0)
        assert loaded.seed == 5
        assert loaded.grid == ensemble.grid
        np.testing.assert_array_equal(loaded.states, ensemble.states)
        np.testing.assert_array_equal(loaded.increments, ensemble.increments)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.pfe"
        path.write_bytes(b"NOPE" + bytes(64))
        with pytest.raises(ConfigError):
            EnsembleDumpRepo().load(path, horizon=1.0)

    def test_truncated_file(self, tmp_path, put_1d):
        ensemble = simulate(put_1d, TimeGrid(horizon=1.0, steps=2), 10, seed=1, workers=1)
        path = EnsembleDumpRepo().dump(ensemble, tmp_path / "e.pfe")
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ConfigError):
            EnsembleDumpRepo().load(path, horizon=1.0)
