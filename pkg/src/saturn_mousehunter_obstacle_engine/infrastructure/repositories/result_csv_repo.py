"""
求解引擎 - 结果CSV Repository
固定列、9位有效数字、'.' 小数点、与locale无关
"""
import csv
import json
from pathlib import Path
from typing import Any, Iterable, List, Sequence, TextIO

from saturn_mousehunter_obstacle_engine.domain.models import RESULT_COLUMNS, ResultRow, SolveReport
from saturn_mousehunter_obstacle_engine.infrastructure.aop.decorators import measure
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger

log = get_logger(__name__)


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def write_csv(rows: Iterable[Any], fh: TextIO, columns: Sequence[str] = RESULT_COLUMNS) -> None:
    """表头 + 数据行；行可以是模型或字典"""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        record = row.model_dump() if hasattr(row, "model_dump") else dict(row)
        writer.writerow([format_cell(record.get(column)) for column in columns])


def emit_csv(rows: Iterable[Any], path: Path, columns: Sequence[str] = RESULT_COLUMNS) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        write_csv(rows, fh, columns)
    return path


class ResultCsvRepo:
    """结果文件Repository（results.csv + reports.jsonl）"""

    @measure("repo_result_csv_write_seconds")
    def write_rows(self, rows: List[ResultRow], path: Path) -> Path:
        path = emit_csv(rows, path)
        log.info(f"Wrote {len(rows)} result rows to {path}")
        return path

    def read_rows(self, path: Path) -> List[ResultRow]:
        """读取结果CSV，空单元格视为缺失"""
        with Path(path).open("r", newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            return [ResultRow(**{k: v for k, v in record.items() if v != ""}) for record in reader]

    def write_reports(self, reports: List[SolveReport], path: Path, include_timings: bool = False) -> Path:
        """逐行JSON的求解报告；默认不含墙钟时间，文件内容可复现"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        exclude = None if include_timings else {"timings"}
        with path.open("w", encoding="utf-8") as fh:
            for report in reports:
                payload = report.model_dump(mode="json", by_alias=True, exclude=exclude)
                fh.write(json.dumps(payload, sort_keys=True) + "\n")
        return path
