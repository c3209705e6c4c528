"""
求解引擎 - 路径集合二进制Repository
格式：b"PFE1" + 小端 uint64 (d, n, N, seed)，随后 states、increments（小端 float64，按路径行优先）
"""
from pathlib import Path

import numpy as np

from saturn_mousehunter_obstacle_engine.domain.errors import ConfigError
from saturn_mousehunter_obstacle_engine.domain.models import PathEnsemble, TimeGrid
from saturn_mousehunter_obstacle_engine.infrastructure.aop.decorators import measure
from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger

log = get_logger(__name__)

MAGIC = b"PFE1"
_HEADER = np.dtype("<u8")
_FLOAT = np.dtype("<f8")


class EnsembleDumpRepo:
    """PathEnsemble 的二进制导出 / 导入"""

    @measure("repo_ensemble_dump_seconds")
    def dump(self, ensemble: PathEnsemble, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = np.array(
            [ensemble.dim, ensemble.grid.steps, ensemble.count, ensemble.seed % (1 << 64)], dtype=_HEADER
        )
        with path.open("wb") as fh:
            fh.write(MAGIC)
            fh.write(header.tobytes())
            fh.write(np.ascontiguousarray(ensemble.states, dtype=_FLOAT).tobytes())
            fh.write(np.ascontiguousarray(ensemble.increments, dtype=_FLOAT).tobytes())
        log.info(f"Dumped ensemble N={ensemble.count}, n={ensemble.grid.steps}, d={ensemble.dim} to {path}")
        return path

    def load(self, path: Path, horizon: float) -> PathEnsemble:
        """horizon 不在文件头中，由调用方给出"""
        data = Path(path).read_bytes()
        if data[:4] != MAGIC:
            raise ConfigError(f"{path} is not an ensemble dump (bad magic)")
        d, n, count, seed = (int(v) for v in np.frombuffer(data, dtype=_HEADER, count=4, offset=4))
        offset = 4 + 4 * _HEADER.itemsize
        states_size = count * (n + 1) * d
        incr_size = count * n * d
        expected = offset + (states_size + incr_size) * _FLOAT.itemsize
        if len(data) != expected:
            raise ConfigError(f"{path} has {len(data)} bytes, expected {expected}")
        states = np.frombuffer(data, dtype=_FLOAT, count=states_size, offset=offset).reshape(count, n + 1, d)
        increments = np.frombuffer(
            data, dtype=_FLOAT, count=incr_size, offset=offset + states_size * _FLOAT.itemsize
        ).reshape(count, n, d)
        return PathEnsemble(
            grid=TimeGrid(horizon=horizon, steps=n),
            seed=seed,
            states=states.astype(np.float64),
            increments=increments.astype(np.float64),
        )
