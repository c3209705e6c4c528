"""
AOP Decorators
耗时统计装饰器与阶段计时器
"""
import functools
import threading
import time
from contextlib import contextmanager
from typing import Callable, Dict, Iterator, TypeVar

from saturn_mousehunter_obstacle_engine.infrastructure.log.logger import get_logger

log = get_logger(__name__)

F = TypeVar("F", bound=Callable)


class MetricsRegistry:
    """进程级耗时指标（累计秒数与调用次数）"""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._seconds: Dict[str, float] = {}
        self._calls: Dict[str, int] = {}

    def observe(self, metric: str, seconds: float) -> None:
        with self._lock:
            self._seconds[metric] = self._seconds.get(metric, 0.0) + seconds
            self._calls[metric] = self._calls.get(metric, 0) + 1

    def snapshot(self) -> Dict[str, Dict[str, float]]:
        with self._lock:
            return {
                name: {"seconds": self._seconds[name], "calls": self._calls[name]}
                for name in sorted(self._seconds)
            }

    def reset(self) -> None:
        with self._lock:
            self._seconds.clear()
            self._calls.clear()


metrics = MetricsRegistry()


def measure(metric: str) -> Callable[[F], F]:
    """记录函数耗时"""

    def decorator(func: F) -> F:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                elapsed = time.perf_counter() - start
                metrics.observe(metric, elapsed)
                log.debug(f"{metric}: {elapsed:.6f}s")

        return wrapper  # type: ignore[return-value]

    return decorator


class PhaseTimer:
    """按阶段累计墙钟时间，用于求解报告"""

    def __init__(self) -> None:
        self._phases: Dict[str, float] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self._phases[name] = self._phases.get(name, 0.0) + time.perf_counter() - start

    def as_dict(self) -> Dict[str, float]:
        return dict(self._phases)

    @property
    def total(self) -> float:
        return sum(self._phases.values())
