"""
Logger
日志工具 - 统一的JSON/文本日志格式
"""
import json
import logging
import sys
import threading
from datetime import datetime, timezone

from saturn_mousehunter_obstacle_engine.infrastructure.config.app_config import get_app_config

_ROOT = "saturn_mousehunter_obstacle_engine"
_configured = False
_lock = threading.Lock()


class JsonFormatter(logging.Formatter):
    """JSON行格式"""

    def format(self, record: logging.LogRecord) -> str:
        payload = {
            "ts": datetime.fromtimestamp(record.created, tz=timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(payload, ensure_ascii=False)


def _configure() -> None:
    global _configured
    with _lock:
        if _configured:
            return
        config = get_app_config()
        handler = logging.StreamHandler(sys.stderr)
        if config.log_format.lower() == "json":
            handler.setFormatter(JsonFormatter())
        else:
            handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s - %(message)s"))
        root = logging.getLogger(_ROOT)
        root.addHandler(handler)
        root.setLevel(config.log_level.upper())
        root.propagate = False
        _configured = True


def get_logger(name: str) -> logging.Logger:
    """获取模块日志器"""
    _configure()
    if not name.startswith(_ROOT):
        name = f"{_ROOT}.{name}"
    return logging.getLogger(name)
