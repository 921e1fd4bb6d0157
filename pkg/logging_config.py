"""
Structured logging configuration for the curvature CLI.
"""
import json
import logging
import logging.config
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

_EXTRA_FIELDS = (
    "command",
    "stage",
    "point_index",
    "status",
    "n_points",
    "duration_ms",
    "rss_mb",
    "error_type",
    "row_count",
    "run",
)


class StructuredFormatter(logging.Formatter):
    """Custom formatter for structured JSON logging."""

    def __init__(self, service: str = "curvature_cli"):
        super().__init__()
        self.service = service

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as structured JSON."""
        log_entry = {
            "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
            "service": self.service,
        }

        for name in _EXTRA_FIELDS:
            if hasattr(record, name):
                log_entry[name] = getattr(record, name)

        if record.exc_info:
            log_entry["exception"] = self.formatException(record.exc_info)

        return json.dumps(log_entry, ensure_ascii=False, default=str)


def setup_structured_logging(service_name: str = "curvature_cli",
                             log_level: str = "INFO",
                             log_file: Optional[str] = None,
                             log_format: str = "json") -> logging.Logger:
    """Setup logging for a CLI run; stdout stays free for command results."""

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)

    formatter = "structured" if log_format == "json" else "simple"
    config = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "structured": {
                "()": StructuredFormatter,
                "service": service_name,
            },
            "simple": {
                "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
            }
        },
        "handlers": {
            "console": {
                "class": "logging.StreamHandler",
                "level": log_level,
                "formatter": formatter,
                "stream": sys.stderr
            }
        },
        "loggers": {
            service_name: {
                "level": log_level,
                "handlers": ["console"],
                "propagate": False
            },
            "matplotlib": {
                "level": "WARNING",  # font manager chatter
                "handlers": ["console"],
                "propagate": False
            }
        },
        "root": {
            "level": log_level,
            "handlers": ["console"]
        }
    }

    if log_file:
        config["handlers"]["file"] = {
            "class": "logging.handlers.RotatingFileHandler",
            "level": log_level,
            "formatter": "structured",
            "filename": log_file,
            "maxBytes": 10485760,  # 10MB
            "backupCount": 5
        }
        for logger_config in config["loggers"].values():
            logger_config["handlers"].append("file")
        config["root"]["handlers"].append("file")

    logging.config.dictConfig(config)

    return logging.getLogger(service_name)


def log_stage(logger: logging.Logger, stage: str, duration: float, **details):
    """Log completion of a pipeline stage with its wall time."""
    extra = {"stage": stage, "duration_ms": round(duration * 1000, 3)}
    extra.update(details)
    logger.info(f"Stage finished: {stage}", extra=extra)


def log_point_failure(logger: logging.Logger, index: int, status: str, detail: str = ""):
    """Log a per-point estimation failure (recorded, never fatal)."""
    suffix = f": {detail}" if detail else ""
    logger.debug(f"Point {index} status {status}{suffix}",
                 extra={"point_index": index, "status": status})


def log_cli_error(logger: logging.Logger, error: Exception, context: Optional[dict] = None):
    """Log a command error with structured context."""
    extra = {"error_type": type(error).__name__}
    if context:
        extra.update(context)
    logger.error(f"Command error: {error}", extra=extra, exc_info=True)
