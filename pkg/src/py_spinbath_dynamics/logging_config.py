"""Logging configuration for the application."""
import json
import logging
from typing import Any, Dict

import numpy as np

# Attributes every LogRecord carries; anything else came in through `extra=`.
_STANDARD_ATTRIBUTES = {
    "args", "asctime", "created", "exc_info", "exc_text", "filename",
    "funcName", "levelname", "levelno", "lineno", "module", "msecs",
    "message", "msg", "name", "pathname", "process", "processName",
    "relativeCreated", "stack_info", "thread", "threadName", "taskName",
}


def _to_json_value(value: Any) -> Any:
    """Convert numpy scalars and arrays, which json cannot encode natively."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return {"real": value.real.tolist(), "imag": value.imag.tolist()}
        return value.tolist()
    if isinstance(value, complex):
        return {"real": value.real, "imag": value.imag}
    return str(value)


class JSONFormatter(logging.Formatter):
    """Formats log records as JSON strings."""

    def format(self, record: logging.LogRecord) -> str:
        """
        Format a log record into a JSON string.

        The formatter includes a default set of attributes from the LogRecord,
        plus any extra attributes passed to the logger. Physics extras are
        often numpy values; they are converted to plain JSON numbers or lists.
        """
        log_object: Dict[str, Any] = {
            "timestamp": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "message": record.getMessage(),
            "name": record.name,
        }

        extra_items = {
            key: value
            for key, value in record.__dict__.items()
            if key not in _STANDARD_ATTRIBUTES and key not in log_object
        }
        log_object.update(extra_items)

        if record.exc_info:
            log_object["exception"] = self.formatException(record.exc_info)
        elif record.exc_text:
            log_object["exception"] = record.exc_text

        return json.dumps(log_object, default=_to_json_value)


def configure_logging(level: str = "INFO") -> None:
    """
    Configure the root logger for the application.

    It sets the requested logging level and adds a stream handler
    that uses the JSONFormatter to output one JSON object per line.
    """
    logger = logging.getLogger()
    logger.setLevel(level.upper())

    # Remove any existing handlers to avoid duplicate logs
    if logger.hasHandlers():
        logger.handlers.clear()

    handler = logging.StreamHandler()
    handler.setFormatter(JSONFormatter())
    logger.addHandler(handler)
