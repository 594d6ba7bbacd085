import json
import logging
import os
import time
from contextlib import contextmanager
from datetime import datetime, timezone

logger = logging.getLogger("krl")

LOG_FORMAT = "%(message)s"  # records are already JSON


def configure_logging(level=None, log_path=None):
    """Attach JSON-line handlers to the ``krl`` logger (CLI only)."""
    level = (level or os.getenv("KRL_LOG_LEVEL", "INFO")).upper()
    log_path = log_path or os.getenv("KRL_LOG_PATH")
    handlers = [logging.StreamHandler()]
    if log_path:
        os.makedirs(os.path.dirname(os.path.abspath(log_path)), exist_ok=True)
        handlers.append(logging.FileHandler(log_path, mode="a"))
    logger.handlers.clear()
    for handler in handlers:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
    logger.setLevel(getattr(logging, level, logging.INFO))
    logger.propagate = False


def log_json(level, message, component=None, **kwargs):
    level = level.upper()
    numeric = getattr(logging, "WARNING" if level == "WARN" else level, logging.INFO)
    if not logger.isEnabledFor(numeric):
        return
    log_data = {
        "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
        "level": level,
        "component": component if component else "krl",
        "message": message,
    }
    log_data.update(kwargs)
    logger.log(numeric, json.dumps(log_data, default=_jsonable))


def _jsonable(value):
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)


@contextmanager
def timed(event, component=None, **kwargs):
    """Log start/complete records around a block, with the duration in ms."""
    start = time.time()
    log_json("DEBUG", f"{event} started", component=component, event=f"{event}_start", **kwargs)
    try:
        yield
    except Exception as e:
        duration = time.time() - start
        log_json("ERROR", f"{event} failed", component=component, event=f"{event}_error",
                 error=str(e), duration_ms=round(duration * 1000, 2), **kwargs)
        raise
    duration = time.time() - start
    log_json("INFO", f"{event} complete", component=component, event=f"{event}_complete",
             duration_ms=round(duration * 1000, 2), **kwargs)
