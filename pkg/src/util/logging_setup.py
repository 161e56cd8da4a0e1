from __future__ import annotations

import logging
import sys

from pythonjsonlogger.json import JsonFormatter

TEXT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
JSON_FIELDS = "%(asctime)s %(name)s %(levelname)s %(message)s"


def configure_logging(log_format: str = "text", *, verbose: bool = False) -> None:
    """Install the root handler for CLI runs. Library modules never call this."""
    level = logging.DEBUG if verbose else logging.INFO
    if log_format == "json":
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(JsonFormatter(JSON_FIELDS))
        root = logging.getLogger()
        root.handlers[:] = [handler]
        root.setLevel(level)
    elif log_format == "text":
        logging.basicConfig(level=level, format=TEXT_FORMAT, stream=sys.stderr, force=True)
    else:
        raise ValueError(f"Unknown log format '{log_format}'. Available: json, text")

    # asyncio stays at WARNING
    logging.getLogger("asyncio").setLevel(logging.WARNING)
    logging.getLogger("asyncio").propagate = False
