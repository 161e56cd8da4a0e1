from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import aiofiles

from src.config.defaults import TOOL_NAME, TOOL_VERSION
from src.config.schema import ExperimentConfig


@dataclass
class ResultTable:
    """Rows produced by one command, plus an optional machine-readable summary."""

    command: str
    columns: List[str]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    def add(self, **row: Any) -> None:
        self.rows.append(row)


def provenance(config: ExperimentConfig, command: str) -> Dict[str, Any]:
    return {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "command": command,
        "config_sha256": config.config_hash(),
        "seed": config.seed,
    }


def _cell(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return " ".join(str(x) for x in value)
    if isinstance(value, bool):
        return str(value).lower()
    return value


def render_csv(table: ResultTable, config: ExperimentConfig) -> str:
    """Comment lines with provenance, then a header row; comma separated with LF newlines."""
    buffer = io.StringIO()
    for key, value in provenance(config, table.command).items():
        buffer.write(f"# {key}={value}\n")
    buffer.write(f"# config={config.canonical_json()}\n")
    if table.summary:
        buffer.write(f"# summary={json.dumps(table.summary, sort_keys=True, separators=(',', ':'))}\n")
    writer = csv.DictWriter(buffer, fieldnames=table.columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in table.rows:
        writer.writerow({k: _cell(v) for k, v in row.items()})
    return buffer.getvalue()


def render_json(table: ResultTable, config: ExperimentConfig) -> str:
    document = {
        "provenance": provenance(config, table.command),
        "config": json.loads(config.canonical_json()),
        "columns": table.columns,
        "rows": [{c: row.get(c) for c in table.columns} for row in table.rows],
        "summary": table.summary,
    }
    return json.dumps(document, indent=2, sort_keys=True, default=str) + "\n"


class ResultWriter:
    """Writes a result table to a file (or stdout) in the configured format."""

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self.path: Optional[Path] = Path(config.out) if config.out else None

    def render(self, table: ResultTable) -> str:
        if self.config.format == "json":
            return render_json(table, self.config)
        return render_csv(table, self.config)

    async def write(self, table: ResultTable) -> Optional[Path]:
        text = self.render(table)
        if self.path is None:
            sys.stdout.write(text)
            sys.stdout.flush()
            return None
        self.path.parent.mkdir(parents=True, exist_ok=True)
        async with aiofiles.open(self.path, "w", encoding="utf-8", newline="\n") as fh:
            await fh.write(text)
        return self.path
