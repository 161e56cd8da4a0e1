from __future__ import annotations

import sys
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Optional

from prompt_toolkit import print_formatted_text
from prompt_toolkit.formatted_text import FormattedText
from prompt_toolkit.styles import Style

if TYPE_CHECKING:
    from src.cli.main import CLIClient


class CLICallbacks:
    """Styled progress and status lines; everything goes to stderr so stdout stays machine-readable."""

    def __init__(self, client: Optional["CLIClient"], style: Style) -> None:
        self.client = client
        self.style = style

    def _print(self, css_class: str, text: str) -> None:
        print_formatted_text(FormattedText([(css_class, text)]), style=self.style, file=sys.stderr)

    def on_command_start(self, command: str, config_hash: str, seed: int) -> None:
        self._print("class:info", f"[{command}] config {config_hash[:12]} seed {seed}")

    def on_progress(self, message: str) -> None:
        if self.client is not None and self.client.verbose:
            self._print("class:progress", f"  {message}")

    def on_command_finished(self, command: str, rows: int, summary: Dict[str, Any], path: Optional[Path]) -> None:
        target = str(path) if path else "stdout"
        self._print("class:result", f"[{command}] {rows} rows written to {target}")
        if "passed" in summary:
            css_class = "class:result" if summary["passed"] else "class:error"
            self._print(css_class, f"[{command}] passed={summary['passed']}")

    def on_error(self, kind: str, message: str) -> None:
        self._print("class:error", f"{kind}: {message}")
