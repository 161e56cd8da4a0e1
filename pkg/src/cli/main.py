import asyncio, logging, sys

from typing import Optional
from prompt_toolkit.styles import Style
from src.cli.config import CLIConfig
from src.cli.callbacks import CLICallbacks
from src.cli.commands import CLICommands
from src.cli.writer import ResultWriter

from src.config.schema import Command, ExperimentConfig
from src.util.errors import CapExceededError, ConfigError, UnknownLabelError
from src.util.logging_setup import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_CAP_EXCEEDED = 3

# Define style for the CLI
style = Style.from_dict({
    'info': '#aaaaaa',
    'progress': '#888888 italic',
    'result': '#00aa00 bold',
    'error': '#ff0000 bold',
})


class CLIClient:
    """Runs one experiment command and writes its table"""

    def __init__(self, command: Command, config: ExperimentConfig, verbose: bool = False):
        self.command = command
        self.config = config
        self.verbose = verbose
        self.callbacks = CLICallbacks(self, style)
        self.commands = CLICommands(self, progress=self.callbacks.on_progress)
        self.writer = ResultWriter(config)

    async def run(self) -> int:
        """Run the command and write its output"""
        self.callbacks.on_command_start(self.command, self.config.config_hash(), self.config.seed)
        table = await self.commands.handle(self.command, self.config)
        path = await self.writer.write(table)
        self.callbacks.on_command_finished(self.command, len(table.rows), table.summary, path)
        return EXIT_OK


async def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    args = CLIConfig.parse_args(argv)
    configure_logging(args.log_format, verbose=args.verbose)
    errors = CLICallbacks(None, style)

    try:
        config = CLIConfig.resolve(args)
        cli = CLIClient(args.command, config, verbose=args.verbose)
        return await cli.run()
    except (ConfigError, UnknownLabelError) as e:
        logger.error("Config error: %s", e)
        errors.on_error("Config error", str(e))
        return EXIT_CONFIG_ERROR
    except CapExceededError as e:
        logger.error("Resource cap exceeded: %s", e)
        errors.on_error("Resource cap exceeded", str(e))
        return EXIT_CAP_EXCEEDED


if __name__ == "__main__":
    try:
        sys.exit(asyncio.run(main()))
    except KeyboardInterrupt:
        print("\nInterrupted by user")
        sys.exit(130)
