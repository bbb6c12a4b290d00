import logging
import sys
from typing import Optional

import click

from app.api import commands
from app.config import settings


@click.group()
@click.option("--log-level", default=None, help="Logging level (default: LOG_LEVEL setting)")
def cli(log_level: Optional[str]) -> None:
    """Compound scene inference over merged scene and knowledge graphs."""
    logging.basicConfig(
        level=(log_level or settings.log_level).upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


for command in commands.COMMANDS:
    cli.add_command(command)


if __name__ == "__main__":
    cli()
