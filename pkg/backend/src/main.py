import logging
import sys
from typing import Optional, Sequence

from pythonjsonlogger import jsonlogger

from src.api.cli import run
from src.config.settings import settings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(level: Optional[str] = None, log_format: Optional[str] = None) -> None:
    """Route every log record to stderr, as text or JSON; stdout carries reports only."""
    level = level or settings.LOG_LEVEL
    log_format = log_format or settings.LOG_FORMAT
    handler = logging.StreamHandler(sys.stderr)
    if log_format == "json":
        handler.setFormatter(jsonlogger.JsonFormatter(LOG_FORMAT))
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=[handler],
        force=True,
    )


logger = logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    status = run(argv, configure=configure_logging)
    logger.debug(f"Exiting with status {status}")
    return status


if __name__ == "__main__":
    sys.exit(main())
