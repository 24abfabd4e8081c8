"""Runtime settings and logging setup shared by the CLI, experiments and server."""

import logging
import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field
from rich.console import Console
from rich.logging import RichHandler

load_dotenv()

TOOL_NAME = "mas-h2"
TOOL_VERSION = "0.1.0"

# Stderr console so CSV written to stdout stays machine readable
console = Console(stderr=True, soft_wrap=True)


class Settings(BaseModel):
    """Environment driven settings.

    Environment Variables:
        - MAS_H2_THREADS: worker count for grid cells and p-points (default: CPU count)
    """
    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1, description="Concurrent workers for sweeps")


def get_settings() -> Settings:
    """Read settings from the environment (and a .env file, if present)."""
    raw = os.getenv("MAS_H2_THREADS")
    if raw is None or not raw.strip():
        return Settings()

    try:
        threads = int(raw)
    except ValueError:
        raise ValueError(
            f"MAS_H2_THREADS must be a positive integer, got {raw!r}."
        )
    if threads < 1:
        raise ValueError(f"MAS_H2_THREADS must be a positive integer, got {threads}.")
    return Settings(threads=threads)


def configure_logging(verbose: bool = False) -> None:
    """Route all library logging through rich on stderr."""
    root = logging.getLogger()
    for handler in [h for h in root.handlers if isinstance(h, RichHandler)]:
        root.removeHandler(handler)

    handler = RichHandler(console=console, show_path=False, rich_tracebacks=True)
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)
