"""Settings configuration module.

Process-wide settings for the ice emulator. Values are read from the
environment after loading an optional ``.env`` file with python-dotenv, so
a checkout can pin log locations and worker counts without touching the
run configs.

Recognized variables:
- ICE_EMU_LOG_LEVEL: logging level name (default INFO)
- ICE_EMU_LOG_DIR: directory for the rotating log file (default "logs";
  empty string disables file logging)
- ICE_EMU_THREADS: default worker threads for scenario sweeps (default 1)
- ICE_EMU_OUT_DIR: default artifact directory (default "runs")
"""

import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv


@dataclass(frozen=True)
class Settings:
    """Application settings configuration."""

    log_level: str = "INFO"
    log_dir: Optional[str] = "logs"
    threads: int = 1
    out_dir: str = "runs"

    @classmethod
    def from_env(cls) -> "Settings":
        """
        Build settings from the environment.

        Returns:
            Settings instance with environment overrides applied

        Raises:
            ValueError: If ICE_EMU_THREADS is not a positive integer
        """
        load_dotenv()

        log_dir = os.environ.get("ICE_EMU_LOG_DIR", cls.log_dir)
        threads_raw = os.environ.get("ICE_EMU_THREADS", str(cls.threads))
        try:
            threads = int(threads_raw)
        except ValueError as e:
            raise ValueError(f"ICE_EMU_THREADS must be an integer, got {threads_raw!r}") from e
        if threads < 1:
            raise ValueError(f"ICE_EMU_THREADS must be >= 1, got {threads}")

        return cls(
            log_level=os.environ.get("ICE_EMU_LOG_LEVEL", cls.log_level).upper(),
            log_dir=log_dir or None,
            threads=threads,
            out_dir=os.environ.get("ICE_EMU_OUT_DIR", cls.out_dir),
        )


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Return the cached process settings, loading them on first use."""
    global _settings
    if _settings is None:
        _settings = Settings.from_env()
    return _settings
