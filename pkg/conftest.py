"""Test session setup: quiet console logging and no log files."""

import os

os.environ.setdefault("ICE_EMU_LOG_DIR", "")
os.environ.setdefault("ICE_EMU_LOG_LEVEL", "WARNING")
