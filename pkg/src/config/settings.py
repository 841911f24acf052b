"""
Process-level settings for the dephasing lab, read from the environment
"""
import logging
import os

from dotenv import load_dotenv

from defaults import DEFAULTS

# Load environment variables
load_dotenv()


class AppConfig:
    """Application configuration settings"""

    # App Info
    APP_NAME = DEFAULTS["APP_NAME"]
    APP_DESCRIPTION = DEFAULTS["APP_DESCRIPTION"]

    # Logging
    LOG_LEVEL = os.getenv("LAB_LOG_LEVEL", DEFAULTS["LOG_LEVEL"]).upper()
    LOG_FORMAT = DEFAULTS["LOG_FORMAT"]

    # Execution
    THREADS = os.getenv("LAB_THREADS", str(DEFAULTS["THREADS"]))

    # Files
    CONFIG_PATH = os.getenv("LAB_CONFIG_PATH")
    OUTPUT_DIR = os.getenv("LAB_OUTPUT_DIR", ".")
    CSV_FLOAT_FORMAT = DEFAULTS["CSV_FLOAT_FORMAT"]

    @classmethod
    def threads(cls) -> int:
        return int(cls.THREADS)

    @classmethod
    def validate(cls):
        """Validate configuration"""
        if not isinstance(logging.getLevelName(cls.LOG_LEVEL), int):
            raise ValueError(f"LAB_LOG_LEVEL must be a logging level name, got '{cls.LOG_LEVEL}'")
        try:
            threads = int(cls.THREADS)
        except ValueError:
            raise ValueError(f"LAB_THREADS must be an integer, got '{cls.THREADS}'")
        if threads < 1:
            raise ValueError(f"LAB_THREADS must be >= 1, got {threads}")
        if cls.CONFIG_PATH and not os.path.exists(cls.CONFIG_PATH):
            raise ValueError(f"LAB_CONFIG_PATH points to a missing file: {cls.CONFIG_PATH}")
        return True
