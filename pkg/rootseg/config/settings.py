"""Environment settings for rootseg.

This module loads process-level settings (output root, logging, worker
counts) from environment variables, optionally seeded from a ``.env`` file.
Experiment parameters live in the declarative pipeline config instead.
"""

import os
from pathlib import Path
import logging
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)


class Settings:
    """Application settings loaded from environment variables."""

    def __init__(self):
        """Initialize settings from environment variables."""
        # Output settings
        self.output_root: Path = Path(os.environ.get("ROOTSEG_OUTPUT_ROOT", "./runs"))

        # Parallelism
        self.workers: int = int(os.environ.get("ROOTSEG_WORKERS", "1"))
        self.torch_threads: int = int(os.environ.get("ROOTSEG_TORCH_THREADS", "1"))

        # Rendering
        self.open_renders: bool = os.environ.get("ROOTSEG_OPEN_RENDERS", "false").lower() == "true"

        # Logging settings
        self.log_level: str = os.environ.get("ROOTSEG_LOG_LEVEL", "INFO")

        # Validate settings
        self._validate()

    def _validate(self):
        """Validate configuration settings."""
        if self.workers < 1:
            raise ValueError(f"ROOTSEG_WORKERS must be at least 1, got {self.workers}")

        if self.torch_threads < 1:
            raise ValueError(
                f"ROOTSEG_TORCH_THREADS must be at least 1, got {self.torch_threads}"
            )

        if not isinstance(logging.getLevelName(self.log_level.upper()), int):
            raise ValueError(f"Unknown ROOTSEG_LOG_LEVEL: {self.log_level}")

        if self.torch_threads > 1:
            logger.warning(
                "⚠️  ROOTSEG_TORCH_THREADS > 1 - training checkpoints may not be bit-identical "
                "across runs."
            )

    def __repr__(self) -> str:
        """Return string representation of settings."""
        return (
            f"Settings("
            f"output_root={self.output_root}, "
            f"workers={self.workers}, "
            f"torch_threads={self.torch_threads}, "
            f"open_renders={self.open_renders}, "
            f"log_level={self.log_level}"
            f")"
        )


# Global settings instance
settings = Settings()
