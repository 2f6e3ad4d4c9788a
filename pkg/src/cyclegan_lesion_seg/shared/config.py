"""Configuration management for the lesion segmentation toolkit."""

import logging
import logging.handlers
import os
import re
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError
from rich.logging import RichHandler

from .errors import ConfigValidationError
from .schemas import (
    CycleGanConfig,
    DatasetConfig,
    ImgvolConfig,
    LoggingConfig,
    MetricsConfig,
    NetsConfig,
    PostprocConfig,
    RunConfig,
)

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parents[3]


class Config:
    """Configuration manager backed by a YAML (or JSON) document."""

    def __init__(self, config_path: Optional[str] = None):
        """Initialize configuration.

        Args:
            config_path: Path to config file. Defaults to config/config.yaml
        """
        # Load environment variables
        load_dotenv()

        # Only the implicit default path may fall back to built-in defaults
        self.explicit = config_path is not None
        if config_path is None:
            config_path = PROJECT_ROOT / "config" / "config.yaml"

        self.config_path = Path(config_path)
        self._config: Dict[str, Any] = {}
        self._load_config()

    def _load_config(self) -> None:
        """Load configuration from file."""
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                content = f.read()
                content = self._replace_env_vars(content)
                self._config = yaml.safe_load(content) or {}
        except FileNotFoundError as e:
            if self.explicit:
                raise ConfigValidationError(f"Config file not found: {self.config_path}") from e
            logger.warning(f"Config file not found: {self.config_path}. Using defaults.")
            self._config = self._get_default_config()
        except yaml.YAMLError as e:
            if self.explicit:
                raise ConfigValidationError(f"Error parsing config file {self.config_path}: {e}") from e
            logger.warning(f"Error parsing config file: {e}. Using defaults.")
            self._config = self._get_default_config()
        if not isinstance(self._config, dict):
            if self.explicit:
                raise ConfigValidationError(f"Config file {self.config_path} is not a mapping")
            self._config = self._get_default_config()

    def _replace_env_vars(self, content: str) -> str:
        """Replace ${VAR} and ${VAR:default} placeholders with environment variables."""

        def replace_var(match):
            var_name, default = match.group(1), match.group(2)
            if default is None:
                return os.getenv(var_name, f"${{{var_name}}}")
            return os.getenv(var_name) or default

        return re.sub(r'\$\{([^}:]+)(?::([^}]*))?\}', replace_var, content)

    def _get_default_config(self) -> Dict[str, Any]:
        """Get default configuration."""
        return RunConfig().model_dump(mode="json")

    @property
    def raw(self) -> Dict[str, Any]:
        return self._config

    def get(self, key_path: str, default: Any = None) -> Any:
        """Get configuration value using dot notation.

        Args:
            key_path: Dot-separated path to config value (e.g., 'cyclegan.train.epochs')
            default: Default value if key not found

        Returns:
            Configuration value or default
        """
        keys = key_path.split('.')
        value = self._config

        try:
            for key in keys:
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def to_run_config(self) -> RunConfig:
        """Validate the whole document against every section's preconditions."""
        try:
            return RunConfig.model_validate(self._config)
        except ValidationError as e:
            raise ConfigValidationError(f"Invalid configuration in {self.config_path}:\n{e}") from e

    def get_imgvol_config(self) -> ImgvolConfig:
        return ImgvolConfig.model_validate(self.get('imgvol', {}))

    def get_nets_config(self) -> NetsConfig:
        return NetsConfig.model_validate(self.get('nets', {}))

    def get_cyclegan_config(self) -> CycleGanConfig:
        return CycleGanConfig.model_validate(self.get('cyclegan', {}))

    def get_postproc_config(self) -> PostprocConfig:
        return PostprocConfig.model_validate(self.get('postproc', {}))

    def get_metrics_config(self) -> MetricsConfig:
        return MetricsConfig.model_validate(self.get('metrics', {}))

    def get_phantom_config(self) -> DatasetConfig:
        return DatasetConfig.model_validate(self.get('phantom', {}))

    def get_logging_config(self) -> LoggingConfig:
        """Logging section, with LESION_SEG_LOG_LEVEL taking precedence."""
        section = dict(self.get('logging', {}) or {})
        env_level = os.getenv('LESION_SEG_LOG_LEVEL', '')
        if env_level:
            section['level'] = env_level.upper()
        return LoggingConfig.model_validate(section)


def setup_logging(cfg: LoggingConfig) -> None:
    """Configure the root logger: rich console output plus an optional rotating file."""
    handlers: list = [RichHandler(show_path=False, rich_tracebacks=True)]
    if cfg.file_path:
        log_path = Path(cfg.file_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            log_path,
            maxBytes=cfg.max_file_size_mb * 1024 * 1024,
            backupCount=cfg.backup_count,
            encoding='utf-8',
        )
        file_handler.setFormatter(logging.Formatter(cfg.format))
        handlers.append(file_handler)
    logging.basicConfig(
        level=getattr(logging, cfg.level.upper(), logging.INFO),
        format="%(message)s",
        handlers=handlers,
        force=True,
    )


# Global configuration instance
config = Config()
