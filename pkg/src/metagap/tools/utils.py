import hashlib
import os
import tomllib
from pathlib import Path

from metagap.config import PhysicalConfig, SimulationConfig
from metagap.errors import DataFormatError, UsageError
from metagap.tools.models import LabelsConfig, ProjectConfig, RunManifest

CONFIG_ENV = "METAGAP_CONFIG"
DATA_DIR_ENV = "METAGAP_DATA_DIR"
DEFAULT_CONFIG = "metagap.toml"

# only path variables are taken from a .env file
_ENV_KEYS = (CONFIG_ENV, DATA_DIR_ENV)


def load_env_file():
    """Load path variables from .env file if it exists."""
    # Try current directory first, then parent directory
    for env_path in [".env", "../.env"]:
        if os.path.exists(env_path):
            with open(env_path, "r") as f:
                for line in f:
                    line = line.strip()
                    if line and not line.startswith("#") and "=" in line:
                        key, value = line.split("=", 1)
                        if key.strip() in _ENV_KEYS:
                            os.environ.setdefault(key.strip(), value.strip())
            break


def load_config(config_path: str | None = None) -> ProjectConfig:
    """
    Load and validate configuration from file.

    Without an explicit path, `$METAGAP_CONFIG` or `./metagap.toml` is used if present,
    otherwise the built-in defaults.
    """
    explicit = config_path is not None or CONFIG_ENV in os.environ
    if config_path is None:
        config_path = os.environ.get(CONFIG_ENV, DEFAULT_CONFIG)

    if not os.path.exists(config_path):
        if explicit:
            raise UsageError(f"Config file '{config_path}' not found")
        return ProjectConfig()

    try:
        with open(config_path, "rb") as f:
            config_data = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise DataFormatError(f"Invalid config file '{config_path}': {e}") from None

    try:
        return ProjectConfig(
            physics=PhysicalConfig(**config_data.pop("physics", {})),
            simulation=SimulationConfig(**config_data.pop("simulation")) if "simulation" in config_data else None,
            labels=LabelsConfig(**config_data.pop("labels", {})),
            **config_data,
        )
    except (TypeError, ValueError) as e:
        raise DataFormatError(f"Invalid config format in '{config_path}': {e}") from None


def resolve_path(path: str, config: ProjectConfig | None = None) -> Path:
    """
    Relative paths are taken under `$METAGAP_DATA_DIR`, else the config's `data_dir`.
    """
    p = Path(path)
    if p.is_absolute():
        return p
    base = os.environ.get(DATA_DIR_ENV) or (config.data_dir if config is not None else None)
    return Path(base) / p if base else p


def file_digest(path: Path) -> str:
    """Short sha256 of a file's bytes."""
    try:
        return hashlib.sha256(path.read_bytes()).hexdigest()[:16]
    except OSError as e:
        raise DataFormatError(f"Cannot read {path}: {e}") from e


def manifest_path(output: Path) -> Path:
    return output.with_name(output.name + ".run.toml")


def write_run_manifest(output: Path, manifest: RunManifest) -> Path:
    path = manifest_path(output)
    path.write_text(manifest.to_toml())
    return path
