import os
from pathlib import Path

from dotenv import dotenv_values
from loguru import logger
from pydantic import BaseModel, ConfigDict

OUTPUT_ROOT_ENV = "GESTALT_OUTPUT_ROOT"


class SystemConfig(BaseModel):
    """Process-wide program state. Only the output root may come from the environment, the rest is set by the CLI."""

    model_config = ConfigDict(extra="ignore")  # ignore unknown keys if loading from larger env dict

    output_root: Path | None = None
    invoked_command: str | None = None
    log_level: str = "INFO"
    workers: int = max(1, os.cpu_count() or 1)
    debug_checks: bool = False
    dump_activations: bool = False


def hydrate_system_config(env_path: Path = Path(".env")) -> SystemConfig:
    """Generates a system config from a .env file and the process environment"""
    raw_env = {**dotenv_values(env_path), **os.environ}
    output_root = raw_env.get(OUTPUT_ROOT_ENV)
    return SystemConfig(output_root=Path(output_root) if output_root else None)


def update_system_config(new_config: SystemConfig):
    """helper function for modules to use for pushing an updated system state to the rest of the program"""
    global system_config  # noqa: PLW0603
    system_config = new_config
    logger.debug(f"System config updated: {system_config.model_dump()}")


def resolve_output_path(path: Path) -> Path:
    """Relative --out paths land under the configured output root, if there is one."""
    if path.is_absolute() or system_config.output_root is None:
        return path
    return system_config.output_root / path


__version__ = "0.1.0"
system_config: SystemConfig = hydrate_system_config()
