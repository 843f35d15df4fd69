"""Solver and study settings from environment variables and config files."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from mri_gark.integrator import InnerMode, InnerSolveConfig, NewtonConfig

# Config file search order, highest priority first.
# Per-user config overrides system-wide.
CONFIG_PATHS = [
    Path(os.environ.get("XDG_CONFIG_HOME", Path.home() / ".config"))
    / "mri-gark"
    / "mri-gark.conf",
    Path("/etc/mri-gark/mri-gark.conf"),
]

ENV_PREFIX = "MRI_GARK_"


@dataclass
class ConfigSourceInfo:
    """Information about a single config source."""

    name: str  # e.g., "environment", "/etc/mri-gark/mri-gark.conf"
    status: str  # "active", "found", "not found", "not set", "permission denied"
    variables: dict[str, str] | None = None


@dataclass
class Settings:
    """Tunables shared by the command line and the library."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    newton_max_iter: int = 50
    newton_rel_tol: float = 1e-10
    newton_abs_tol: float = 1e-12
    threads: int = 1
    out_dir: str | None = None
    reference_tol: float = 1e-12

    # Source tracking: setting name -> source description
    sources: dict[str, str] = field(default_factory=dict)

    def inner(
        self,
        mode: InnerMode = InnerMode.ADAPTIVE,
        tol: float | None = None,
        substeps: int = 1,
        order: int = 4,
    ) -> InnerSolveConfig:
        """Inner solve settings; ``tol`` overrides both configured tolerances."""
        return InnerSolveConfig(
            mode=mode,
            rel_tol=tol or self.rel_tol,
            abs_tol=tol or self.abs_tol,
            substeps=substeps,
            order=order,
        )

    def newton(self) -> NewtonConfig:
        return NewtonConfig(
            max_iter=self.newton_max_iter,
            rel_tol=self.newton_rel_tol,
            abs_tol=self.newton_abs_tol,
        )


def _setting_fields() -> dict[str, str]:
    return {f.name: f.type for f in fields(Settings) if f.name != "sources"}


def env_var_name(setting: str) -> str:
    return ENV_PREFIX + setting.upper()


# All recognized variable names (same in files and the environment)
_VAR_NAMES = {env_var_name(name): name for name in _setting_fields()}


def _convert(setting: str, raw: str, source: str) -> Any:
    kind = _setting_fields()[setting]
    if kind == "int":
        caster: Any = int
    elif kind == "float":
        caster = float
    else:
        return raw or None
    try:
        value = caster(raw)
    except ValueError:
        raise ValueError(
            f"Invalid value for {env_var_name(setting)} in {source}: {raw!r}"
        ) from None
    if value <= 0:
        raise ValueError(f"{env_var_name(setting)} in {source} must be positive, got {raw!r}")
    return value


def load_settings() -> Settings:
    """Load settings from environment variables and config files.

    Priority:
    1. Environment variables (MRI_GARK_REL_TOL, ...)
    2. Per-user config: ~/.config/mri-gark/mri-gark.conf
    3. System config: /etc/mri-gark/mri-gark.conf
    4. Built-in defaults

    Raises:
        ValueError: If a value cannot be parsed
    """
    values: dict[str, Any] = {}
    sources: dict[str, str] = {}

    # Lowest priority first so later sources override
    for config_path in reversed(CONFIG_PATHS):
        try:
            if not config_path.exists():
                continue
            file_vars = _parse_config_variables(config_path)
        except PermissionError:
            continue
        for key, raw in file_vars.items():
            if key in _VAR_NAMES:
                name = _VAR_NAMES[key]
                values[name] = _convert(name, raw, str(config_path))
                sources[name] = str(config_path)

    for key, name in _VAR_NAMES.items():
        raw = os.environ.get(key)
        if raw:
            values[name] = _convert(name, raw, "environment")
            sources[name] = "environment"

    settings = Settings(**values)
    for name in _setting_fields():
        settings.sources[name] = sources.get(name, "default")
    return settings


def get_all_config_sources() -> list[ConfigSourceInfo]:
    """Return information about all config sources for diagnostic display.

    Returns a list of ConfigSourceInfo in priority order (highest first).
    """
    result: list[ConfigSourceInfo] = []

    env_vars = {key: os.environ[key] for key in _VAR_NAMES if os.environ.get(key)}
    if env_vars:
        result.append(ConfigSourceInfo(name="environment", status="active", variables=env_vars))
    else:
        result.append(ConfigSourceInfo(name="environment", status="not set"))

    for config_path in CONFIG_PATHS:
        try:
            if config_path.exists():
                file_vars = {
                    k: v for k, v in _parse_config_variables(config_path).items()
                    if k in _VAR_NAMES
                }
                result.append(ConfigSourceInfo(
                    name=str(config_path),
                    status="active" if file_vars else "found",
                    variables=file_vars,
                ))
            else:
                result.append(ConfigSourceInfo(name=str(config_path), status="not found"))
        except PermissionError:
            result.append(ConfigSourceInfo(name=str(config_path), status="permission denied"))

    return result


def _parse_config_variables(path: Path) -> dict[str, str]:
    """Parse variables from a config file.

    Supports both shell-style (export VAR=value) and simple key=value formats.
    Handles shell variable interpolation like ${VAR} and $VAR.
    """
    variables: dict[str, str] = {}

    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue

            if line.startswith("export "):
                line = line[7:]

            if "=" not in line:
                continue

            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip().strip("'\"")

            variables[key] = _interpolate_variables(value, variables)

    return variables


def _interpolate_variables(value: str, variables: dict[str, str]) -> str:
    """Resolve ${VAR} and $VAR references in a value."""

    def replace_var(match: re.Match[str]) -> str:
        var_name = match.group(1) or match.group(2)
        return variables.get(var_name, os.environ.get(var_name, match.group(0)))

    pattern = r"\$\{([^}]+)\}|\$([A-Za-z_][A-Za-z0-9_]*)"
    return re.sub(pattern, replace_var, value)
