"""Resolved run configuration and the flat ``key=value`` config file.

A config file mirrors the long command-line flags, one per line::

    # cluster-point run
    point = cluster
    n = 6
    trials = 100

Values are typed with ``yaml.safe_load`` (so ``6`` is an int and ``0.5`` a float); keys may
use dashes or underscores. Plain string settings such as ``beta_grid`` are taken verbatim.
Flags given on the command line win over the file.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Literal, get_args

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .linalg import ConfigError

logger = logging.getLogger(__name__)

Command = Literal["family", "prepare", "diagnose", "peps", "selftest"]
OutputFormat = Literal["json", "csv"]

__all__ = ["ConfigError", "RunConfig", "load_config_file", "parse_grid", "resolve_config"]


class RunConfig(BaseModel):
    """Everything a command needs; echoed into every output file."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: Command

    # tensor sources
    point: str | None = None
    trajectory: str | None = None
    lambdas: list[float] | None = None
    spectrum: list[float] | None = None
    classes: dict[str, float] | None = None
    basis: str | None = None
    tensor: str | None = None
    aklt_random: bool = False
    ising: bool = False

    # run shape
    n: int | None = Field(default=None, ge=1)
    beta: float | None = None
    beta_grid: str | None = None
    trials: int = Field(default=100, ge=1)
    seed: int = 0
    boundary: Literal["dangling", "periodic"] = "dangling"
    direction: Literal["right", "left"] = "right"
    incomplete: bool = False
    mpo: Literal["cluster", "bell"] | None = None
    workers: int | None = Field(default=None, ge=1)

    # diagnostics
    restarts: int = Field(default=64, ge=1)
    tol: float = Field(default=1e-8, gt=0)
    block: int | None = Field(default=None, ge=1)

    # peps
    example: Literal["toric", "ghz"] | None = None
    lattice: str | None = None
    samples: int = Field(default=1000, ge=1)

    # selftest
    quick: bool = False
    suite: str | None = None

    output: str | None = None
    format: OutputFormat = "json"

    @field_validator("lambdas", "spectrum", mode="before")
    @classmethod
    def _split_list(cls, value):
        if isinstance(value, str):
            return [float(x) for x in value.split(",") if x.strip()]
        if isinstance(value, (int, float)):
            return [value]
        return value

    @field_validator("classes", mode="before")
    @classmethod
    def _split_classes(cls, value):
        """``"I=0.5,X=0.5"`` as a dict."""
        if not isinstance(value, str):
            return value
        out = {}
        for item in value.split(","):
            key, sep, weight = item.partition("=")
            if not sep:
                raise ValueError(f"class weight {item.strip()!r} is not label=weight")
            out[key.strip()] = float(weight)
        return out

    @model_validator(mode="after")
    def _sources(self) -> RunConfig:
        if self.command == "family":
            chosen = [
                x
                for x in ("point", "trajectory", "lambdas", "spectrum", "classes")
                if getattr(self, x) is not None
            ] + (["aklt_random"] if self.aklt_random else [])
            if len(chosen) != 1:
                raise ConfigError(
                    "family needs exactly one of --point, --trajectory, --lambda, --spectrum, "
                    f"--classes, --aklt-random; got {chosen or 'none'}"
                )
        if self.command == "peps" and (self.example is None or self.lattice is None):
            raise ConfigError("peps needs --example and --lattice")
        if self.command == "diagnose" and self.tensor is None and self.point is None and not self.aklt_random:
            raise ConfigError("diagnose needs --tensor, --point or --aklt-random")
        return self

    def to_dict(self) -> dict:
        return self.model_dump(mode="json", exclude_none=True)


def _normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def _is_text(annotation) -> bool:
    return annotation is str or set(get_args(annotation)) == {str, type(None)}


# kept verbatim: YAML would read 0:3:0.25 as a base-60 float
TEXT_KEYS = frozenset(name for name, f in RunConfig.model_fields.items() if _is_text(f.annotation))


def load_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        name, value = _normalize_key(key), value.strip()
        try:
            if name in TEXT_KEYS:
                parsed = value or None
            else:
                parsed = yaml.safe_load(value) if value else None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}:{lineno}: cannot parse value {value!r}") from exc
        values[name] = parsed
    logger.debug("read %d settings from %s", len(values), path)
    return values


def resolve_config(command: str, flags: dict[str, Any], config_path: str | Path | None = None) -> RunConfig:
    """Merge file settings under explicit flags (None means "not given") into a RunConfig."""
    merged: dict[str, Any] = {}
    if config_path is not None:
        merged.update(load_config_file(config_path))
    merged.update({k: v for k, v in flags.items() if v is not None and v is not False})
    merged["command"] = command
    try:
        return RunConfig(**merged)
    except ValidationError as exc:
        errors = "; ".join(
            f"{'.'.join(str(p) for p in e['loc']) or 'config'}: {e['msg']}" for e in exc.errors()
        )
        raise ConfigError(f"invalid configuration: {errors}") from None


def parse_grid(spec: str) -> np.ndarray:
    """Inclusive ``start:stop:step`` grid, e.g. ``0:3:0.25``."""
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ConfigError(f"grid must be start:stop:step, got {spec!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"grid needs step > 0 and stop >= start, got {spec!r}")
    return start + step * np.arange(int(round((stop - start) / step)) + 1)
