# app/dependencies/context.py
import logging
from contextlib import contextmanager
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import typer
from pydantic import BaseModel, ValidationError, field_validator

from app.db.groupfile import LoadedGroup, load_group
from app.fixtures.fixtures import BUILTINS, DEPTHS
from app.kleinian.combination import limit_points
from app.kleinian.errors import GroupFileError, KleinianError, PreconditionError
from app.kleinian.group import GroupSpec
from app.kleinian.sphere import ComponentChart, build_raster, chart_from_samples
from config import settings

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    group: Optional[Path] = None
    resolution: int = settings.RESOLUTION
    depth: Optional[int] = None
    dilation: Optional[float] = None
    tau: float = settings.TAU
    samples: int = 200
    seed: Optional[int] = settings.SEED
    out: Path = Path(".")

    @field_validator("resolution")
    @classmethod
    def resolution_floor(cls, v):
        if v < settings.MIN_RESOLUTION:
            raise ValueError(f"resolution must be at least {settings.MIN_RESOLUTION}")
        return v

    @field_validator("depth")
    @classmethod
    def nonnegative_depth(cls, v):
        if v is not None and v < 0:
            raise ValueError("depth must be nonnegative")
        return v

    @field_validator("dilation", "tau")
    @classmethod
    def positive(cls, v):
        if v is not None and v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("samples")
    @classmethod
    def positive_count(cls, v):
        if v <= 0:
            raise ValueError("sample count must be positive")
        return v

    def require_seed(self) -> int:
        if self.seed is None:
            raise PreconditionError("this command is stochastic: pass --seed or set KLEINVIS_SEED")
        return self.seed

    def limit_depth(self, loaded: LoadedGroup) -> int:
        if self.depth is not None:
            return self.depth
        return settings.LIMIT_DEPTH if loaded.depth is None else loaded.depth


def run_config(**options) -> RunConfig:
    try:
        return RunConfig(**options)
    except ValidationError as exc:
        raise PreconditionError(f"invalid options: {exc}")


def get_group(config: RunConfig) -> LoadedGroup:
    if config.group is None:
        raise GroupFileError("this command needs a group file (--config)")
    return load_group(config.group)


def builtin_group(name: str) -> LoadedGroup:
    return LoadedGroup(BUILTINS[name](), DEPTHS.get(name))


@lru_cache(maxsize=16)
def _chart(G: GroupSpec, resolution: int, L: int, dilation: Optional[float]) -> Tuple[np.ndarray, ComponentChart]:
    samples = limit_points(G, L)
    chart = chart_from_samples(build_raster(resolution), samples, dilation)
    logger.info(f"Chart of '{G.name}' at n={resolution}, L={L}: {chart.count} components")
    return samples, chart


def get_chart(config: RunConfig, G: GroupSpec, L: int) -> Tuple[np.ndarray, ComponentChart]:
    """Limit sample and component chart, shared between commands of one process."""
    return _chart(G, config.resolution, L, config.dilation)


def parse_vector(text: str, name: str = "point") -> np.ndarray:
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise PreconditionError(f"{name} must be three comma-separated numbers, got '{text}'")
    if len(values) != 3:
        raise PreconditionError(f"{name} must have three coordinates, got {len(values)}")
    return np.array(values)


@contextmanager
def cli_errors():
    """Map library errors to a message on stderr and the error exit status."""
    try:
        yield
    except KleinianError as exc:
        logger.debug(f"{type(exc).__name__}: {exc.detail}")
        typer.echo(f"error: {exc.detail}", err=True)
        raise typer.Exit(code=exc.exit_code)


def chart_source(config: RunConfig, loaded: LoadedGroup):
    """Chart lookup for a group and its factors, each at its own limit depth unless --depth is given."""

    def chart_for(G: GroupSpec) -> Tuple[np.ndarray, ComponentChart]:
        if config.depth is not None:
            L = config.depth
        elif G == loaded.spec and loaded.depth is not None:
            L = loaded.depth
        else:
            L = DEPTHS.get(G.name, settings.LIMIT_DEPTH)
        return get_chart(config, G, L)

    return chart_for
