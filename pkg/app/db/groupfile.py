# app/db/groupfile.py
"""JSON group files: pydantic models and conversion to GroupSpec."""
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ValidationError, field_validator, model_validator

from app.fixtures.fixtures import BUILTINS, DEPTHS
from app.kleinian.errors import GroupFileError
from app.kleinian.group import Generator, GroupSpec, free_product, hnn_extension
from app.kleinian.moebius import MoebiusMap
from app.kleinian.sphere import Cap

logger = logging.getLogger(__name__)

DET_TOLERANCE = 1e-6

GROUPS_DIR = Path(__file__).resolve().parents[2] / "groups"


class GeneratorModel(BaseModel):
    label: str
    matrix: List[Tuple[float, float]]

    @field_validator("matrix")
    @classmethod
    def four_entries(cls, v):
        if len(v) != 4:
            raise ValueError("matrix needs four [re, im] entries (a, b, c, d)")
        return v

    def to_map(self) -> MoebiusMap:
        a, b, c, d = (complex(re, im) for re, im in self.matrix)
        det = a * d - b * c
        if abs(abs(det) - 1) > DET_TOLERANCE:
            raise GroupFileError(f"generator '{self.label}' has determinant {det:.9g}, expected modulus 1")
        return MoebiusMap.from_entries(a, b, c, d)


class CapModel(BaseModel):
    center: Optional[Tuple[float, float, float]] = None
    half_angle: Optional[float] = None
    inside_radius: Optional[float] = None
    outside_radius: Optional[float] = None

    @model_validator(mode="after")
    def one_form(self):
        forms = [
            self.center is not None and self.half_angle is not None,
            self.inside_radius is not None,
            self.outside_radius is not None,
        ]
        if sum(forms) != 1:
            raise ValueError("a cap is either {center, half_angle}, {inside_radius} or {outside_radius}")
        if self.half_angle is not None and not 0 < self.half_angle < math.pi:
            raise ValueError("half_angle must lie in (0, π)")
        for r in (self.inside_radius, self.outside_radius):
            if r is not None and r <= 0:
                raise ValueError("cap radius must be positive")
        return self

    def to_cap(self) -> Cap:
        if self.inside_radius is not None:
            return Cap.inside_circle(self.inside_radius)
        if self.outside_radius is not None:
            return Cap.outside_circle(self.outside_radius)
        return Cap.around(self.center, self.half_angle)


class FreeProductModel(BaseModel):
    free_product: Tuple[str, str]
    caps: Optional[Tuple[CapModel, CapModel]] = None


class HNNModel(BaseModel):
    hnn: str
    stable: GeneratorModel


class GroupFileModel(BaseModel):
    name: Optional[str] = None
    builtin: Optional[str] = None
    depth: Optional[int] = None
    generators: List[GeneratorModel] = []
    construction: Union[Literal["raw"], FreeProductModel, HNNModel] = "raw"

    @model_validator(mode="after")
    def consistent(self):
        if self.depth is not None and self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if self.builtin is not None:
            if self.builtin not in BUILTINS:
                raise ValueError(f"unknown builtin '{self.builtin}'; choose from {sorted(BUILTINS)}")
            return self
        if not self.name:
            raise ValueError("group file needs a name")
        if self.construction == "raw" and not self.generators:
            raise ValueError("a raw group needs at least one generator")
        return self


@dataclass(frozen=True)
class LoadedGroup:
    spec: GroupSpec
    depth: Optional[int] = None


def _read(path: Path) -> GroupFileModel:
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise GroupFileError(f"group file not found: {path}")
    except json.JSONDecodeError as exc:
        raise GroupFileError(f"group file {path} is not valid JSON: {exc}")
    try:
        return GroupFileModel.model_validate(raw)
    except ValidationError as exc:
        raise GroupFileError(f"group file {path} is invalid: {exc}")


def load_group(path: Union[str, Path], _seen: Tuple[Path, ...] = ()) -> LoadedGroup:
    path = Path(path).resolve()
    if path in _seen:
        raise GroupFileError(f"group file {path} includes itself")
    model = _read(path)
    if model.builtin is not None:
        logger.info(f"Loaded builtin group '{model.builtin}' from {path.name}")
        depth = model.depth if model.depth is not None else DEPTHS.get(model.builtin)
        return LoadedGroup(BUILTINS[model.builtin](), depth)

    construction = model.construction
    try:
        if construction == "raw":
            gens = tuple(Generator(g.label, g.to_map()) for g in model.generators)
            spec = GroupSpec(model.name, gens)
        elif isinstance(construction, FreeProductModel):
            left, right = (
                load_group(path.parent / ref, _seen + (path,)).spec for ref in construction.free_product
            )
            caps = None
            if construction.caps is not None:
                caps = tuple(c.to_cap() for c in construction.caps)
            spec = free_product(model.name, left, right, caps)
        else:
            base = load_group(path.parent / construction.hnn, _seen + (path,)).spec
            spec = hnn_extension(model.name, base, construction.stable.label, construction.stable.to_map())
    except ValueError as exc:
        raise GroupFileError(f"group file {path}: {exc}")
    logger.info(f"Loaded group '{spec.name}' with {len(spec.generators)} generators from {path.name}")
    return LoadedGroup(spec, model.depth)

