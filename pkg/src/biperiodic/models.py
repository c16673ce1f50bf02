# Copyright (c) 2022 AllSeeingEyeTolledEweSew
#
# Permission to use, copy, modify, and/or distribute this software for any
# purpose with or without fee is hereby granted.
#
# THE SOFTWARE IS PROVIDED "AS IS" AND THE AUTHOR DISCLAIMS ALL WARRANTIES WITH
# REGARD TO THIS SOFTWARE INCLUDING ALL IMPLIED WARRANTIES OF MERCHANTABILITY
# AND FITNESS. IN NO EVENT SHALL THE AUTHOR BE LIABLE FOR ANY SPECIAL, DIRECT,
# INDIRECT, OR CONSEQUENTIAL DAMAGES OR ANY DAMAGES WHATSOEVER RESULTING FROM
# LOSS OF USE, DATA OR PROFITS, WHETHER IN AN ACTION OF CONTRACT, NEGLIGENCE OR
# OTHER TORTIOUS ACTION, ARISING OUT OF OR IN CONNECTION WITH THE USE OR
# PERFORMANCE OF THIS SOFTWARE.
"""Run configurations and result records.

A run configuration is a JSON document. Complex numbers are written as
[re, im] pairs and complex vectors as lists of such pairs. Loading happens in
two passes: the schema pass rejects unknown keys and wrong types, then the
constraint pass reports every violated physical constraint at once.
"""
from __future__ import annotations

from collections.abc import Callable
import hashlib
import importlib.metadata
import json
from typing import Any
from typing import Optional
from typing import Union

import numpy as np
import pydantic
from typing_extensions import Literal

from . import config as config_lib
from . import errors
from . import forward
from . import grating
from . import lattice

SCHEMA_VERSION = 1

ComplexValue = tuple[float, float]
RealVector = tuple[float, float, float]
ComplexVector = tuple[ComplexValue, ComplexValue, ComplexValue]
OrderValue = tuple[int, int]


class BaseModel(pydantic.BaseModel):
    class Config:
        extra = pydantic.Extra.forbid
        allow_mutation = False


def to_complex(value: ComplexValue) -> complex:
    return complex(value[0], value[1])


def from_complex(value: complex) -> list[float]:
    value = complex(value)
    return [value.real, value.imag]


def to_vector(value: ComplexVector) -> np.ndarray:
    return np.array([to_complex(item) for item in value])


class Geometry(BaseModel):
    b: float
    c: float
    h: float


class Physics(BaseModel):
    k0: float
    lambda0: float = 1.0
    boundary: Literal["pec", "impedance"] = "pec"
    rho: Optional[float] = None


class LayerSpec(BaseModel):
    thickness: float
    q: ComplexValue


class MaterialSpec(BaseModel):
    """A layer stack, a Fourier profile, or a graded profile.

    A graded profile gives q at (x3, q) nodes; it is interpolated linearly and
    staircased into numerics.staircase_layers layers.
    """

    kind: Literal["stack", "fourier", "graded"] = "stack"
    layers: list[LayerSpec] = []
    axis: Optional[int] = None
    coefficients: dict[int, ComplexValue] = {}
    profile: list[tuple[float, ComplexValue]] = []


class MomentumSpec(BaseModel):
    """Either alpha directly, or classical incidence angles (θ1, θ2)."""

    alpha: Optional[tuple[float, float]] = None
    theta1: Optional[float] = None
    theta2: Optional[float] = None


class IncidenceSpec(BaseModel):
    kind: Literal["plane", "dipole"] = "plane"
    m: OrderValue = (0, 0)
    p: Optional[ComplexVector] = None
    y0: Optional[RealVector] = None
    r: Optional[RealVector] = None


class GreenPoint(BaseModel):
    x: RealVector
    y: RealVector


class GreenBlock(BaseModel):
    points: list[GreenPoint] = []
    k: Optional[float] = None
    conjugate: bool = False


class SolveBlock(BaseModel):
    incidences: list[IncidenceSpec] = []
    method: Literal["smatrix", "monolithic"] = "smatrix"


class ReciprocityBlock(BaseModel):
    y0: RealVector
    rs: list[RealVector]
    ps: list[ComplexVector]
    orders: list[OrderValue]
    include_lambda0: bool = True


class ParametrizationSpec(BaseModel):
    kind: Literal["stack", "fourier"] = "stack"
    layers: int = 1
    axis: int = 1
    orders: list[int] = [0]


class InvertBlock(BaseModel):
    target: Literal["impedance_depth", "profile"]
    orders: list[OrderValue] = [(0, 0)]
    polarizations: list[int] = [1, 2, 3]
    noise_level: float = 0.0
    init_c: Optional[float] = None
    init_rho: Optional[float] = None
    init_q: Optional[ComplexValue] = None
    parametrization: ParametrizationSpec = ParametrizationSpec()
    tikhonov: Optional[float] = None
    morozov: list[float] = []


class IndicatorBlock(BaseModel):
    depths: list[float]
    r: RealVector = (0.0, 0.0, 1.0)
    position: tuple[float, float] = (0.0, 0.0)
    test_height: Optional[float] = None


class RunConfig(BaseModel):
    geometry: Geometry
    physics: Physics
    material: MaterialSpec = MaterialSpec()
    momentum: MomentumSpec = MomentumSpec()
    truncation: int = 4
    seed: int = 0
    numerics: dict[str, Union[pydantic.StrictInt, float]] = {}
    green: Optional[GreenBlock] = None
    solve: Optional[SolveBlock] = None
    reciprocity: Optional[ReciprocityBlock] = None
    invert: Optional[InvertBlock] = None
    indicator: Optional[IndicatorBlock] = None


def _schema_violations(exc: pydantic.ValidationError) -> list[str]:
    return [
        f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}"
        for error in exc.errors()
    ]


def build_numerics(run: RunConfig) -> config_lib.Numerics:
    """Raises SchemaError for unknown or invalid numerics options."""
    try:
        return config_lib.Numerics.from_config(
            config_lib.Config(
                {f"numerics_{key}": value for key, value in run.numerics.items()}
            )
        )
    except errors.InvalidConfigError as exc:
        raise errors.SchemaError([f"numerics: {exc}"]) from exc


def build_momentum(run: RunConfig) -> lattice.QuasiMomentum:
    spec = run.momentum
    if spec.alpha is not None:
        return lattice.QuasiMomentum(*spec.alpha)
    if spec.theta1 is not None:
        direction = lattice.classical_direction(spec.theta1, spec.theta2 or 0.0)
        return lattice.QuasiMomentum(
            run.physics.k0 * direction[0], run.physics.k0 * direction[1]
        )
    return lattice.QuasiMomentum(0.0, 0.0)


def build_grating(run: RunConfig) -> grating.GratingConfig:
    physics = run.physics
    if physics.boundary == "pec":
        boundary = grating.Boundary(grating.BoundaryKind.PEC, physics.rho)
    else:
        boundary = grating.Boundary(grating.BoundaryKind.IMPEDANCE, physics.rho)
    return grating.GratingConfig(
        k0=physics.k0,
        lambda0=physics.lambda0,
        b=run.geometry.b,
        c=run.geometry.c,
        h=run.geometry.h,
        boundary=boundary,
        momentum=build_momentum(run),
        truncation=run.truncation,
    )


def _interpolate(nodes: list[tuple[float, ComplexValue]]) -> Callable[[float], complex]:
    if not nodes:
        raise ValueError("a graded profile needs at least one (x3, q) node")
    ordered = sorted(nodes, key=lambda node: node[0])
    heights = np.array([z for z, _ in ordered])
    values = np.array([to_complex(q) for _, q in ordered])

    def profile(z: float) -> complex:
        real = np.interp(z, heights, values.real)
        imag = np.interp(z, heights, values.imag)
        return complex(real, imag)

    return profile


def build_material(run: RunConfig) -> grating.MaterialProfile:
    spec = run.material
    if spec.kind == "fourier":
        return grating.Fourier1D(
            spec.axis or 1,
            {j: to_complex(value) for j, value in spec.coefficients.items()},
        )
    if spec.kind == "graded":
        return grating.Stack.staircase(
            _interpolate(spec.profile),
            run.geometry.c,
            run.geometry.b,
            layers=build_numerics(run).staircase_layers,
        )
    if not spec.layers:
        return grating.Stack.uniform(1.0, run.geometry.c, run.geometry.b)
    return grating.Stack(
        tuple(grating.Layer(ly.thickness, to_complex(ly.q)) for ly in spec.layers)
    )


def build_incidence(spec: IncidenceSpec) -> lattice.IncidentSpec:
    if spec.kind == "dipole":
        if spec.y0 is None or spec.r is None:
            raise errors.SchemaError(["incidence: a dipole needs y0 and r"])
        return lattice.Dipole(np.array(spec.y0), np.array(spec.r))
    if spec.p is None:
        raise errors.SchemaError(["incidence.p: a plane order needs p"])
    return lattice.PlaneOrder(spec.m, to_vector(spec.p))


def check_constraints(run: RunConfig) -> None:
    """Raises ConstraintError listing every violated constraint."""
    violations = []
    geometry = run.geometry
    try:
        build_grating(run)
    except errors.ConstraintError as exc:
        violations.extend(exc.violations)
    except ValueError as exc:
        violations.append(f"momentum: {exc}")
    spec = run.momentum
    if spec.alpha is not None and spec.theta1 is not None:
        violations.append("momentum: give either alpha or theta1/theta2, not both")
    if spec.theta1 is not None and not 0 < spec.theta1 <= np.pi:
        violations.append(f"momentum.theta1: {spec.theta1} is not in (0, π]")
    if run.material.kind == "fourier" and run.material.axis not in (1, 2):
        violations.append(f"material.axis: {run.material.axis} is not 1 or 2")
    else:
        try:
            material = build_material(run)
        except ValueError as exc:
            violations.append(f"material: {exc}")
        else:
            gamma = build_numerics(run).gamma
            violations.extend(
                material.violations(geometry.c, geometry.b, gamma=gamma)
            )
    if violations:
        raise errors.ConstraintError(violations)


def parse_config(text: str) -> RunConfig:
    """Parses and validates a run configuration.

    Raises:
        SchemaError: If the text is not JSON, or has unknown keys or wrong
            types.
        ConstraintError: If the values violate physical constraints.
    """
    try:
        raw = json.loads(text)
    except ValueError as exc:
        raise errors.SchemaError([f"<document>: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise errors.SchemaError(["<document>: must be an object"])
    try:
        run = RunConfig.parse_obj(raw)
    except pydantic.ValidationError as exc:
        raise errors.SchemaError(_schema_violations(exc)) from exc
    build_numerics(run)
    check_constraints(run)
    return run


def serialize_config(run: RunConfig) -> str:
    return run.json(indent=4, sort_keys=True)


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_digest(run: RunConfig) -> str:
    """sha256 of the canonical JSON form of the configuration."""
    return hashlib.sha256(canonical_json(run.dict()).encode()).hexdigest()


def tool_version() -> str:
    try:
        return importlib.metadata.version("biperiodic")
    except importlib.metadata.PackageNotFoundError:
        return "0+unknown"


class ResultRecord(BaseModel):
    schema_version: int = SCHEMA_VERSION
    command: str
    config_digest: str
    tool_version: str
    timing: dict[str, float] = {}
    payload: dict[str, Any] = {}

    def to_text(self) -> str:
        return json.dumps(self.dict(), indent=4, sort_keys=True, allow_nan=False)

    @classmethod
    def from_text(cls, text: str) -> ResultRecord:
        try:
            return cls.parse_raw(text)
        except pydantic.ValidationError as exc:
            raise errors.SchemaError(_schema_violations(exc)) from exc


def method_from_name(name: str) -> forward.SolveMethod:
    return forward.SolveMethod(name)
