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
"""The direct scattering solver for flat layered gratings.

The slab Ω1 = {c < x3 < b} holds the material; Ω0 = {x3 > b} is homogeneous
with wavenumber k0. The tangential field is continuous across x3 = b and the
tangential curl jumps by the factor λ0. The bottom x3 = c is a perfect
conductor or an impedance surface.

A solve splits the lattice modes into groups the material couples, solves
every group independently (see layers), and keeps the per-group amplitudes so
that fields can be evaluated anywhere above c.
"""
from __future__ import annotations

from collections.abc import Sequence
import dataclasses
import logging
import math
from typing import Optional

import numpy as np

from . import concurrency
from . import config as config_lib
from . import dtn
from . import errors
from . import grating
from . import greens
from . import lattice
from . import layers as layers_lib
from .layers import SolveMethod

_LOG = logging.getLogger(__name__)

SOURCE_TOLERANCE = 1e-9

__all__ = [
    "EnergyReport",
    "SolveDiagnostics",
    "SolveMethod",
    "Solution",
    "energy_report",
    "near_field_trace",
    "solve",
    "solve_batch",
    "solve_dipole",
]


def _plane_wave_curl(
    alpha: np.ndarray, vertical: np.ndarray, e: np.ndarray
) -> np.ndarray:
    wavevectors = np.column_stack([alpha[:, 0], alpha[:, 1], vertical])
    return 1j * np.cross(wavevectors, e)


class _Background:
    """The incident field, mode by mode, above and inside the slab."""

    def exterior(self, height: float) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def interior(self, height: float) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


class _Nothing(_Background):
    def __init__(self, size: int) -> None:
        self._zero = np.zeros((size, 3), dtype=complex)

    def exterior(self, height: float) -> tuple[np.ndarray, np.ndarray]:
        return self._zero, self._zero

    def interior(self, height: float) -> tuple[np.ndarray, np.ndarray]:
        return self._zero, self._zero


class _PlaneBackground(_Nothing):
    def __init__(self, modes: lattice.ModeSet, position: int, p_m: np.ndarray) -> None:
        super().__init__(len(modes))
        self._alpha = modes.alpha[position : position + 1]
        self._beta = modes.beta[position]
        self._position = position
        self._p_m = p_m

    def exterior(self, height: float) -> tuple[np.ndarray, np.ndarray]:
        e = np.zeros_like(self._zero)
        e[self._position] = self._p_m * np.exp(-1j * self._beta * height)
        c = np.zeros_like(self._zero)
        c[self._position] = _plane_wave_curl(
            self._alpha, np.array([-self._beta]), e[self._position : self._position + 1]
        )[0]
        return e, c


class _DipoleBackground(_Nothing):
    def __init__(
        self,
        alpha: np.ndarray,
        beta: np.ndarray,
        k_sq: complex,
        source: lattice.Dipole,
        *,
        interior: bool,
    ) -> None:
        super().__init__(len(alpha))
        self._alpha = alpha
        self._beta = beta
        self._k_sq = k_sq
        self._source = source
        self._interior = interior

    def _fields(self, height: float) -> tuple[np.ndarray, np.ndarray]:
        return greens.dipole_mode_coefficients(
            self._alpha, self._beta, self._k_sq, self._source.y0, self._source.r, height
        )

    def exterior(self, height: float) -> tuple[np.ndarray, np.ndarray]:
        if self._interior:
            return super().exterior(height)
        return self._fields(height)

    def interior(self, height: float) -> tuple[np.ndarray, np.ndarray]:
        if not self._interior:
            return super().interior(height)
        return self._fields(height)


class _SheetBackground(_Nothing):
    def __init__(self, modes: lattice.ModeSet, sheet: lattice.Superposition) -> None:
        super().__init__(len(modes))
        self._modes = modes
        self._sheet = sheet
        density = np.zeros((len(modes), 3), dtype=complex)
        for n, value in sheet.density.items():
            try:
                density[modes.position(n)] = value
            except KeyError:
                continue
        self._density = density

    def exterior(self, height: float) -> tuple[np.ndarray, np.ndarray]:
        distance = height - self._sheet.height
        if distance == 0.0:
            raise errors.SourcePlaneError("sheet field evaluated on the sheet")
        sign = 1.0 if distance > 0 else -1.0
        modes = self._modes
        tensors = greens.dyadic_terms(modes.alpha, modes.beta, modes.k**2, sign)
        phase = (2.0 * math.pi) ** 2 * np.exp(1j * modes.beta * abs(distance))
        e = np.einsum("mij,mj->mi", tensors, self._density) * phase[:, None]
        return e, _plane_wave_curl(modes.alpha, sign * modes.beta, e)


def _check_source(
    height: float, planes: Sequence[float], what: str, tolerance: float
) -> None:
    for plane in planes:
        if abs(height - plane) <= tolerance:
            raise errors.SourceOnInterfaceError(
                f"{what} at x3={height} lies on the interface x3={plane}"
            )


def _background(
    config: grating.GratingConfig,
    material: grating.MaterialProfile,
    modes: lattice.ModeSet,
    incidence: lattice.IncidentSpec,
    numerics: config_lib.Numerics,
) -> _Background:
    if isinstance(incidence, lattice.PlaneOrder):
        try:
            position = modes.position(incidence.m)
        except KeyError:
            raise errors.UnsupportedCombinationError(
                f"incident order {incidence.m} is outside truncation "
                f"{config.truncation}"
            ) from None
        field = lattice.incident_plane_field(
            incidence.m,
            incidence.p,
            config.k0,
            config.momentum,
            wood_threshold=numerics.wood_threshold,
        )
        return _PlaneBackground(modes, position, field.coeffs[incidence.m])
    tolerance = SOURCE_TOLERANCE * max(1.0, config.b - config.c)
    if isinstance(incidence, lattice.Superposition):
        if not incidence.height > config.b:
            raise errors.UnsupportedCombinationError(
                f"sheet at x3={incidence.height} is not above b={config.b}"
            )
        _check_source(incidence.height, [config.b], "sheet", tolerance)
        return _SheetBackground(modes, incidence)
    height = float(incidence.y0[2])
    planes = [config.c, config.b]
    if isinstance(material, grating.Stack):
        planes.extend(material.interfaces(config.c, config.b))
    _check_source(height, planes, "dipole", tolerance)
    if height > config.b:
        return _DipoleBackground(
            modes.alpha, modes.beta, config.k0**2, incidence, interior=False
        )
    if height < config.c:
        raise errors.UnsupportedCombinationError(
            f"dipole at x3={height} is below the bottom boundary c={config.c}"
        )
    q = material.uniform_value()
    if q is None:
        raise errors.UnsupportedCombinationError(
            "an interior dipole needs a constant refractive index"
        )
    k_sq = config.k0**2 * q
    a_sq = np.einsum("ij,ij->i", modes.alpha, modes.alpha)
    beta = lattice.vertical_wavenumbers(k_sq, a_sq)
    lattice.check_wood(
        beta, np.sqrt(k_sq), modes.indices, threshold=numerics.wood_threshold
    )
    return _DipoleBackground(modes.alpha, beta, k_sq, incidence, interior=True)


def _tangential(values: np.ndarray, group: np.ndarray) -> np.ndarray:
    return np.concatenate([values[group, 0], values[group, 1]])


def _group_sources(
    background: _Background, group: np.ndarray, config: grating.GratingConfig
) -> layers_lib.GroupSources:
    ext_e, ext_c = background.exterior(config.b)
    top_e, top_c = background.interior(config.b)
    bottom_e, bottom_c = background.interior(config.c)
    return layers_lib.GroupSources(
        _tangential(ext_e, group),
        _tangential(ext_c, group),
        _tangential(top_e, group),
        _tangential(top_c, group),
        _tangential(bottom_e, group),
        _tangential(bottom_c, group),
    )


@dataclasses.dataclass(frozen=True, eq=False)
class _Model:
    """The part of a solve that does not depend on the incidence."""

    config: grating.GratingConfig
    material: grating.MaterialProfile
    modes: lattice.ModeSet
    groups: list[np.ndarray]
    problems: list[layers_lib.GroupProblem]


def _build_model(
    config: grating.GratingConfig,
    material: grating.MaterialProfile,
    numerics: config_lib.Numerics,
    *,
    allow_gain: bool,
    workers: Optional[int],
) -> _Model:
    material.validate(config.c, config.b, gamma=numerics.gamma, allow_gain=allow_gain)
    modes = lattice.mode_set(
        config.momentum,
        config.truncation,
        config.k0,
        wood_threshold=numerics.wood_threshold,
    )
    groups = layers_lib.mode_groups(material, modes)

    def build(group: np.ndarray) -> layers_lib.GroupProblem:
        bases = layers_lib.layer_bases(
            material,
            modes,
            group,
            config.k0,
            config.c,
            config.b,
            threshold=numerics.wood_threshold,
        )
        admittance = layers_lib.block_matrix(
            dtn.curl_blocks(config.k0**2, modes.alpha[group], modes.beta[group])
        )
        return layers_lib.GroupProblem(
            bases, admittance, config.lambda0, config.boundary
        )

    problems = concurrency.map_in_threads(build, groups, workers=workers)
    _LOG.debug(
        "solve: %d modes in %d groups, %s",
        len(modes),
        len(groups),
        type(material).__name__,
    )
    return _Model(config, material, modes, groups, problems)


@dataclasses.dataclass(frozen=True)
class SolveDiagnostics:
    """Relative residuals of a solved field.

    Attributes:
        interface_e: Jump of E_T across x3 = b.
        interface_c: Jump of (curl E)_T above against λ0 times below.
        boundary: The bottom condition at x3 = c.
        dtn: (curl E^s)_T − R(e3×E^s) at x3 = h.
        condition: The worst condition number of the group systems.
    """

    interface_e: float
    interface_c: float
    boundary: float
    dtn: float
    condition: float


@dataclasses.dataclass(frozen=True, eq=False)
class Solution:
    """A solved scattering problem.

    scattered_up holds the Rayleigh coefficients of the scattered field in
    Ω0, valid above b. The field itself is available at any height x3 >= c
    through modal_fields() and evaluate().
    """

    config: grating.GratingConfig
    material: grating.MaterialProfile
    incidence: lattice.IncidentSpec
    modes: lattice.ModeSet
    scattered_up: lattice.RayleighField
    condition: float
    _model: _Model = dataclasses.field(repr=False)
    _background: _Background = dataclasses.field(repr=False)
    _amplitudes: list[layers_lib.GroupAmplitudes] = dataclasses.field(repr=False)

    def _exterior(self, height: float, part: str) -> tuple[np.ndarray, np.ndarray]:
        modes = self.modes
        size = len(modes)
        e = np.zeros((size, 3), dtype=complex)
        for group, amplitudes in zip(self._model.groups, self._amplitudes):
            width = len(group)
            e[group, 0] = amplitudes.scattered[:width]
            e[group, 1] = amplitudes.scattered[width:]
        e[:, :2] *= np.exp(1j * modes.beta * (height - self.config.b))[:, None]
        e[:, 2] = -np.einsum("ij,ij->i", modes.alpha, e[:, :2]) / modes.beta
        c = _plane_wave_curl(modes.alpha, modes.beta, e)
        if part == "total":
            inc_e, inc_c = self._background.exterior(height)
            e, c = e + inc_e, c + inc_c
        return e, c

    def _interior(self, height: float, part: str) -> tuple[np.ndarray, np.ndarray]:
        size = len(self.modes)
        alpha = self.modes.alpha
        e = np.zeros((size, 3), dtype=complex)
        c = np.zeros((size, 3), dtype=complex)
        for group, problem, amplitudes in zip(
            self._model.groups, self._model.problems, self._amplitudes
        ):
            index = layers_lib.find_layer(problem.layers, height)
            assert index is not None
            layer = problem.layers[index]
            field, curl = layer.fields(
                amplitudes.up[index], amplitudes.down[index], height
            )
            width = len(group)
            e[group, 0], e[group, 1] = field[:width], field[width:]
            c[group, 0], c[group, 1] = curl[:width], curl[width:]
            e[group, 2] = layer.curl_to_normal @ curl
        c[:, 2] = 1j * (alpha[:, 0] * e[:, 1] - alpha[:, 1] * e[:, 0])
        if part == "total":
            inc_e, inc_c = self._background.interior(height)
            e, c = e + inc_e, c + inc_c
        return e, c

    def modal_fields(
        self, height: float, *, part: str = "total", below: bool = False
    ) -> tuple[np.ndarray, np.ndarray]:
        """Modal coefficients of E and curl E on the plane x3 = height.

        Args:
            height: The plane, at or above c.
            part: "total" or "scattered".
            below: At x3 = b, take the limit from inside the slab.

        Returns:
            (M, 3) arrays of E_n and (curl E)_n, in mode-table order.

        Raises:
            WrongHalfSpaceError: If height is below c.
        """
        if part not in ("total", "scattered"):
            raise ValueError(f"part must be total or scattered, got {part!r}")
        if height < self.config.c:
            raise errors.WrongHalfSpaceError(
                f"x3={height} is below the bottom boundary c={self.config.c}"
            )
        if height > self.config.b or (height == self.config.b and not below):
            return self._exterior(height, part)
        return self._interior(height, part)

    def evaluate(self, x: np.ndarray, *, part: str = "total") -> np.ndarray:
        """The field at a point with x3 >= c."""
        x = np.asarray(x, dtype=float)
        e, _ = self.modal_fields(float(x[2]), part=part)
        phase = np.exp(1j * (self.modes.alpha @ x[:2]))
        return phase @ e

    def diagnostics(
        self, *, numerics: Optional[config_lib.Numerics] = None
    ) -> SolveDiagnostics:
        numerics = numerics or config_lib.Numerics()
        config = self.config
        floor = numerics.eps_floor
        above_e, above_c = self.modal_fields(config.b)
        below_e, below_c = self.modal_fields(config.b, below=True)
        interface_e = _relative(
            above_e[:, :2] - below_e[:, :2], above_e[:, :2], below_e[:, :2], floor
        )
        interface_c = _relative(
            above_c[:, :2] - config.lambda0 * below_c[:, :2],
            above_c[:, :2],
            config.lambda0 * below_c[:, :2],
            floor,
        )
        bottom_e, bottom_c = self.modal_fields(config.c)
        # the total vanishes at c, so scale by what the slab carries
        slab_e, _ = self._interior(config.c, "scattered")
        scale_e = max(_norm(below_e[:, :2]), _norm(slab_e[:, :2]))
        if config.boundary.kind is grating.BoundaryKind.PEC:
            boundary = _norm(bottom_e[:, :2]) / max(scale_e, floor)
        else:
            assert config.boundary.rho is not None
            rho = config.boundary.rho
            rotated = np.column_stack([-bottom_c[:, 1], bottom_c[:, 0]])
            boundary = _relative(
                rotated - 1j * rho * bottom_e[:, :2],
                rotated,
                rho * bottom_e[:, :2],
                floor,
            )
        return SolveDiagnostics(
            interface_e,
            interface_c,
            boundary,
            _dtn_residual(self, floor, numerics.wood_threshold),
            self.condition,
        )


def _norm(values: np.ndarray) -> float:
    return float(np.linalg.norm(values))


def _relative(
    difference: np.ndarray, first: np.ndarray, second: np.ndarray, floor: float
) -> float:
    return _norm(difference) / max(_norm(first), _norm(second), floor)


def _dtn_residual(solution: Solution, floor: float, wood_threshold: float) -> float:
    config = solution.config
    trace = near_field_trace(solution, config.h, part="scattered")
    operator = dtn.DtnOperator(config.k0, config.momentum, config.h, config.truncation)
    image = dtn.dtn_apply(operator, trace, wood_threshold=wood_threshold)
    _, curl = solution.modal_fields(config.h, part="scattered")
    expected = np.array([image.coeffs[n][:2] for n in solution.modes.mode_indices()])
    return _relative(curl[:, :2] - expected, curl[:, :2], expected, floor)


def _solve_model(
    model: _Model,
    incidence: lattice.IncidentSpec,
    numerics: config_lib.Numerics,
    method: SolveMethod,
    workers: Optional[int],
) -> Solution:
    config = model.config
    background = _background(config, model.material, model.modes, incidence, numerics)

    def run(index: int) -> layers_lib.GroupAmplitudes:
        group = model.groups[index]
        return layers_lib.solve_group(
            model.problems[index],
            _group_sources(background, group, config),
            method=method,
            singular_condition=numerics.singular_condition,
        )

    amplitudes = concurrency.map_in_threads(
        run, range(len(model.groups)), workers=workers
    )
    condition = max(result.condition for result in amplitudes)
    modes = model.modes
    coeffs = {}
    for group, result in zip(model.groups, amplitudes):
        width = len(group)
        for offset, position in enumerate(group):
            tangential = np.array(
                [result.scattered[offset], result.scattered[width + offset]]
            )
            alpha = modes.alpha[position]
            beta = modes.beta[position]
            normal = -(alpha @ tangential) / beta
            phase = np.exp(-1j * beta * config.b)
            coeffs[modes.index(position)] = np.append(tangential, normal) * phase
    scattered = lattice.RayleighField(
        config.momentum,
        config.k0,
        lattice.Direction.UPWARD,
        coeffs,
        reference_height=config.b,
    )
    _LOG.debug("solve: worst condition number %.3e", condition)
    return Solution(
        config,
        model.material,
        incidence,
        modes,
        scattered,
        condition,
        model,
        background,
        amplitudes,
    )


def solve(
    config: grating.GratingConfig,
    material: grating.MaterialProfile,
    incidence: lattice.IncidentSpec,
    *,
    numerics: Optional[config_lib.Numerics] = None,
    method: SolveMethod = SolveMethod.SMATRIX,
    allow_gain: bool = False,
    workers: Optional[int] = None,
) -> Solution:
    """Solves the scattering problem for one incident field.

    Args:
        config: Geometry, boundary and truncation.
        material: The refractive index in the slab.
        incidence: A plane order, a dipole or a current sheet.
        numerics: Numerical knobs; defaults apply when omitted.
        method: The algebraic path used for every group.
        allow_gain: Accept Im q < 0 (adjoint problems).
        workers: Threads for the per-group solves.

    Returns:
        The solution.

    Raises:
        WoodAnomalyError: If a mode is at a Wood anomaly.
        SingularSystemError: If a group system is singular.
        UnsupportedCombinationError: For an interior dipole in a
            non-constant material, or a source outside its region.
        SourceOnInterfaceError: If a source sits on an interface.
        ConstraintError: If the material violates its constraints.
    """
    return solve_batch(
        config,
        material,
        [incidence],
        numerics=numerics,
        method=method,
        allow_gain=allow_gain,
        workers=workers,
    )[0]


def solve_batch(
    config: grating.GratingConfig,
    material: grating.MaterialProfile,
    incidences: Sequence[lattice.IncidentSpec],
    *,
    numerics: Optional[config_lib.Numerics] = None,
    method: SolveMethod = SolveMethod.SMATRIX,
    allow_gain: bool = False,
    workers: Optional[int] = None,
) -> list[Solution]:
    """Like solve(), for several incidences sharing one set of layer bases."""
    numerics = numerics or config_lib.Numerics()
    model = _build_model(
        config, material, numerics, allow_gain=allow_gain, workers=workers
    )
    return [
        _solve_model(model, incidence, numerics, method, workers)
        for incidence in incidences
    ]


def solve_dipole(
    config: grating.GratingConfig,
    material: grating.MaterialProfile,
    y0: np.ndarray,
    r: np.ndarray,
    *,
    momentum: Optional[lattice.QuasiMomentum] = None,
    numerics: Optional[config_lib.Numerics] = None,
    method: SolveMethod = SolveMethod.SMATRIX,
    allow_gain: bool = False,
    workers: Optional[int] = None,
) -> Solution:
    """Solves for the field radiated by a dipole r at y0.

    A source above b radiates the exterior Green's tensor; a source inside
    the slab radiates the Green's tensor of k1² = k0² q, which needs q to be
    constant.

    Args:
        momentum: Solve at this Bloch phase instead of config.momentum,
            typically the conjugate momentum −α.
    """
    if momentum is not None:
        config = config.replace(momentum=momentum)
    return solve(
        config,
        material,
        lattice.Dipole(y0, r),
        numerics=numerics,
        method=method,
        allow_gain=allow_gain,
        workers=workers,
    )


def near_field_trace(
    solution: Solution, h: float, *, part: str = "total"
) -> lattice.TangentialTrace:
    """The trace e3×E of the field on the plane x3 = h above the slab.

    Raises:
        HeightBelowInterfaceError: If h <= b.
    """
    if not h > solution.config.b:
        raise errors.HeightBelowInterfaceError(
            f"trace height {h} is not above the interface b={solution.config.b}"
        )
    e, _ = solution.modal_fields(h, part=part)
    coeffs = {
        n: np.array([-e[position, 1], e[position, 0], 0.0])
        for position, n in enumerate(solution.modes.mode_indices())
    }
    return lattice.TangentialTrace(solution.config.momentum, h, coeffs)


@dataclasses.dataclass(frozen=True)
class EnergyReport:
    """Reflected efficiencies of the propagating orders, and their sum."""

    efficiencies: tuple[tuple[lattice.ModeIndex, float], ...]
    total: float


def energy_report(solution: Solution) -> EnergyReport:
    """Splits the incident power among the reflected propagating orders.

    The efficiency of order n is β_n |E_n|² / (β_m |p_m|²).

    Raises:
        UnsupportedCombinationError: If the incidence is not a plane order.
        EvanescentIncidenceError: If the incident order is evanescent.
    """
    incidence = solution.incidence
    if not isinstance(incidence, lattice.PlaneOrder):
        raise errors.UnsupportedCombinationError(
            "efficiencies need a plane-order incidence"
        )
    modes = solution.modes
    position = modes.position(incidence.m)
    beta_m = modes.beta[position]
    if beta_m.imag != 0.0:
        raise errors.EvanescentIncidenceError(
            f"incident order {incidence.m} is evanescent (β={beta_m})"
        )
    p_m = solution._background.exterior(0.0)[0][position]
    incoming = beta_m.real * float(np.vdot(p_m, p_m).real)
    if incoming == 0.0:
        raise errors.UnsupportedCombinationError(
            f"polarization is parallel to the wavevector of order {incidence.m}"
        )
    rows = []
    for index in np.flatnonzero(modes.propagating):
        n = modes.index(int(index))
        coeff = solution.scattered_up.coeffs[n]
        power = modes.beta[index].real * float(np.vdot(coeff, coeff).real)
        rows.append((n, power / incoming))
    return EnergyReport(tuple(rows), math.fsum(value for _, value in rows))
