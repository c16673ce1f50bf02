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
"""Geometry, boundary and material descriptions of a layered grating.

The grating fills the slab c < x3 < b (the region Ω1) over a bottom boundary
x3 = c, which is a perfect conductor or an impedance surface. Above the
interface x3 = b is the homogeneous exterior Ω0 with wavenumber k0. Across
the interface the tangential field is continuous and the tangential curl
jumps by the factor λ0.
"""
from __future__ import annotations

from collections.abc import Mapping
from collections.abc import Sequence
import dataclasses
import enum
import math
from typing import Callable
from typing import Optional

import numpy as np

from . import errors
from . import lattice

GAMMA = 1e-3
STAIRCASE_LAYERS = 64
PROFILE_SAMPLES = 256


class BoundaryKind(enum.Enum):

    PEC = "pec"
    IMPEDANCE = "impedance"


@dataclasses.dataclass(frozen=True)
class Boundary:
    """The condition on x3 = c: ν×E = 0, or ν×curl E − iρ E_T = 0."""

    kind: BoundaryKind
    rho: Optional[float] = None

    @classmethod
    def pec(cls) -> Boundary:
        return cls(BoundaryKind.PEC)

    @classmethod
    def impedance(cls, rho: float) -> Boundary:
        return cls(BoundaryKind.IMPEDANCE, rho)


@dataclasses.dataclass(frozen=True)
class GratingConfig:
    """Everything about a run except the material and the incidence.

    Raises:
        ConstraintError: On construction, listing every violated constraint.
    """

    k0: float
    lambda0: float
    b: float
    c: float
    h: float
    boundary: Boundary
    momentum: lattice.QuasiMomentum
    truncation: int

    def __post_init__(self) -> None:
        violations = []
        if not self.k0 > 0:
            violations.append(f"physics.k0: {self.k0} is not positive")
        if not self.lambda0 > 0:
            violations.append(f"physics.lambda0: {self.lambda0} is not positive")
        if not self.c < self.b:
            violations.append(
                f"geometry.c, geometry.b: c={self.c} is not below b={self.b}"
            )
        if not self.b < self.h:
            violations.append(
                f"geometry.b, geometry.h: h={self.h} is not above b={self.b}"
            )
        if self.truncation < 0:
            violations.append(f"truncation: {self.truncation} is negative")
        if self.boundary.kind is BoundaryKind.IMPEDANCE:
            if self.boundary.rho is None or not self.boundary.rho > 0:
                violations.append(f"physics.rho: {self.boundary.rho} is not positive")
        elif self.boundary.rho is not None:
            violations.append("physics.rho: given for a PEC boundary")
        if violations:
            raise errors.ConstraintError(violations)

    def replace(self, **changes: object) -> GratingConfig:
        return dataclasses.replace(self, **changes)  # type: ignore


def refractive_index_from_materials(
    epsilon: float, sigma: float, omega: float, epsilon0: float
) -> complex:
    """q = (ε + iσ/ω)/ε0."""
    return complex(epsilon, sigma / omega) / epsilon0


def wavenumber_from_materials(epsilon0: float, mu: float, omega: float) -> float:
    """k0 = √(ε0 μ) ω."""
    return math.sqrt(epsilon0 * mu) * omega


def _check_value(q: complex, gamma: float, where: str, allow_gain: bool) -> list[str]:
    violations = []
    if q.real < gamma:
        violations.append(f"{where}: Re q = {q.real} is below {gamma}")
    if q.imag < 0 and not allow_gain:
        violations.append(f"{where}: Im q = {q.imag} is negative")
    return violations


class MaterialProfile:
    """The refractive index q in Ω1."""

    def violations(
        self, c: float, b: float, *, gamma: float = GAMMA, allow_gain: bool = False
    ) -> list[str]:
        raise NotImplementedError

    def validate(
        self, c: float, b: float, *, gamma: float = GAMMA, allow_gain: bool = False
    ) -> None:
        """Raises ConstraintError unless the profile fits the slab.

        Args:
            c: Bottom of the slab.
            b: Top of the slab.
            gamma: The required floor of Re q.
            allow_gain: Accept Im q < 0, as needed for adjoint problems.
        """
        violations = self.violations(c, b, gamma=gamma, allow_gain=allow_gain)
        if violations:
            raise errors.ConstraintError(violations)

    def uniform_value(self) -> Optional[complex]:
        """The constant value of q, or None if q varies."""
        raise NotImplementedError

    def conjugate(self) -> MaterialProfile:
        raise NotImplementedError


@dataclasses.dataclass(frozen=True)
class Layer:

    thickness: float
    q: complex


@dataclasses.dataclass(frozen=True)
class Stack(MaterialProfile):
    """q piecewise constant in x3; layers are listed from the bottom up."""

    layers: tuple[Layer, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "layers",
            tuple(Layer(float(ly.thickness), complex(ly.q)) for ly in self.layers),
        )
        if not self.layers:
            raise ValueError("a stack needs at least one layer")

    @classmethod
    def uniform(cls, q: complex, c: float, b: float) -> Stack:
        return cls((Layer(b - c, q),))

    @classmethod
    def equal_layers(cls, values: Sequence[complex], c: float, b: float) -> Stack:
        thickness = (b - c) / len(values)
        return cls(tuple(Layer(thickness, q) for q in values))

    @classmethod
    def staircase(
        cls,
        profile: Callable[[float], complex],
        c: float,
        b: float,
        layers: int = STAIRCASE_LAYERS,
    ) -> Stack:
        """Samples a continuous q(x3) at layer midpoints."""
        thickness = (b - c) / layers
        return cls(
            tuple(
                Layer(thickness, complex(profile(c + (j + 0.5) * thickness)))
                for j in range(layers)
            )
        )

    def bounds(self, c: float, b: float) -> list[tuple[float, float, complex]]:
        """(bottom, top, q) per layer; the last top is pinned to b."""
        result = []
        bottom = c
        for index, layer in enumerate(self.layers):
            top = b if index == len(self.layers) - 1 else bottom + layer.thickness
            result.append((bottom, top, layer.q))
            bottom = top
        return result

    def interfaces(self, c: float, b: float) -> list[float]:
        return [top for _, top, _ in self.bounds(c, b)[:-1]]

    def value_at(self, x3: float, c: float, b: float) -> complex:
        for bottom, top, q in self.bounds(c, b):
            if bottom <= x3 <= top:
                return q
        raise ValueError(f"x3={x3} is outside the slab [{c}, {b}]")

    def violations(
        self, c: float, b: float, *, gamma: float = GAMMA, allow_gain: bool = False
    ) -> list[str]:
        violations = []
        for index, layer in enumerate(self.layers):
            where = f"material.layers[{index}]"
            if not layer.thickness > 0:
                violations.append(
                    f"{where}.thickness: {layer.thickness} is not positive"
                )
            violations.extend(_check_value(layer.q, gamma, f"{where}.q", allow_gain))
        total = math.fsum(layer.thickness for layer in self.layers)
        if not math.isclose(total, b - c, rel_tol=1e-9, abs_tol=1e-12):
            violations.append(
                f"material.layers: thicknesses sum to {total}, not b - c = {b - c}"
            )
        return violations

    def uniform_value(self) -> Optional[complex]:
        values = {layer.q for layer in self.layers}
        return values.pop() if len(values) == 1 else None

    def conjugate(self) -> Stack:
        return Stack(
            tuple(Layer(ly.thickness, ly.q.conjugate()) for ly in self.layers)
        )


@dataclasses.dataclass(frozen=True)
class Fourier1D(MaterialProfile):
    """q(x_axis) = Σ_j q̂_j e^{ij x_axis}, constant in x3 over the slab.

    coefficients maps j to q̂_j; it is stored as sorted (j, q̂_j) pairs.
    """

    axis: int
    coefficients: tuple[tuple[int, complex], ...]

    def __init__(self, axis: int, coefficients: Mapping[int, complex]) -> None:
        if axis not in (1, 2):
            raise ValueError(f"axis must be 1 or 2, got {axis}")
        items = tuple(
            sorted((int(j), complex(v)) for j, v in dict(coefficients).items())
        )
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "coefficients", items)

    def coefficient(self, order: int) -> complex:
        return dict(self.coefficients).get(order, 0j)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape, dtype=complex)
        for order, value in self.coefficients:
            total += value * np.exp(1j * order * x)
        return total

    def toeplitz(self, orders: np.ndarray) -> np.ndarray:
        """The Laurent matrix [q̂_{n_i − n_j}] over the given orders."""
        lookup = dict(self.coefficients)
        orders = np.asarray(orders)
        size = len(orders)
        matrix = np.zeros((size, size), dtype=complex)
        for i in range(size):
            for j in range(size):
                matrix[i, j] = lookup.get(int(orders[i] - orders[j]), 0j)
        return matrix

    def violations(
        self, c: float, b: float, *, gamma: float = GAMMA, allow_gain: bool = False
    ) -> list[str]:
        grid = 2 * np.pi * np.arange(PROFILE_SAMPLES) / PROFILE_SAMPLES
        samples = self.evaluate(grid)
        # sums of exponentials put rounding noise on an exactly real profile
        slack = 1e-12 * float(np.abs(samples).max())
        violations = []
        lowest = float(samples.real.min())
        if lowest < gamma - slack:
            violations.append(
                f"material.coefficients: min Re q = {lowest} is below {gamma}"
            )
        lowest = float(samples.imag.min())
        if lowest < -slack and not allow_gain:
            violations.append(f"material.coefficients: min Im q = {lowest} is negative")
        return violations

    def uniform_value(self) -> Optional[complex]:
        if all(order == 0 or value == 0 for order, value in self.coefficients):
            return self.coefficient(0)
        return None

    def conjugate(self) -> Fourier1D:
        # conj(Σ q̂_j e^{ijx}) = Σ conj(q̂_{-j}) e^{ijx}
        return Fourier1D(
            self.axis, {-order: value.conjugate() for order, value in self.coefficients}
        )
