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
"""Quasi-periodic lattice bookkeeping.

Everything in biperiodic is 2π-periodic in x1 and x2 up to a Bloch phase: a
field E is α-quasi-periodic when E(x) e^{-iα·x} is 2π-periodic. Such a field
is a sum of modes e^{iα_n·x} with α_n = α + n over n ∈ ℤ², each with a
vertical wavenumber β_n that is either real (propagating) or imaginary
(evanescent).

This module owns those numbers, the Rayleigh series built from them, the
incident-field descriptions, and the modal norms of tangential traces.
"""
from __future__ import annotations

from collections.abc import Mapping
import dataclasses
import enum
import logging
import math
from typing import Optional
from typing import Union

import numpy as np
from typing_extensions import TypeAlias

from . import caches
from . import errors

_LOG = logging.getLogger(__name__)

ModeIndex: TypeAlias = tuple[int, int]

WOOD_THRESHOLD = 1e-8
EPS_FLOOR = 1e-30


@dataclasses.dataclass(frozen=True)
class QuasiMomentum:
    """The Bloch phase α = (α1, α2) of a quasi-periodic field."""

    alpha1: float
    alpha2: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha1) and math.isfinite(self.alpha2)):
            raise ValueError(f"non-finite momentum {self!r}")

    def conjugate(self) -> QuasiMomentum:
        """Returns α̃ = -α."""
        return QuasiMomentum(-self.alpha1, -self.alpha2)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2])


class Direction(enum.Enum):

    UPWARD = "upward"
    DOWNWARD = "downward"

    @property
    def sign(self) -> int:
        return 1 if self is Direction.UPWARD else -1


class Flavor(enum.Enum):

    PLAIN = "plain"
    DIV = "div"
    CURL = "curl"


def alpha_n(momentum: QuasiMomentum, n: ModeIndex) -> np.ndarray:
    """Returns the transverse wavevector α_n = α + n."""
    return np.array([momentum.alpha1 + n[0], momentum.alpha2 + n[1]])


def vertical_wavenumbers(k_sq: complex, a_sq: np.ndarray) -> np.ndarray:
    """Vertical wavenumbers √(k² − |α_n|²) on the outgoing branch.

    For real positive k², this is the two-case formula: √(k² − |α_n|²) when
    that is real, else i√(|α_n|² − k²). For complex k² (lossy or gain media),
    the root with Im ≥ 0 is taken, with Re ≥ 0 on the real axis.

    Args:
        k_sq: The squared wavenumber.
        a_sq: Squared transverse wavevector lengths |α_n|².

    Returns:
        An array of complex vertical wavenumbers, shaped like a_sq.
    """
    a_sq = np.asarray(a_sq, dtype=float)
    k_sq = complex(k_sq)
    if k_sq.imag == 0.0 and k_sq.real > 0.0:
        diff = k_sq.real - a_sq
        root = np.sqrt(np.abs(diff))
        return np.where(diff >= 0.0, root + 0j, 1j * root)
    root = np.sqrt(k_sq - a_sq + 0j)
    flip = (root.imag < 0.0) | ((root.imag == 0.0) & (root.real < 0.0))
    return np.where(flip, -root, root) + 0.0


def check_wood(
    beta: np.ndarray,
    k: complex,
    indices: Optional[np.ndarray] = None,
    *,
    threshold: float = WOOD_THRESHOLD,
) -> None:
    """Raises WoodAnomalyError if any |β_n| < threshold·|k|."""
    bad = np.abs(beta) < threshold * abs(k)
    if not np.any(bad):
        return
    where = ""
    if indices is not None:
        modes = [tuple(int(v) for v in row) for row in np.asarray(indices)[bad]]
        where = f" at modes {modes}"
    raise errors.WoodAnomalyError(f"vertical wavenumber vanishes for k={k}{where}")


def beta_n(
    k: float, alpha: np.ndarray, *, threshold: float = WOOD_THRESHOLD
) -> complex:
    """Returns the vertical wavenumber of one mode.

    Args:
        k: A positive real wavenumber.
        alpha: The transverse wavevector α_n.
        threshold: Wood-anomaly threshold, relative to k.

    Returns:
        β_n, real and positive for propagating modes, imaginary with positive
        imaginary part for evanescent ones.

    Raises:
        WoodAnomalyError: If |β_n| < threshold·k.
        ValueError: If k is not positive.
    """
    if not k > 0:
        raise ValueError(f"wavenumber must be positive, got {k}")
    a = np.asarray(alpha, dtype=float)
    beta = vertical_wavenumbers(k * k, np.array([a @ a]))
    check_wood(beta, k, threshold=threshold)
    return complex(beta[0])


def truncation_indices(truncation: int) -> np.ndarray:
    """All n with max(|n1|, |n2|) <= N, in lexicographic order.

    Returns:
        An int array of shape ((2N+1)², 2).
    """
    if truncation < 0:
        raise ValueError(f"truncation must be non-negative, got {truncation}")
    span = np.arange(-truncation, truncation + 1)
    n1, n2 = np.meshgrid(span, span, indexing="ij")
    return np.stack([n1.ravel(), n2.ravel()], axis=1)


def radial_order(indices: np.ndarray) -> np.ndarray:
    """A permutation sorting mode indices by increasing |n|, then n1, n2."""
    indices = np.asarray(indices)
    radius = indices[:, 0] ** 2 + indices[:, 1] ** 2
    return np.lexsort((indices[:, 1], indices[:, 0], radius))


@dataclasses.dataclass(frozen=True, eq=False)
class ModeSet:
    """The square truncation of the mode lattice at one wavenumber.

    Attributes:
        momentum: The Bloch phase.
        truncation: N, so that modes satisfy max(|n1|, |n2|) <= N.
        k: The wavenumber the vertical wavenumbers belong to.
        indices: (M, 2) mode indices, lexicographic.
        alpha: (M, 2) transverse wavevectors.
        beta: (M,) vertical wavenumbers.
    """

    momentum: QuasiMomentum
    truncation: int
    k: float
    indices: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    def position(self, n: ModeIndex) -> int:
        width = 2 * self.truncation + 1
        i, j = n[0] + self.truncation, n[1] + self.truncation
        if not (0 <= i < width and 0 <= j < width):
            raise KeyError(n)
        return i * width + j

    def index(self, position: int) -> ModeIndex:
        n1, n2 = self.indices[position]
        return (int(n1), int(n2))

    def mode_indices(self) -> list[ModeIndex]:
        return [(int(n1), int(n2)) for n1, n2 in self.indices]

    @property
    def propagating(self) -> np.ndarray:
        return self.beta.imag == 0.0


@caches.lru_cache(maxsize=64)
def mode_set(
    momentum: QuasiMomentum,
    truncation: int,
    k: float,
    *,
    wood_threshold: float = WOOD_THRESHOLD,
) -> ModeSet:
    """Builds (or fetches) the mode table for one configuration.

    The returned arrays are read-only.

    Raises:
        WoodAnomalyError: If any mode in the truncation is at a Wood anomaly.
        ValueError: If k is not positive.
    """
    if not k > 0:
        raise ValueError(f"wavenumber must be positive, got {k}")
    indices = truncation_indices(truncation)
    alpha = indices + momentum.as_array()
    beta = vertical_wavenumbers(k * k, np.einsum("ij,ij->i", alpha, alpha))
    check_wood(beta, k, indices, threshold=wood_threshold)
    for array in (indices, alpha, beta):
        array.flags.writeable = False
    _LOG.debug("modes: built %d modes for %s, k=%s", len(indices), momentum, k)
    return ModeSet(momentum, truncation, k, indices, alpha, beta)


def _vector(value: object, *, name: str) -> np.ndarray:
    array = np.asarray(value, dtype=complex)
    if array.shape == (2,):
        array = np.append(array, 0.0)
    if array.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {array.shape}")
    return array


@dataclasses.dataclass(frozen=True, eq=False)
class RayleighField:
    """A truncated Rayleigh series Σ E_n exp(iα_n·x ± iβ_n x3).

    Coefficients are absolute: the phase of mode n at height x3 is
    e^{±iβ_n x3}, whatever the reference height. reference_height only marks
    the boundary of the half-space where the series is valid: above it for
    upward fields, below it for downward ones.
    """

    momentum: QuasiMomentum
    k: float
    direction: Direction
    coeffs: Mapping[ModeIndex, np.ndarray]
    reference_height: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "coeffs",
            {
                (int(n[0]), int(n[1])): _vector(value, name=f"coefficient {n}")
                for n, value in self.coeffs.items()
            },
        )

    def beta(self, n: ModeIndex, *, threshold: float = WOOD_THRESHOLD) -> complex:
        return beta_n(self.k, alpha_n(self.momentum, n), threshold=threshold)


@dataclasses.dataclass(frozen=True, eq=False)
class TangentialTrace:
    """Modal coefficients of a tangential field on the plane x3 = height.

    Each coefficient is a complex 3-vector whose third component is exactly
    zero.
    """

    momentum: QuasiMomentum
    height: float
    coeffs: Mapping[ModeIndex, np.ndarray]

    def __post_init__(self) -> None:
        coeffs = {}
        for n, value in self.coeffs.items():
            vector = _vector(value, name=f"trace coefficient {n}")
            if vector[2] != 0:
                raise ValueError(f"trace coefficient {n} has a normal component")
            coeffs[(int(n[0]), int(n[1]))] = vector
        object.__setattr__(self, "coeffs", coeffs)

    def __add__(self, other: TangentialTrace) -> TangentialTrace:
        if (self.momentum, self.height) != (other.momentum, other.height):
            raise ValueError("traces live on different planes or momenta")
        coeffs = dict(self.coeffs)
        for n, value in other.coeffs.items():
            coeffs[n] = coeffs[n] + value if n in coeffs else value
        return TangentialTrace(self.momentum, self.height, coeffs)

    def scaled(self, factor: complex) -> TangentialTrace:
        return TangentialTrace(
            self.momentum,
            self.height,
            {n: factor * value for n, value in self.coeffs.items()},
        )


@dataclasses.dataclass(frozen=True, eq=False)
class PlaneOrder:
    """The plane-order incident wave of mode m and polarization p."""

    m: ModeIndex
    p: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "m", (int(self.m[0]), int(self.m[1])))
        p = _vector(self.p, name="polarization")
        if not np.any(p):
            raise ValueError("polarization must be nonzero")
        object.__setattr__(self, "p", p)


@dataclasses.dataclass(frozen=True, eq=False)
class Dipole:
    """A point source r at y0, radiating the quasi-periodic Green's tensor."""

    y0: np.ndarray
    r: np.ndarray

    def __post_init__(self) -> None:
        y0 = np.asarray(self.y0, dtype=float)
        if y0.shape != (3,):
            raise ValueError(f"source point must be 3-vector, got shape {y0.shape}")
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "r", _vector(self.r, name="dipole moment"))


@dataclasses.dataclass(frozen=True, eq=False)
class Superposition:
    """A tangential current sheet r on the plane x3 = height.

    The incident field is the Green's tensor integrated against the sheet
    density over one period cell. density holds the modal coefficients of the
    density, r(y') = Σ r_n e^{iα_n·y'}.
    """

    height: float
    density: Mapping[ModeIndex, np.ndarray]

    def __post_init__(self) -> None:
        density = {}
        for n, value in self.density.items():
            vector = _vector(value, name=f"density coefficient {n}")
            if vector[2] != 0:
                raise ValueError("sheet density must be tangential")
            density[(int(n[0]), int(n[1]))] = vector
        object.__setattr__(self, "density", density)

    @classmethod
    def from_samples(
        cls, height: float, samples: np.ndarray, momentum: QuasiMomentum
    ) -> Superposition:
        """Builds a sheet from density samples on a uniform cell grid.

        Args:
            height: The sheet height.
            samples: A (P1, P2, 2) array of tangential density values at
                y' = 2π(j1/P1, j2/P2).
            momentum: The Bloch phase of the density.

        Returns:
            A Superposition holding the modes |n_i| <= (P_i - 1) // 2.
        """
        samples = np.asarray(samples, dtype=complex)
        p1, p2 = samples.shape[:2]
        y1, y2 = np.meshgrid(
            2 * np.pi * np.arange(p1) / p1,
            2 * np.pi * np.arange(p2) / p2,
            indexing="ij",
        )
        phase = np.exp(-1j * (momentum.alpha1 * y1 + momentum.alpha2 * y2))
        spectrum = np.fft.fft2(samples * phase[..., None], axes=(0, 1)) / (p1 * p2)
        density = {}
        for n1 in range(-((p1 - 1) // 2), (p1 - 1) // 2 + 1):
            for n2 in range(-((p2 - 1) // 2), (p2 - 1) // 2 + 1):
                value = spectrum[n1 % p1, n2 % p2, :2]
                density[(n1, n2)] = np.append(value, 0.0)
        return cls(height, density)


IncidentSpec = Union[PlaneOrder, Dipole, Superposition]


def classical_direction(theta1: float, theta2: float) -> np.ndarray:
    """d = (cosθ1 cosθ2, cosθ1 sinθ2, −sinθ1)."""
    return np.array(
        [
            math.cos(theta1) * math.cos(theta2),
            math.cos(theta1) * math.sin(theta2),
            -math.sin(theta1),
        ]
    )


def classical_incidence(
    k0: float, theta1: float, theta2: float, p: np.ndarray
) -> tuple[QuasiMomentum, PlaneOrder]:
    """Expresses the plane wave p e^{ik0 x·d} as a plane order.

    The classical wave at incidence angles (θ1, θ2), 0 < θ1 <= π, is the
    order m = (0, 0) at α = k0 (cosθ1 cosθ2, cosθ1 sinθ2).

    Returns:
        The momentum to solve at, and the incidence.

    Raises:
        ValueError: If θ1 is out of range.
    """
    if not 0 < theta1 <= math.pi:
        raise ValueError(f"θ1 must be in (0, π], got {theta1}")
    d = classical_direction(theta1, theta2)
    return QuasiMomentum(k0 * d[0], k0 * d[1]), PlaneOrder((0, 0), p)


def project_polarization(
    p: np.ndarray, wavevector: np.ndarray, k_sq: complex
) -> np.ndarray:
    """Returns p − K (K·p)/k², the part of p transverse to K (K·K = k²)."""
    return p - wavevector * (wavevector @ p) / k_sq


def incident_plane_field(
    m: ModeIndex,
    p: np.ndarray,
    k: float,
    momentum: QuasiMomentum,
    *,
    wood_threshold: float = WOOD_THRESHOLD,
) -> RayleighField:
    """The single-mode downward field p_m exp(iα_m·x − iβ_m x3).

    Args:
        m: The incident order.
        p: The polarization.
        k: The exterior wavenumber.
        momentum: The Bloch phase.
        wood_threshold: Wood-anomaly threshold, relative to k.

    Returns:
        A downward RayleighField with the one coefficient p_m, the part of p
        transverse to (α_m, −β_m).

    Raises:
        WoodAnomalyError: If β_m vanishes.
    """
    a = alpha_n(momentum, m)
    beta = beta_n(k, a, threshold=wood_threshold)
    wavevector = np.array([a[0], a[1], -beta])
    p_m = project_polarization(_vector(p, name="polarization"), wavevector, k * k)
    return RayleighField(momentum, k, Direction.DOWNWARD, {m: p_m})


def rayleigh_evaluate(
    field: RayleighField, x: np.ndarray, *, wood_threshold: float = WOOD_THRESHOLD
) -> np.ndarray:
    """Evaluates a Rayleigh series at a point.

    Raises:
        WrongHalfSpaceError: If x lies on the side of reference_height where
            the field's evanescent terms grow.
    """
    x = np.asarray(x, dtype=float)
    sign = field.direction.sign
    if sign * (x[2] - field.reference_height) < 0:
        raise errors.WrongHalfSpaceError(
            f"{field.direction.value} field evaluated at x3={x[2]}, "
            f"reference height {field.reference_height}"
        )
    total = np.zeros(3, dtype=complex)
    for n, coeff in field.coeffs.items():
        a = alpha_n(field.momentum, n)
        beta = field.beta(n, threshold=wood_threshold)
        phase = np.exp(1j * (a @ x[:2]) + 1j * sign * beta * x[2])
        total += coeff * phase
    return total


def modal_sobolev_norm(
    trace: TangentialTrace, s: float, flavor: Union[Flavor, str] = Flavor.PLAIN
) -> float:
    """The modal H^s, H^s(div) or H^s(curl) norm of a tangential trace.

    The squared norm is Σ (1 + |α_n|²)^s (|E_n|² + |α_n·E_n|²) for div, with
    |α_n × E_n|² for curl and no extra term for plain.
    """
    flavor = Flavor(flavor)
    terms = []
    for n, coeff in trace.coeffs.items():
        a = alpha_n(trace.momentum, n)
        weight = (1.0 + a @ a) ** s
        value = float(np.vdot(coeff, coeff).real)
        if flavor is Flavor.DIV:
            value += abs(a[0] * coeff[0] + a[1] * coeff[1]) ** 2
        elif flavor is Flavor.CURL:
            value += abs(coeff[0] * a[1] - coeff[1] * a[0]) ** 2
        terms.append(weight * value)
    return math.sqrt(math.fsum(terms))


def divergence_residual(
    field: RayleighField,
    *,
    eps_floor: float = EPS_FLOOR,
    wood_threshold: float = WOOD_THRESHOLD,
) -> float:
    """max_n |α_n·E_n ± β_n E_n3| / max(|E_n|, eps_floor)."""
    worst = 0.0
    sign = field.direction.sign
    for n, coeff in field.coeffs.items():
        a = alpha_n(field.momentum, n)
        beta = field.beta(n, threshold=wood_threshold)
        value = abs(a[0] * coeff[0] + a[1] * coeff[1] + sign * beta * coeff[2])
        worst = max(worst, value / max(float(np.linalg.norm(coeff)), eps_floor))
    return worst


def coefficient_table(
    field: RayleighField, *, order: Optional[list[ModeIndex]] = None
) -> list[list[float]]:
    """Rows (n1, n2, Re E1, Im E1, Re E2, Im E2, Re E3, Im E3), sorted by n."""
    rows = []
    for n in order if order is not None else sorted(field.coeffs):
        coeff = field.coeffs[n]
        row: list[float] = [float(n[0]), float(n[1])]
        for value in coeff:
            row.extend([float(value.real), float(value.imag)])
        rows.append(row)
    return rows
