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
"""Quasi-periodic Green's functions of the Helmholtz and Maxwell operators.

The scalar function is the spectral series

    G0(x, y) = 1/(8π²) Σ_n (1/(iβ_n)) exp(iα_n·(x' − y') + iβ_n|x3 − y3|),

which converges exponentially off the source plane x3 = y3 and not at all on
it. With this normalization G0 behaves like −e^{ik|x−y|}/(4π|x−y|) near the
source, so the singular part split off by scalar_green_smooth_part() is that
sign-matched kernel (see singular_kernel()).

The smooth part is evaluated with a Kummer-type correction: the series of an
auxiliary Yukawa kernel with decay κ, and of its κ²-derivative, are
subtracted term by term, which leaves a bracket decaying like |α_n|^{-5}.
The subtracted kernels are added back as real-space lattice sums, which
converge like e^{-2πκ|j|}.

All sums are accumulated with math.fsum, so results do not depend on
summation order.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from typing import Optional

import numpy as np

from . import caches
from . import errors
from . import lattice

_LOG = logging.getLogger(__name__)

PLANE_TOLERANCE = 1e-2
FD_STEP = 1e-3
SMOOTH_DECAY = 1.0
SMOOTH_SHELLS = 6

_TWO_PI = 2.0 * math.pi
_SPECTRAL = 1.0 / (8.0 * math.pi**2)


@dataclasses.dataclass(frozen=True)
class GreenParams:
    """The wavenumber, Bloch phase and truncation of a Green's series.

    k may be complex (a lossy interior medium). For α̃ variants, pass the
    conjugate momentum.
    """

    k: complex
    momentum: lattice.QuasiMomentum
    truncation: int

    @property
    def k_sq(self) -> complex:
        return complex(self.k) ** 2


@caches.lru_cache(maxsize=32)
def _modes(
    params: GreenParams, wood_threshold: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    indices = lattice.truncation_indices(params.truncation)
    indices = indices[lattice.radial_order(indices)]
    alpha = indices + params.momentum.as_array()
    a_sq = np.einsum("ij,ij->i", alpha, alpha)
    beta = lattice.vertical_wavenumbers(params.k_sq, a_sq)
    lattice.check_wood(beta, params.k, indices, threshold=wood_threshold)
    for array in (indices, alpha, beta):
        array.flags.writeable = False
    return indices, alpha, beta


def _csum(values: np.ndarray) -> complex:
    values = np.asarray(values).ravel()
    return complex(math.fsum(values.real), math.fsum(values.imag))


def _offset(x: np.ndarray, y: np.ndarray, plane_tolerance: float) -> np.ndarray:
    offset = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if abs(offset[2]) < plane_tolerance:
        raise errors.SourcePlaneError(
            f"|x3 - y3| = {abs(offset[2])} is below {plane_tolerance}"
        )
    return offset


def scalar_green(
    x: np.ndarray,
    y: np.ndarray,
    params: GreenParams,
    *,
    plane_tolerance: float = PLANE_TOLERANCE,
    wood_threshold: float = lattice.WOOD_THRESHOLD,
) -> complex:
    """Evaluates the spectral series G0(x, y).

    Raises:
        SourcePlaneError: If |x3 − y3| < plane_tolerance.
        WoodAnomalyError: If a mode in the truncation is at a Wood anomaly.
    """
    offset = _offset(x, y, plane_tolerance)
    _, alpha, beta = _modes(params, wood_threshold)
    terms = np.exp(1j * (alpha @ offset[:2]) + 1j * beta * abs(offset[2])) / (
        1j * beta
    )
    return _SPECTRAL * _csum(terms)


def singular_kernel(x: np.ndarray, y: np.ndarray, k: complex) -> complex:
    """−e^{ikr}/(4πr), the singular behavior of G0 at r = |x − y| → 0."""
    r = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
    if r == 0.0:
        raise ZeroDivisionError("singular kernel evaluated at its source")
    return -complex(np.exp(1j * k * r)) / (4.0 * math.pi * r)


def _near_difference(r: float, kappa: float, k: complex, k_sq: complex) -> complex:
    # (e^{-κr} − e^{ikr}) / (4πr), with its r → 0 expansion
    if r < 1e-8:
        return (-kappa - 1j * k) / (4.0 * math.pi) + (kappa**2 + k_sq) * r / (
            8.0 * math.pi
        )
    return complex(np.exp(-kappa * r) - np.exp(1j * k * r)) / (4.0 * math.pi * r)


def scalar_green_smooth_part(
    x: np.ndarray,
    y: np.ndarray,
    params: GreenParams,
    *,
    decay: float = SMOOTH_DECAY,
    shells: int = SMOOTH_SHELLS,
    wood_threshold: float = lattice.WOOD_THRESHOLD,
) -> complex:
    """Returns a(x − y) = G0(x, y) − singular_kernel(x, y).

    a is smooth through x = y, so this may be evaluated on the source plane
    and at the source itself.

    Args:
        x: The field point.
        y: The source point, with |x − y| below one period.
        params: The series parameters; truncation controls the accuracy of
            the corrected spectral sum.
        decay: κ of the auxiliary Yukawa kernel.
        shells: Real-space lattice shells max(|j1|, |j2|) <= shells summed
            for the auxiliary kernels.
        wood_threshold: Wood-anomaly threshold, relative to |k|.

    Raises:
        ValueError: If |x − y| is not below one period.
        WoodAnomalyError: If a mode in the truncation is at a Wood anomaly.
    """
    offset = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = float(np.linalg.norm(offset))
    if r >= _TWO_PI:
        raise ValueError(f"|x - y| = {r} is not below one period")
    k = complex(params.k)
    k_sq = params.k_sq
    kappa = float(decay)
    kappa_sq = kappa * kappa
    height = abs(offset[2])

    _, alpha, beta = _modes(params, wood_threshold)
    phase = np.exp(1j * (alpha @ offset[:2]))
    s = np.sqrt(np.einsum("ij,ij->i", alpha, alpha) + kappa_sq)
    damped = np.exp(-s * height)
    outgoing = 1j / beta * np.exp(1j * beta * height)
    yukawa = damped / s
    yukawa_derivative = -damped * (1.0 + s * height) / (2.0 * s**3)
    spectral = _SPECTRAL * _csum(
        phase * (outgoing - yukawa + (k_sq + kappa_sq) * yukawa_derivative)
    )

    span = np.arange(-shells, shells + 1)
    j1, j2 = np.meshgrid(span, span, indexing="ij")
    lattice_points = _TWO_PI * np.stack([j1.ravel(), j2.ravel()], axis=1)
    bloch = np.exp(1j * (lattice_points @ params.momentum.as_array()))
    planar = offset[:2] - lattice_points
    distance = np.sqrt(np.einsum("ij,ij->i", planar, planar) + offset[2] ** 2)
    origin = (j1.ravel() == 0) & (j2.ravel() == 0)
    far = ~origin
    images = _csum(bloch[far] * np.exp(-kappa * distance[far]) / distance[far]) / (
        4.0 * math.pi
    )
    derivative_images = (
        (k_sq + kappa_sq)
        / (8.0 * math.pi * kappa)
        * _csum(bloch * np.exp(-kappa * distance))
    )
    near = _near_difference(r, kappa, k, k_sq)
    # The sum above is G⁺ − Φ for G⁺ = −G0 and Φ = e^{ikr}/(4πr).
    return -(spectral + images + derivative_images + near)


def _wavevectors(alpha: np.ndarray, beta: np.ndarray, sign: float) -> np.ndarray:
    return np.column_stack([alpha[:, 0], alpha[:, 1], sign * beta])


def dyadic_terms(
    alpha: np.ndarray, beta: np.ndarray, k_sq: complex, sign: float
) -> np.ndarray:
    """Per-mode tensors (I − K_n K_nᵀ/k²)/(8π² iβ_n), K_n = (α_n, ±β_n).

    Returns:
        An (M, 3, 3) array.
    """
    wavevectors = _wavevectors(alpha, beta, sign)
    outer = np.einsum("mi,mj->mij", wavevectors, wavevectors) / k_sq
    projector = np.eye(3)[None, :, :] - outer
    return projector * (_SPECTRAL / (1j * beta))[:, None, None]


def dipole_mode_coefficients(
    alpha: np.ndarray,
    beta: np.ndarray,
    k_sq: complex,
    y0: np.ndarray,
    r: np.ndarray,
    height: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Modal coefficients of the dipole field G(x, y0) r on a plane.

    The field on x3 = height is Σ_n E_n e^{iα_n·x'}, and its curl is
    Σ_n C_n e^{iα_n·x'}.

    Args:
        alpha: (M, 2) transverse wavevectors.
        beta: (M,) vertical wavenumbers for k_sq.
        k_sq: The squared wavenumber of the medium around the source.
        y0: The source point.
        r: The dipole moment.
        height: The plane, which must differ from y0[2].

    Returns:
        E and C, both (M, 3) complex arrays.
    """
    distance = height - float(y0[2])
    if distance == 0.0:
        raise errors.SourcePlaneError("dipole evaluated on its own plane")
    sign = 1.0 if distance > 0 else -1.0
    tensors = dyadic_terms(alpha, beta, k_sq, sign)
    phase = np.exp(-1j * (alpha @ np.asarray(y0[:2], dtype=float))) * np.exp(
        1j * beta * abs(distance)
    )
    e = np.einsum("mij,j->mi", tensors, np.asarray(r, dtype=complex)) * phase[:, None]
    c = 1j * np.cross(_wavevectors(alpha, beta, sign), e)
    return e, c


def dyadic_green(
    x: np.ndarray,
    y: np.ndarray,
    params: GreenParams,
    *,
    plane_tolerance: float = PLANE_TOLERANCE,
    wood_threshold: float = lattice.WOOD_THRESHOLD,
) -> np.ndarray:
    """Evaluates G(x, y) = G0 I + k^{-2} ∇_x div_x (G0 I) term by term.

    Returns:
        A 3×3 complex matrix.

    Raises:
        SourcePlaneError: If |x3 − y3| < plane_tolerance.
        WoodAnomalyError: If a mode in the truncation is at a Wood anomaly.
    """
    offset = _offset(x, y, plane_tolerance)
    _, alpha, beta = _modes(params, wood_threshold)
    sign = 1.0 if offset[2] > 0 else -1.0
    tensors = dyadic_terms(alpha, beta, params.k_sq, sign)
    phase = np.exp(1j * (alpha @ offset[:2]) + 1j * beta * abs(offset[2]))
    weighted = tensors * phase[:, None, None]
    result = np.empty((3, 3), dtype=complex)
    for i in range(3):
        for j in range(3):
            result[i, j] = _csum(weighted[:, i, j])
    return result


def helmholtz_residual(
    x: np.ndarray,
    y: np.ndarray,
    params: GreenParams,
    *,
    step: float = FD_STEP,
    plane_tolerance: float = PLANE_TOLERANCE,
) -> float:
    """|(Δ + k²)G0| / |k² G0| at x, by central differences."""
    x = np.asarray(x, dtype=float)

    def green(point: np.ndarray) -> complex:
        return scalar_green(point, y, params, plane_tolerance=plane_tolerance)

    center = green(x)
    laplacian = 0j
    for axis in range(3):
        shift = np.zeros(3)
        shift[axis] = step
        laplacian += (green(x + shift) - 2.0 * center + green(x - shift)) / step**2
    return abs(laplacian + params.k_sq * center) / abs(params.k_sq * center)


def _column(
    point: np.ndarray,
    y: np.ndarray,
    p: np.ndarray,
    params: GreenParams,
    plane_tolerance: float,
) -> np.ndarray:
    return dyadic_green(point, y, params, plane_tolerance=plane_tolerance) @ p


def column_divergence(
    x: np.ndarray,
    y: np.ndarray,
    p: np.ndarray,
    params: GreenParams,
    *,
    step: float = FD_STEP,
    plane_tolerance: float = PLANE_TOLERANCE,
) -> float:
    """|div_x (G p)| / (|k| |G p|) at x, by central differences."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=complex)
    divergence = 0j
    for axis in range(3):
        shift = np.zeros(3)
        shift[axis] = step
        forward = _column(x + shift, y, p, params, plane_tolerance)
        backward = _column(x - shift, y, p, params, plane_tolerance)
        divergence += (forward[axis] - backward[axis]) / (2.0 * step)
    value = _column(x, y, p, params, plane_tolerance)
    return abs(divergence) / (abs(complex(params.k)) * float(np.linalg.norm(value)))


def maxwell_residual(
    x: np.ndarray,
    y: np.ndarray,
    p: np.ndarray,
    params: GreenParams,
    *,
    step: float = FD_STEP,
    plane_tolerance: float = PLANE_TOLERANCE,
) -> float:
    """‖curl curl (G p) − k² G p‖ / ‖k² G p‖ at x, by central differences.

    curl curl is expanded as grad div − Δ, with the mixed second derivatives
    taken on the four-point diagonal stencil.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=complex)
    cache: dict[tuple[int, int, int], np.ndarray] = {}

    def field(offset: tuple[int, int, int]) -> np.ndarray:
        if offset not in cache:
            point = x + step * np.asarray(offset, dtype=float)
            cache[offset] = _column(point, y, p, params, plane_tolerance)
        return cache[offset]

    def unit(axis: int, scale: int) -> tuple[int, int, int]:
        offset = [0, 0, 0]
        offset[axis] = scale
        return (offset[0], offset[1], offset[2])

    def add(a: tuple[int, int, int], b: tuple[int, int, int]) -> tuple[int, int, int]:
        return (a[0] + b[0], a[1] + b[1], a[2] + b[2])

    center = field((0, 0, 0))
    hessian = np.empty((3, 3, 3), dtype=complex)  # [component, i, j]
    for i in range(3):
        hessian[:, i, i] = (
            field(unit(i, 1)) - 2.0 * center + field(unit(i, -1))
        ) / step**2
        for j in range(i + 1, 3):
            mixed = (
                field(add(unit(i, 1), unit(j, 1)))
                - field(add(unit(i, 1), unit(j, -1)))
                - field(add(unit(i, -1), unit(j, 1)))
                + field(add(unit(i, -1), unit(j, -1)))
            ) / (4.0 * step**2)
            hessian[:, i, j] = mixed
            hessian[:, j, i] = mixed
    grad_div = np.einsum("jij->i", hessian)
    laplacian = np.einsum("cii->c", hessian)
    residual = grad_div - laplacian - params.k_sq * center
    return float(np.linalg.norm(residual)) / float(
        np.linalg.norm(params.k_sq * center)
    )


def spectral_increment(
    x: np.ndarray,
    y: np.ndarray,
    params: GreenParams,
    extra: int,
    *,
    plane_tolerance: float = PLANE_TOLERANCE,
) -> float:
    """|G0 at truncation N + extra − G0 at N|, for convergence studies."""
    wider = dataclasses.replace(params, truncation=params.truncation + extra)
    return abs(
        scalar_green(x, y, wider, plane_tolerance=plane_tolerance)
        - scalar_green(x, y, params, plane_tolerance=plane_tolerance)
    )


def green_table(
    pairs: list[tuple[np.ndarray, np.ndarray]],
    params: GreenParams,
    *,
    plane_tolerance: float = PLANE_TOLERANCE,
    step: float = FD_STEP,
    decay: float = SMOOTH_DECAY,
    shells: int = SMOOTH_SHELLS,
    polarization: Optional[np.ndarray] = None,
) -> list[dict]:
    """Tabulates Green's values and their self-checks at point pairs.

    Pairs on (or near) the source plane get only the smooth part.
    """
    rows = []
    p = np.array([1.0, 0.0, 0.0]) if polarization is None else polarization
    for x, y in pairs:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        row: dict = {"x": x.tolist(), "y": y.tolist()}
        if float(np.linalg.norm(x - y)) < _TWO_PI:
            row["smooth_part"] = scalar_green_smooth_part(
                x, y, params, decay=decay, shells=shells
            )
        if abs(x[2] - y[2]) >= plane_tolerance + step:
            row["scalar"] = scalar_green(x, y, params, plane_tolerance=plane_tolerance)
            row["dyadic"] = dyadic_green(x, y, params, plane_tolerance=plane_tolerance)
            row["helmholtz_residual"] = helmholtz_residual(
                x, y, params, step=step, plane_tolerance=plane_tolerance
            )
            row["maxwell_residual"] = maxwell_residual(
                x, y, p, params, step=step, plane_tolerance=plane_tolerance
            )
        _LOG.debug("green: tabulated pair %s, %s", x, y)
        rows.append(row)
    return rows
