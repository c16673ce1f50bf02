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
"""Layer eigenbases and the per-group two-point boundary-value solve.

Fields in Ω1 are solved one mode group at a time. A group is a set of modes
that the material couples: one mode for a stack, a row or column of the mode
lattice for a Fourier profile. For a group of M modes the tangential field
and the tangential curl are 2M-vectors, stored component-major:
[E1 of each mode, E2 of each mode].

Inside a layer the field is a sum of 2M upward and 2M downward eigenwaves.
Upward amplitudes are referenced at the layer bottom and downward ones at the
layer top, so every propagation factor that appears has modulus at most one.
"""
from __future__ import annotations

from collections.abc import Sequence
import dataclasses
import enum
import logging
from typing import Optional

import numpy as np
import scipy.linalg

from . import dtn
from . import errors
from . import grating
from . import lattice

_LOG = logging.getLogger(__name__)

SINGULAR_CONDITION = 1e12


class SolveMethod(enum.Enum):

    SMATRIX = "smatrix"
    MONOLITHIC = "monolithic"


@dataclasses.dataclass(frozen=True, eq=False)
class LayerBasis:
    """The eigenwaves of one layer for one mode group.

    Columns of up_e/up_c (down_e/down_c) are the tangential field and curl
    of each upward (downward) eigenwave. The wave with vertical wavenumber
    gamma_up[j] has phase e^{iγ(x3 − bottom)}; the downward one
    e^{iγ(x3 − top)}.
    """

    bottom: float
    top: float
    up_e: np.ndarray
    up_c: np.ndarray
    down_e: np.ndarray
    down_c: np.ndarray
    gamma_up: np.ndarray
    gamma_down: np.ndarray
    curl_to_normal: np.ndarray

    @property
    def thickness(self) -> float:
        return self.top - self.bottom

    def up_phase(self) -> np.ndarray:
        return np.exp(1j * self.gamma_up * self.thickness)

    def down_phase(self) -> np.ndarray:
        return np.exp(-1j * self.gamma_down * self.thickness)

    def up_waves(self) -> np.ndarray:
        return np.vstack([self.up_e, self.up_c])

    def down_waves(self) -> np.ndarray:
        return np.vstack([self.down_e, self.down_c])

    def fields(
        self, up: np.ndarray, down: np.ndarray, height: float
    ) -> tuple[np.ndarray, np.ndarray]:
        """The tangential field and curl at a height inside the layer."""
        up = up * np.exp(1j * self.gamma_up * (height - self.bottom))
        down = down * np.exp(1j * self.gamma_down * (height - self.top))
        return (
            self.up_e @ up + self.down_e @ down,
            self.up_c @ up + self.down_c @ down,
        )


def block_matrix(blocks: np.ndarray) -> np.ndarray:
    """Expands (M, 2, 2) per-mode blocks to a component-major 2M×2M matrix."""
    return np.block(
        [
            [np.diag(blocks[:, 0, 0]), np.diag(blocks[:, 0, 1])],
            [np.diag(blocks[:, 1, 0]), np.diag(blocks[:, 1, 1])],
        ]
    )


def rotation(size: int) -> np.ndarray:
    """J = [[0, −I], [I, 0]], so that J C_T = e3 × C."""
    eye = np.eye(size)
    zero = np.zeros((size, size))
    return np.block([[zero, -eye], [eye, zero]])


def homogeneous_basis(
    kappa_sq: complex,
    alpha: np.ndarray,
    bottom: float,
    top: float,
    *,
    threshold: float = lattice.WOOD_THRESHOLD,
) -> LayerBasis:
    """Eigenwaves of a homogeneous layer, in closed form.

    Raises:
        SingularSystemError: If a mode of the group is at cutoff in the layer.
    """
    a_sq = np.einsum("ij,ij->i", alpha, alpha)
    gamma = lattice.vertical_wavenumbers(kappa_sq, a_sq)
    if np.any(np.abs(gamma) < threshold * abs(np.sqrt(complex(kappa_sq)))):
        raise errors.SingularSystemError(
            f"a mode is at cutoff in the layer [{bottom}, {top}], κ²={kappa_sq}"
        )
    admittance = block_matrix(dtn.curl_blocks(kappa_sq, alpha, gamma))
    eye = np.eye(2 * len(alpha), dtype=complex)
    normal = 1j * np.hstack([np.diag(-alpha[:, 1]), np.diag(alpha[:, 0])]) / kappa_sq
    both = np.concatenate([gamma, gamma])
    return LayerBasis(
        bottom, top, eye, admittance, eye, -admittance, both, -both, normal
    )


def first_order_matrix(
    permittivity: np.ndarray, alpha: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """The system ψ' = Mψ for ψ = (E_T, (curl E)_T) of a coupled group.

    Args:
        permittivity: The M×M matrix k0² Q acting on modal coefficients,
            with Q the Laurent matrix of q.
        alpha: (M, 2) transverse wavevectors.

    Returns:
        The 4M×4M matrix, and the M×2M matrix giving E3 from (curl E)_T.
    """
    size = len(alpha)
    a1 = np.diag(alpha[:, 0])
    a2 = np.diag(alpha[:, 1])
    eye = np.eye(size)
    zero = np.zeros((size, size))
    inverse = np.linalg.inv(permittivity)
    matrix = np.block(
        [
            [zero, zero, a1 @ inverse @ a2, eye - a1 @ inverse @ a1],
            [zero, zero, a2 @ inverse @ a2 - eye, -a2 @ inverse @ a1],
            [a1 @ a2, permittivity - a1 @ a1, zero, zero],
            [a2 @ a2 - permittivity, -a2 @ a1, zero, zero],
        ]
    )
    normal = 1j * np.hstack([-inverse @ a2, inverse @ a1])
    return matrix, normal


def coupled_basis(
    permittivity: np.ndarray, alpha: np.ndarray, bottom: float, top: float
) -> LayerBasis:
    """Eigenwaves of a layer whose material couples the group's modes.

    Eigenvalues λ of the first-order matrix give vertical wavenumbers
    γ = −iλ. A wave is upward if Im γ > 0, or if γ is real and positive.
    Within each direction waves are ordered by (Im γ, Re γ).

    Raises:
        SingularSystemError: If the spectrum does not split evenly.
    """
    size = len(alpha)
    matrix, normal = first_order_matrix(permittivity, alpha)
    eigenvalues, vectors = scipy.linalg.eig(matrix)
    gamma = -1j * eigenvalues
    tolerance = 1e-10 * max(1.0, float(np.abs(gamma).max()))
    upward = (gamma.imag > tolerance) | (
        (np.abs(gamma.imag) <= tolerance) & (gamma.real > 0)
    )
    up = np.flatnonzero(upward)
    down = np.flatnonzero(~upward)
    if len(up) != 2 * size or len(down) != 2 * size:
        raise errors.SingularSystemError(
            f"layer [{bottom}, {top}] has {len(up)} upward and {len(down)} "
            f"downward eigenwaves, expected {2 * size} each"
        )
    up = up[np.lexsort((gamma[up].real, gamma[up].imag))]
    down = down[np.lexsort((gamma[down].real, gamma[down].imag))]
    half = 2 * size
    return LayerBasis(
        bottom,
        top,
        vectors[:half, up],
        vectors[half:, up],
        vectors[:half, down],
        vectors[half:, down],
        gamma[up],
        gamma[down],
        normal,
    )


def mode_groups(
    material: grating.MaterialProfile, modes: lattice.ModeSet
) -> list[np.ndarray]:
    """Positions (into modes) of each group of coupled modes."""
    if isinstance(material, grating.Fourier1D):
        # q(x1) couples n1 at fixed n2, and vice versa
        fixed = modes.indices[:, 2 - material.axis]
        return [np.flatnonzero(fixed == value) for value in np.unique(fixed)]
    return [np.array([position]) for position in range(len(modes))]


def layer_bases(
    material: grating.MaterialProfile,
    modes: lattice.ModeSet,
    group: np.ndarray,
    k0: float,
    c: float,
    b: float,
    *,
    threshold: float = lattice.WOOD_THRESHOLD,
) -> list[LayerBasis]:
    """The layers of Ω1 for one group, from the bottom up."""
    alpha = modes.alpha[group]
    k_sq = k0 * k0
    if isinstance(material, grating.Stack):
        return [
            homogeneous_basis(k_sq * q, alpha, bottom, top, threshold=threshold)
            for bottom, top, q in material.bounds(c, b)
        ]
    if isinstance(material, grating.Fourier1D):
        orders = modes.indices[group, material.axis - 1]
        permittivity = k_sq * material.toeplitz(orders)
        return [coupled_basis(permittivity, alpha, c, b)]
    raise TypeError(f"unsupported material {type(material).__name__}")


@dataclasses.dataclass(frozen=True, eq=False)
class GroupSources:
    """Known background fields of one group, as 2M tangential vectors.

    exterior_*: the incident field in Ω0 at x3 = b.
    interior_top_*, interior_bottom_*: the incident field in Ω1 at x3 = b and
    x3 = c.
    """

    exterior_e: np.ndarray
    exterior_c: np.ndarray
    interior_top_e: np.ndarray
    interior_top_c: np.ndarray
    interior_bottom_e: np.ndarray
    interior_bottom_c: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> GroupSources:
        zero = np.zeros(2 * size, dtype=complex)
        return cls(zero, zero, zero, zero, zero, zero)

    def is_zero(self) -> bool:
        return not any(
            np.any(value)
            for value in (
                self.exterior_e,
                self.exterior_c,
                self.interior_top_e,
                self.interior_top_c,
                self.interior_bottom_e,
                self.interior_bottom_c,
            )
        )


@dataclasses.dataclass(frozen=True, eq=False)
class GroupAmplitudes:
    """Solved amplitudes of one group.

    up[j], down[j]: eigenwave amplitudes of layer j. scattered: the
    tangential scattered field in Ω0 at x3 = b.
    """

    up: list[np.ndarray]
    down: list[np.ndarray]
    scattered: np.ndarray
    condition: float


@dataclasses.dataclass(frozen=True, eq=False)
class GroupProblem:
    """Everything needed to solve one group."""

    layers: Sequence[LayerBasis]
    exterior_admittance: np.ndarray
    lambda0: float
    boundary: grating.Boundary

    @property
    def size(self) -> int:
        return len(self.exterior_admittance) // 2

    def bottom_operator(self) -> tuple[np.ndarray, np.ndarray]:
        """(A_E, A_C) with the bottom condition A_E E_T + A_C C_T = 0."""
        size = self.size
        if self.boundary.kind is grating.BoundaryKind.PEC:
            return np.eye(2 * size), np.zeros((2 * size, 2 * size))
        assert self.boundary.rho is not None
        return -1j * self.boundary.rho * np.eye(2 * size), rotation(size)


def _condition(matrix: np.ndarray) -> float:
    with np.errstate(all="ignore"):
        value = float(np.linalg.cond(matrix))
    return value if np.isfinite(value) else float("inf")


def _checked_solve(
    matrix: np.ndarray, rhs: np.ndarray, limit: float, what: str
) -> tuple[np.ndarray, float]:
    condition = _condition(matrix)
    if condition > limit:
        raise errors.SingularSystemError(
            f"{what} is singular to working precision (condition {condition:.3e})",
            condition=condition,
        )
    return np.linalg.solve(matrix, rhs), condition


def _top_rhs(problem: GroupProblem, sources: GroupSources) -> np.ndarray:
    return np.concatenate(
        [
            sources.exterior_e - sources.interior_top_e,
            sources.exterior_c - problem.lambda0 * sources.interior_top_c,
        ]
    )


def _bottom_rhs(problem: GroupProblem, sources: GroupSources) -> np.ndarray:
    op_e, op_c = problem.bottom_operator()
    return -(op_e @ sources.interior_bottom_e + op_c @ sources.interior_bottom_c)


def _solve_smatrix(
    problem: GroupProblem, sources: GroupSources, limit: float
) -> GroupAmplitudes:
    layers = problem.layers
    size2 = 2 * problem.size
    op_e, op_c = problem.bottom_operator()
    bottom = np.hstack([op_e, op_c])
    worst = 1.0

    # u_j = R_j Φd_j d_j + t_j, from the bottom boundary upward
    first = layers[0]
    lhs = bottom @ first.up_waves()
    rhs = np.column_stack(
        [-(bottom @ first.down_waves()), _bottom_rhs(problem, sources)]
    )
    solved, condition = _checked_solve(lhs, rhs, limit, "bottom boundary system")
    worst = max(worst, condition)
    reflections = [solved[:, :size2]]
    offsets = [solved[:, size2]]
    # d_j = F_j Φd_{j+1} d_{j+1} + f_j, for back-substitution
    carries: list[tuple[np.ndarray, np.ndarray]] = []
    for lower, upper in zip(layers[:-1], layers[1:]):
        phase_up = lower.up_phase()[:, None]
        gamma_matrix = phase_up * reflections[-1] * lower.down_phase()[None, :]
        tau = phase_up[:, 0] * offsets[-1]
        combined = lower.up_waves() @ gamma_matrix + lower.down_waves()
        lhs = np.hstack([combined, -upper.up_waves()])
        rhs = np.column_stack([upper.down_waves(), -(lower.up_waves() @ tau)])
        solved, condition = _checked_solve(lhs, rhs, limit, "interface system")
        worst = max(worst, condition)
        carries.append((solved[:size2, :size2], solved[:size2, size2]))
        reflections.append(solved[size2:, :size2])
        offsets.append(solved[size2:, size2])

    last = layers[-1]
    phase_up = last.up_phase()[:, None]
    gamma_matrix = phase_up * reflections[-1] * last.down_phase()[None, :]
    tau = phase_up[:, 0] * offsets[-1]
    combined_e = last.up_e @ gamma_matrix + last.down_e
    combined_c = last.up_c @ gamma_matrix + last.down_c
    eye = np.eye(size2)
    lhs = np.block(
        [
            [combined_e, -eye],
            [problem.lambda0 * combined_c, -problem.exterior_admittance],
        ]
    )
    rhs = _top_rhs(problem, sources) - np.concatenate(
        [last.up_e @ tau, problem.lambda0 * (last.up_c @ tau)]
    )
    solved, condition = _checked_solve(lhs, rhs, limit, "interface system at b")
    worst = max(worst, condition)
    downs = [solved[:size2]]
    scattered = solved[size2:]
    for index in range(len(layers) - 2, -1, -1):
        carry, offset = carries[index]
        downs.insert(0, carry @ (layers[index + 1].down_phase() * downs[0]) + offset)
    ups = [
        reflection @ (layer.down_phase() * down) + offset
        for reflection, offset, layer, down in zip(reflections, offsets, layers, downs)
    ]
    return GroupAmplitudes(ups, downs, scattered, worst)


def _solve_monolithic(
    problem: GroupProblem, sources: GroupSources, limit: float
) -> GroupAmplitudes:
    layers = problem.layers
    size2 = 2 * problem.size
    count = len(layers)
    total = 2 * size2 * count + size2
    matrix = np.zeros((total, total), dtype=complex)
    rhs = np.zeros(total, dtype=complex)

    def up_col(j: int) -> slice:
        return slice(2 * size2 * j, 2 * size2 * j + size2)

    def down_col(j: int) -> slice:
        return slice(2 * size2 * j + size2, 2 * size2 * (j + 1))

    op_e, op_c = problem.bottom_operator()
    bottom = np.hstack([op_e, op_c])
    first = layers[0]
    matrix[:size2, up_col(0)] = bottom @ first.up_waves()
    matrix[:size2, down_col(0)] = bottom @ first.down_waves() * first.down_phase()
    rhs[:size2] = _bottom_rhs(problem, sources)

    row = size2
    for j in range(count - 1):
        lower, upper = layers[j], layers[j + 1]
        rows = slice(row, row + 2 * size2)
        matrix[rows, up_col(j)] = lower.up_waves() * lower.up_phase()
        matrix[rows, down_col(j)] = lower.down_waves()
        matrix[rows, up_col(j + 1)] = -upper.up_waves()
        matrix[rows, down_col(j + 1)] = -upper.down_waves() * upper.down_phase()
        row += 2 * size2

    last = layers[-1]
    scattered_col = slice(total - size2, total)
    rows_e = slice(row, row + size2)
    rows_c = slice(row + size2, row + 2 * size2)
    matrix[rows_e, up_col(count - 1)] = last.up_e * last.up_phase()
    matrix[rows_e, down_col(count - 1)] = last.down_e
    matrix[rows_e, scattered_col] = -np.eye(size2)
    matrix[rows_c, up_col(count - 1)] = problem.lambda0 * last.up_c * last.up_phase()
    matrix[rows_c, down_col(count - 1)] = problem.lambda0 * last.down_c
    matrix[rows_c, scattered_col] = -problem.exterior_admittance
    rhs[row:] = _top_rhs(problem, sources)

    solution, condition = _checked_solve(matrix, rhs, limit, "monolithic system")
    ups = [solution[up_col(j)] for j in range(count)]
    downs = [solution[down_col(j)] for j in range(count)]
    return GroupAmplitudes(ups, downs, solution[scattered_col], condition)


def solve_group(
    problem: GroupProblem,
    sources: GroupSources,
    *,
    method: SolveMethod = SolveMethod.SMATRIX,
    singular_condition: float = SINGULAR_CONDITION,
) -> GroupAmplitudes:
    """Solves one group for its layer amplitudes and scattered field.

    Groups without sources are answered with zeros and no solve.

    Raises:
        SingularSystemError: If a linear system is too ill-conditioned.
    """
    if sources.is_zero():
        zero = np.zeros(2 * problem.size, dtype=complex)
        return GroupAmplitudes(
            [zero] * len(problem.layers), [zero] * len(problem.layers), zero, 1.0
        )
    if method is SolveMethod.MONOLITHIC:
        result = _solve_monolithic(problem, sources, singular_condition)
    else:
        result = _solve_smatrix(problem, sources, singular_condition)
    if result.condition > 1e8:
        _LOG.warning("solve: group condition number %.3e", result.condition)
    return result


def find_layer(layers: Sequence[LayerBasis], height: float) -> Optional[int]:
    for index, layer in enumerate(layers):
        if layer.bottom <= height <= layer.top:
            return index
    return None
