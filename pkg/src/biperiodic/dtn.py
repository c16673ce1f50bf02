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
"""The modal Dirichlet-to-Neumann map on a horizontal plane.

Above the structure the scattered field is an upward Rayleigh series, so on
each mode the tangential curl is a fixed linear function of the tangential
field. For the mode e^{i(α_n·x' + γ x3)} in a medium with squared wavenumber
κ², the divergence constraint gives E3 = −(α_n·E_T)/γ and then

    (curl E)_T = (i/γ) [[−a1 a2, −(κ² − a1²)], [κ² − a2², a1 a2]] E_T.

The map R takes the trace ν×E = e3×E = (−E2, E1, 0) to (curl E)_T.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import errors
from . import lattice


def curl_blocks(kappa_sq: complex, alpha: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Per-mode 2×2 blocks mapping E_T to (curl E)_T of an upward wave.

    Downward waves use the negated blocks.

    Args:
        kappa_sq: The squared wavenumber of the medium.
        alpha: (M, 2) transverse wavevectors.
        gamma: (M,) vertical wavenumbers of the upward waves.

    Returns:
        An (M, 2, 2) complex array.
    """
    a1 = alpha[:, 0]
    a2 = alpha[:, 1]
    blocks = np.empty((len(gamma), 2, 2), dtype=complex)
    blocks[:, 0, 0] = -a1 * a2
    blocks[:, 0, 1] = -(kappa_sq - a1 * a1)
    blocks[:, 1, 0] = kappa_sq - a2 * a2
    blocks[:, 1, 1] = a1 * a2
    return blocks * (1j / gamma)[:, None, None]


@dataclasses.dataclass(frozen=True)
class DtnOperator:
    """R on the plane x3 = height for the exterior wavenumber k."""

    k: float
    momentum: lattice.QuasiMomentum
    height: float
    truncation: int

    def blocks(self, *, wood_threshold: float = lattice.WOOD_THRESHOLD) -> np.ndarray:
        """The (M, 2, 2) blocks in lattice.mode_set() order.

        Raises:
            WoodAnomalyError: If a mode in the truncation is at a Wood anomaly.
        """
        modes = lattice.mode_set(
            self.momentum, self.truncation, self.k, wood_threshold=wood_threshold
        )
        return curl_blocks(self.k * self.k, modes.alpha, modes.beta)


def _check(op: DtnOperator, trace: lattice.TangentialTrace) -> lattice.ModeSet:
    if trace.momentum != op.momentum or trace.height != op.height:
        raise ValueError(
            f"trace on {trace.height} at {trace.momentum} does not match "
            f"operator on {op.height} at {op.momentum}"
        )
    modes = lattice.mode_set(op.momentum, op.truncation, op.k)
    for n in trace.coeffs:
        if max(abs(n[0]), abs(n[1])) > op.truncation:
            raise ValueError(f"trace mode {n} is outside truncation {op.truncation}")
    return modes


def dtn_apply(
    op: DtnOperator,
    trace: lattice.TangentialTrace,
    *,
    wood_threshold: float = lattice.WOOD_THRESHOLD,
) -> lattice.TangentialTrace:
    """Applies R to a trace of e3×E.

    Returns:
        The trace of (curl E)_T of the outgoing field with the given
        tangential field, on the same plane and modes.

    Raises:
        WoodAnomalyError: If a mode in the truncation is at a Wood anomaly.
        ValueError: If the trace does not live on the operator's plane.
    """
    modes = _check(op, trace)
    blocks = op.blocks(wood_threshold=wood_threshold)
    result = {}
    for n, coeff in trace.coeffs.items():
        tangential = np.array([coeff[1], -coeff[0]])
        curl = blocks[modes.position(n)] @ tangential
        result[n] = np.array([curl[0], curl[1], 0.0])
    return lattice.TangentialTrace(trace.momentum, trace.height, result)


def dtn_quadratic_form(
    op: DtnOperator,
    trace: lattice.TangentialTrace,
    *,
    wood_threshold: float = lattice.WOOD_THRESHOLD,
) -> complex:
    """(2π)² Σ_n R(t)_n · conj(t_n), the surface integral of R(t)·t̄."""
    image = dtn_apply(op, trace, wood_threshold=wood_threshold)
    real_parts = []
    imag_parts = []
    for n, coeff in trace.coeffs.items():
        value = complex(np.sum(image.coeffs[n] * np.conj(coeff)))
        real_parts.append(value.real)
        imag_parts.append(value.imag)
    scale = (2.0 * math.pi) ** 2
    return scale * complex(math.fsum(real_parts), math.fsum(imag_parts))
