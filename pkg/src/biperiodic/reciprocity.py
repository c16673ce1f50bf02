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
"""Numerical checks of the mixed reciprocity relations.

A plane-order solve at momentum α and a dipole solve at the conjugate
momentum −α are related through the Rayleigh coefficient of order −m of the
dipole's scattered field. Both sides are computed from separate solves that
share nothing but the configuration.

For a source inside a slab of constant k1² = k0² q:

    r·E(y0; m) = (8π² i / λ0) β̃_{−m} Ẽ_{−m}(y0)·p

For a source above the slab the left side takes the scattered field E^s and
the factor 1/λ0 is absent.
"""
from __future__ import annotations

from collections.abc import Iterable
from collections.abc import Sequence
import dataclasses
import itertools
import logging
import math
from typing import Optional

import numpy as np

from . import config as config_lib
from . import errors
from . import forward
from . import grating
from . import lattice

_LOG = logging.getLogger(__name__)

REL_ERROR_FLOOR = 1e-14

_SCALE = 8.0 * math.pi**2 * 1j


@dataclasses.dataclass(frozen=True, eq=False)
class ReciprocityReport:
    """Both sides of one reciprocity relation.

    Attributes:
        lhs: r·E(y0; m), from the plane-order solve.
        rhs: The dipole side.
        rel_error: |lhs − rhs| / max(|lhs|, |rhs|), or 0 when both sides are
            below the floor.
        config: The configuration of the plane-order solve.
        y0: The source point.
        r: The dipole moment.
        p: The polarization.
        m: The incident order.
        sweep: (N, rel_error) pairs of a truncation sweep, if one was run.
    """

    lhs: complex
    rhs: complex
    rel_error: float
    config: grating.GratingConfig
    y0: np.ndarray
    r: np.ndarray
    p: np.ndarray
    m: lattice.ModeIndex
    sweep: tuple[tuple[int, float], ...] = ()


def relative_error(
    lhs: complex, rhs: complex, *, floor: float = REL_ERROR_FLOOR
) -> float:
    scale = max(abs(lhs), abs(rhs))
    if scale <= floor:
        return 0.0
    return abs(lhs - rhs) / scale


def _vector(value: object) -> np.ndarray:
    return np.asarray(value, dtype=complex)


def reciprocity_table(
    config: grating.GratingConfig,
    material: grating.MaterialProfile,
    y0: np.ndarray,
    rs: Sequence[np.ndarray],
    ps: Sequence[np.ndarray],
    ms: Sequence[lattice.ModeIndex],
    *,
    include_lambda0: bool = True,
    numerics: Optional[config_lib.Numerics] = None,
    method: forward.SolveMethod = forward.SolveMethod.SMATRIX,
    workers: Optional[int] = None,
) -> list[ReciprocityReport]:
    """Checks reciprocity for every (r, p, m) combination.

    The region of y0 selects the relation: inside the slab the interior one
    (which needs a constant refractive index), above it the exterior one.
    One plane-order batch and one dipole batch are solved; every report is
    assembled from them.

    Args:
        include_lambda0: Apply the 1/λ0 factor of the interior relation.
            Turning it off gives a deliberately wrong right side.

    Returns:
        Reports in (r, p, m) order, m varying fastest.

    Raises:
        UnsupportedCombinationError: If y0 lies below the slab or the
            interior relation meets a non-constant material.
    """
    numerics = numerics or config_lib.Numerics()
    y0 = np.asarray(y0, dtype=float)
    height = float(y0[2])
    if not height > config.c:
        raise errors.UnsupportedCombinationError(
            f"source at x3={height} is not above c={config.c}"
        )
    interior = height < config.b
    ps = [_vector(p) for p in ps]
    rs = [_vector(r) for r in rs]
    ms = [(int(m[0]), int(m[1])) for m in ms]

    incidences = [lattice.PlaneOrder(m, p) for p in ps for m in ms]
    planes = forward.solve_batch(
        config, material, incidences, numerics=numerics, method=method, workers=workers
    )
    dipoles = forward.solve_batch(
        config.replace(momentum=config.momentum.conjugate()),
        material,
        [lattice.Dipole(y0, r) for r in rs],
        numerics=numerics,
        method=method,
        workers=workers,
    )
    part = "total" if interior else "scattered"
    fields = [plane.evaluate(y0, part=part) for plane in planes]
    factor = _SCALE / config.lambda0 if interior and include_lambda0 else _SCALE

    reports = []
    for (r_index, r), (p_index, p), (m_index, m) in itertools.product(
        enumerate(rs), enumerate(ps), enumerate(ms)
    ):
        lhs = complex(r @ fields[p_index * len(ms) + m_index])
        dipole = dipoles[r_index]
        opposite = (-m[0], -m[1])
        beta = dipole.modes.beta[dipole.modes.position(opposite)]
        coeff = dipole.scattered_up.coeffs[opposite]
        rhs = complex(factor * beta * (coeff @ p))
        error = relative_error(lhs, rhs, floor=numerics.rel_error_floor)
        reports.append(ReciprocityReport(lhs, rhs, error, config, y0, r, p, m))
    worst = max((report.rel_error for report in reports), default=0.0)
    _LOG.debug(
        "reciprocity: %d cases, %s source, worst rel_error %.3e",
        len(reports),
        "interior" if interior else "exterior",
        worst,
    )
    return reports


def _verify(
    config: grating.GratingConfig,
    material: grating.MaterialProfile,
    y0: np.ndarray,
    r: np.ndarray,
    p: np.ndarray,
    m: lattice.ModeIndex,
    truncations: Iterable[int],
    **kwargs: object,
) -> ReciprocityReport:
    (report,) = reciprocity_table(config, material, y0, [r], [p], [m], **kwargs)
    sweep = []
    for truncation in truncations:
        (entry,) = reciprocity_table(
            config.replace(truncation=truncation),
            material,
            y0,
            [r],
            [p],
            [m],
            **kwargs,
        )
        sweep.append((truncation, entry.rel_error))
    return dataclasses.replace(report, sweep=tuple(sweep))


def verify_interior(
    config: grating.GratingConfig,
    k1: complex,
    y0: np.ndarray,
    r: np.ndarray,
    p: np.ndarray,
    m: lattice.ModeIndex,
    *,
    include_lambda0: bool = True,
    truncations: Iterable[int] = (),
    numerics: Optional[config_lib.Numerics] = None,
    method: forward.SolveMethod = forward.SolveMethod.SMATRIX,
    workers: Optional[int] = None,
) -> ReciprocityReport:
    """Checks the relation for a source inside a slab of wavenumber k1.

    Args:
        k1: The slab wavenumber; the slab holds q = k1²/k0².
        truncations: Repeat the check at each of these truncations and
            record the errors in the report's sweep.

    Raises:
        UnsupportedCombinationError: If y0 is not strictly inside the slab.
    """
    height = float(np.asarray(y0)[2])
    if not config.c < height < config.b:
        raise errors.UnsupportedCombinationError(
            f"interior source at x3={height} is not inside ({config.c}, {config.b})"
        )
    q = complex(k1) ** 2 / config.k0**2
    material = grating.Stack.uniform(q, config.c, config.b)
    return _verify(
        config,
        material,
        y0,
        r,
        p,
        m,
        truncations,
        include_lambda0=include_lambda0,
        numerics=numerics,
        method=method,
        workers=workers,
    )


def verify_exterior(
    config: grating.GratingConfig,
    material: grating.MaterialProfile,
    y0: np.ndarray,
    r: np.ndarray,
    p: np.ndarray,
    m: lattice.ModeIndex,
    *,
    truncations: Iterable[int] = (),
    numerics: Optional[config_lib.Numerics] = None,
    method: forward.SolveMethod = forward.SolveMethod.SMATRIX,
    workers: Optional[int] = None,
) -> ReciprocityReport:
    """Checks the relation for a source between the slab and x3 = h.

    Raises:
        UnsupportedCombinationError: If y0 is not strictly between b and h.
    """
    height = float(np.asarray(y0)[2])
    if not config.b < height < config.h:
        raise errors.UnsupportedCombinationError(
            f"exterior source at x3={height} is not inside ({config.b}, {config.h})"
        )
    return _verify(
        config,
        material,
        y0,
        r,
        p,
        m,
        truncations,
        numerics=numerics,
        method=method,
        workers=workers,
    )
