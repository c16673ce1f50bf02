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
"""Inverse problems driven by near-field data.

Data are tangential traces e3×E^s on a plane x3 = h above the slab, one per
incident plane order m and polarization e_l. The solvers fit forward models
to such data by projected Gauss–Newton iteration with finite-difference
Jacobians. Two diagnostics accompany them: the volume orthogonality
residual of two refractive indices, and a source indicator that grows as a
dipole approaches the bottom boundary.
"""
from __future__ import annotations

from collections.abc import Callable
from collections.abc import Iterable
from collections.abc import Mapping
from collections.abc import Sequence
import dataclasses
import itertools
import logging
import math
from typing import Any
from typing import Optional
from typing import Union

import numpy as np
from typing_extensions import TypeAlias

from . import config as config_lib
from . import errors
from . import forward
from . import grating
from . import greens
from . import lattice
from . import layers as layers_lib

_LOG = logging.getLogger(__name__)

EntryKey: TypeAlias = tuple[lattice.ModeIndex, int]

PROJECTION_LOOP_LIMIT = 3
QUADRATURE_POINTS = (16, 32, 64, 128, 256)
INDICATOR_TAIL_ORDERS = 1024
INDICATOR_TAIL_CHUNK = 16
INDICATOR_TAIL_TOLERANCE = 1e-8
IMPEDANCE_SCAN_FACTORS = (0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
IMPEDANCE_SCAN_STARTS = 3
_LINE_SEARCH_HALVINGS = 30
_STATIONARY = 1e-10

_UNIT = {1: (1.0, 0.0, 0.0), 2: (0.0, 1.0, 0.0), 3: (0.0, 0.0, 1.0)}


@dataclasses.dataclass(frozen=True, eq=False)
class NearFieldDataset:
    """Scattered-field traces on x3 = h, keyed by (order m, polarization l).

    Polarization l in 1..3 stands for the unit vector e_l.
    """

    h: float
    momentum: lattice.QuasiMomentum
    truncation: int
    entries: Mapping[EntryKey, lattice.TangentialTrace]
    noise_level: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        for key, trace in self.entries.items():
            if trace.height != self.h or trace.momentum != self.momentum:
                raise ValueError(f"entry {key} does not live on the dataset's plane")

    def keys(self) -> list[EntryKey]:
        return sorted(self.entries)


@dataclasses.dataclass(frozen=True, eq=False)
class InversionResult:
    """The outcome of a Gauss–Newton inversion.

    Attributes:
        names: Names of the real parameters.
        estimate: The final parameter vector.
        residual_history: The objective √(‖r‖² + τ‖θ − θ_prior‖²) at the
            start and after every accepted step.
        condition_history: Condition numbers of the augmented Jacobians.
        converged: Whether a stopping criterion was met.
        tikhonov: The regularization weight τ.
        steps: Accepted steps.
        misfit: The data residual ‖r‖ at the estimate.
    """

    names: tuple[str, ...]
    estimate: np.ndarray
    residual_history: tuple[float, ...]
    condition_history: tuple[float, ...]
    converged: bool
    tikhonov: float
    steps: int
    misfit: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "estimate": {
                name: float(value) for name, value in zip(self.names, self.estimate)
            },
            "residual_history": list(self.residual_history),
            "condition_history": list(self.condition_history),
            "converged": self.converged,
            "tikhonov": self.tikhonov,
            "steps": self.steps,
            "misfit": self.misfit,
        }


def _misfit_factors(
    momentum: lattice.QuasiMomentum, modes: Sequence[lattice.ModeIndex]
) -> np.ndarray:
    """Lower Cholesky factors of the modal H^{-1/2}(div) weights."""
    alpha = np.array([lattice.alpha_n(momentum, n) for n in modes]).reshape(-1, 2)
    weight = (1.0 + np.einsum("ij,ij->i", alpha, alpha)) ** -0.5
    gram = np.eye(2)[None, :, :] + np.einsum("mi,mj->mij", alpha, alpha)
    return np.linalg.cholesky(gram * weight[:, None, None])


def _weighted(
    trace: Optional[lattice.TangentialTrace],
    modes: Sequence[lattice.ModeIndex],
    factors: np.ndarray,
) -> np.ndarray:
    values = np.zeros((len(modes), 2), dtype=complex)
    if trace is not None:
        for index, n in enumerate(modes):
            coeff = trace.coeffs.get(n)
            if coeff is not None:
                values[index] = coeff[:2]
    return np.einsum("mji,mj->mi", factors, values).ravel()


def _trace_modes(traces: Iterable[lattice.TangentialTrace]) -> list[lattice.ModeIndex]:
    modes: set[lattice.ModeIndex] = set()
    for trace in traces:
        modes.update(trace.coeffs)
    return sorted(modes)


def dataset_distance(first: NearFieldDataset, second: NearFieldDataset) -> float:
    """The stacked modal H^{-1/2}(div) distance between two datasets.

    Raises:
        ValueError: If the datasets hold different entries or planes.
    """
    if first.keys() != second.keys():
        raise ValueError("datasets hold different (order, polarization) entries")
    if (first.h, first.momentum) != (second.h, second.momentum):
        raise ValueError("datasets live on different planes or momenta")
    keys = first.keys()
    modes = _trace_modes(
        itertools.chain(first.entries.values(), second.entries.values())
    )
    factors = _misfit_factors(first.momentum, modes)
    squares = []
    for key in keys:
        difference = _weighted(first.entries[key], modes, factors) - _weighted(
            second.entries[key], modes, factors
        )
        squares.append(float(np.vdot(difference, difference).real))
    return math.sqrt(math.fsum(squares))


def dataset_norm(data: NearFieldDataset) -> float:
    """The stacked modal H^{-1/2}(div) norm of a dataset."""
    modes = _trace_modes(data.entries.values())
    factors = _misfit_factors(data.momentum, modes)
    squares = []
    for key in data.keys():
        vector = _weighted(data.entries[key], modes, factors)
        squares.append(float(np.vdot(vector, vector).real))
    return math.sqrt(math.fsum(squares))


def _incidences(keys: Sequence[EntryKey]) -> list[lattice.PlaneOrder]:
    return [lattice.PlaneOrder(m, np.array(_UNIT[l])) for m, l in keys]


def synthesize_data(
    config: grating.GratingConfig,
    material: grating.MaterialProfile,
    orders: Iterable[lattice.ModeIndex],
    polarizations: Iterable[int],
    noise_level: float,
    seed: Optional[int],
    *,
    h: Optional[float] = None,
    numerics: Optional[config_lib.Numerics] = None,
    method: forward.SolveMethod = forward.SolveMethod.SMATRIX,
    workers: Optional[int] = None,
) -> NearFieldDataset:
    """Computes the scattered traces for a family of plane orders.

    Each entry gets independent complex Gaussian noise whose expected norm
    is noise_level times the entry's norm. All randomness comes from
    numpy.random.default_rng(seed), drawn in (m, l) order.

    Args:
        h: The measurement height; config.h by default.

    Raises:
        ValueError: If noise_level is negative or a polarization is not in
            1..3.
    """
    if noise_level < 0:
        raise ValueError(f"noise level must be nonnegative, got {noise_level}")
    h = config.h if h is None else h
    orders = sorted({(int(m[0]), int(m[1])) for m in orders})
    polarizations = sorted(set(polarizations))
    for l in polarizations:
        if l not in _UNIT:
            raise ValueError(f"polarization index must be 1, 2 or 3, got {l}")
    keys = [(m, l) for m in orders for l in polarizations]
    entries: dict[EntryKey, lattice.TangentialTrace] = {}
    if keys:
        solutions = forward.solve_batch(
            config,
            material,
            _incidences(keys),
            numerics=numerics,
            method=method,
            workers=workers,
        )
        rng = np.random.default_rng(seed)
        for key, solution in zip(keys, solutions):
            trace = forward.near_field_trace(solution, h, part="scattered")
            if noise_level > 0:
                trace = _add_noise(trace, noise_level, rng)
            entries[key] = trace
    _LOG.debug("synthesize: %d entries at h=%s, noise %s", len(entries), h, noise_level)
    return NearFieldDataset(
        h, config.momentum, config.truncation, entries, noise_level, seed
    )


def _add_noise(
    trace: lattice.TangentialTrace, level: float, rng: np.random.Generator
) -> lattice.TangentialTrace:
    modes = sorted(trace.coeffs)
    values = np.array([trace.coeffs[n][:2] for n in modes])
    draw = rng.standard_normal(values.shape) + 1j * rng.standard_normal(values.shape)
    draw /= math.sqrt(2.0)
    noise = level * np.linalg.norm(values) * draw / math.sqrt(values.size)
    return lattice.TangentialTrace(
        trace.momentum,
        trace.height,
        {n: np.append(values[i] + noise[i], 0.0) for i, n in enumerate(modes)},
    )


class _Misfit:
    """Maps a forward model to the stacked real residual against a dataset."""

    def __init__(self, data: NearFieldDataset) -> None:
        self.data = data
        self.keys = data.keys()
        self.modes = _trace_modes(data.entries.values())
        self.factors = _misfit_factors(data.momentum, self.modes)
        self.target = np.concatenate(
            [
                _weighted(data.entries[key], self.modes, self.factors)
                for key in self.keys
            ]
            or [np.zeros(0, dtype=complex)]
        )
        self.incidences = _incidences(self.keys)

    def __call__(
        self,
        config: grating.GratingConfig,
        material: grating.MaterialProfile,
        numerics: config_lib.Numerics,
        method: forward.SolveMethod,
        workers: Optional[int],
    ) -> np.ndarray:
        if not self.keys:
            return np.zeros(0)
        solutions = forward.solve_batch(
            config,
            material,
            self.incidences,
            numerics=numerics,
            method=method,
            workers=workers,
        )
        model = np.concatenate(
            [
                _weighted(
                    forward.near_field_trace(solution, self.data.h, part="scattered"),
                    self.modes,
                    self.factors,
                )
                for solution in solutions
            ]
        )
        difference = model - self.target
        return np.concatenate([difference.real, difference.imag])

    def scale(self) -> float:
        return max(float(np.linalg.norm(self.target)), 1.0)


def _check_dataset(data: NearFieldDataset, config: grating.GratingConfig) -> None:
    if data.momentum != config.momentum:
        raise ValueError(
            f"dataset momentum {data.momentum} differs from {config.momentum}"
        )
    if not data.h > config.b:
        raise errors.HeightBelowInterfaceError(
            f"data height {data.h} is not above b={config.b}"
        )


def _admissible(project: Callable[[np.ndarray], np.ndarray], theta: np.ndarray) -> bool:
    return bool(np.array_equal(project(theta.copy()), theta))


def _jacobian(
    residual: Callable[[np.ndarray], np.ndarray],
    project: Callable[[np.ndarray], np.ndarray],
    theta: np.ndarray,
    r: np.ndarray,
    jacobian_step: float,
) -> np.ndarray:
    """Finite differences of the residual that never leave the admissible set.

    A column is a central difference when both neighbors are admissible, a
    one-sided one when only one is, and zero when neither is.
    """
    jacobian = np.zeros((len(r), len(theta)))
    for j in range(len(theta)):
        step = jacobian_step * max(abs(theta[j]), 1.0)
        ahead = theta.copy()
        ahead[j] += step
        behind = theta.copy()
        behind[j] -= step
        has_ahead = _admissible(project, ahead)
        has_behind = _admissible(project, behind)
        if has_ahead and has_behind:
            jacobian[:, j] = (residual(ahead) - residual(behind)) / (2.0 * step)
        elif has_ahead:
            jacobian[:, j] = (residual(ahead) - r) / step
        elif has_behind:
            jacobian[:, j] = (r - residual(behind)) / step
        else:
            _LOG.debug("invert: no admissible difference for parameter %d", j)
    return jacobian


def gauss_newton(
    residual: Callable[[np.ndarray], np.ndarray],
    init: np.ndarray,
    names: Sequence[str],
    *,
    project: Callable[[np.ndarray], np.ndarray] = lambda theta: theta,
    tikhonov: float = 0.0,
    prior: Optional[np.ndarray] = None,
    jacobian_step: float = 1e-5,
    max_iterations: int = 50,
    absolute_tolerance: float = 1e-12,
) -> InversionResult:
    """Minimizes ‖r(θ)‖² + τ‖θ − θ_prior‖² by projected Gauss–Newton.

    The Jacobian is a finite difference with step jacobian_step·max(|θ_j|,
    1), one-sided next to the boundary of the admissible set. Each step
    solves the augmented least-squares system and is halved until the
    objective decreases; trial points are projected onto the admissible set.
    A step that no halving makes acceptable ends the iteration, converged
    only if the linearized model predicted no real decrease either.

    Raises:
        NonConvergenceError: After max_iterations iterations, or when the line
            search fails away from a stationary point; the partial result is
            attached.
        DegenerateJacobianError: If the Jacobian loses rank and τ = 0.
        ConstraintProjectionLoopError: If PROJECTION_LOOP_LIMIT consecutive
            iterations only reach projected points without decrease.
    """
    theta = project(np.asarray(init, dtype=float).copy())
    prior = theta.copy() if prior is None else np.asarray(prior, dtype=float)
    root = math.sqrt(tikhonov)

    def objective(values: np.ndarray, r: np.ndarray) -> float:
        penalty = values - prior
        return float(r @ r) + tikhonov * float(penalty @ penalty)

    r = residual(theta)
    cost = objective(theta, r)
    history = [math.sqrt(cost)]
    conditions: list[float] = []
    steps = 0
    projected_stalls = 0

    def result(converged: bool) -> InversionResult:
        return InversionResult(
            tuple(names),
            theta.copy(),
            tuple(history),
            tuple(conditions),
            converged,
            tikhonov,
            steps,
            float(np.linalg.norm(r)),
        )

    for iteration in range(max_iterations):
        _LOG.info("invert: iteration %d residual %.3e", iteration, history[-1])
        if float(np.linalg.norm(r)) <= absolute_tolerance:
            return result(True)
        jacobian = _jacobian(residual, project, theta, r, jacobian_step)
        matrix = np.vstack([jacobian, root * np.eye(len(theta))])
        rhs = np.concatenate([-r, -root * (theta - prior)])
        delta, _, rank, singular = np.linalg.lstsq(matrix, rhs, rcond=None)
        if rank < len(theta):
            if tikhonov == 0.0:
                raise errors.DegenerateJacobianError(
                    f"Jacobian has rank {rank} < {len(theta)} parameters"
                )
            conditions.append(float("inf"))
        else:
            conditions.append(float(singular[0] / singular[-1]))

        accepted = False
        all_projected = True
        size = 1.0
        for _ in range(_LINE_SEARCH_HALVINGS):
            raw = theta + size * delta
            trial = project(raw.copy())
            all_projected = all_projected and not np.array_equal(trial, raw)
            trial_r = residual(trial)
            trial_cost = objective(trial, trial_r)
            if trial_cost < cost:
                accepted = True
                break
            size /= 2.0
        if not accepted:
            if all_projected:
                projected_stalls += 1
                if projected_stalls >= PROJECTION_LOOP_LIMIT:
                    raise errors.ConstraintProjectionLoopError(
                        f"{projected_stalls} projected steps without decrease"
                    )
                continue
            predicted = cost - objective(theta + delta, r + jacobian @ delta)
            reach = float(np.linalg.norm(delta)) / (1.0 + float(np.linalg.norm(theta)))
            if predicted <= _STATIONARY * cost or reach <= 1e-10:
                return result(True)
            raise errors.NonConvergenceError(
                f"line search failed with predicted decrease {predicted:.3e}",
                result=result(False),
            )
        projected_stalls = 0
        moved = float(np.linalg.norm(trial - theta))
        decrease = cost - trial_cost
        theta, r, cost = trial, trial_r, trial_cost
        steps += 1
        history.append(math.sqrt(cost))
        stalled = moved <= 1e-10 * (1.0 + float(np.linalg.norm(theta)))
        if decrease <= 1e-14 * cost or stalled:
            return result(True)
    raise errors.NonConvergenceError(
        f"no convergence after {max_iterations} iterations", result=result(False)
    )


def _depth_scan(
    c0: float, rho0: float, b: float, k: complex
) -> list[tuple[float, float]]:
    """Candidate (c, ρ) starts around an initial guess.

    Depths cover [c0 − (b − c0), b) at a quarter of the standing-wave period
    π/Re k; impedances are ρ0 scaled by IMPEDANCE_SCAN_FACTORS.
    """
    thickness = b - c0
    low, high = c0 - thickness, b - 0.05 * thickness
    spacing = math.pi / (4.0 * max(complex(k).real, 1e-12))
    count = max(2, math.ceil((high - low) / spacing) + 1)
    depths = np.linspace(low, high, count)
    return [
        (float(c), rho0 * factor)
        for c in depths
        for factor in IMPEDANCE_SCAN_FACTORS
    ]


def _scan_cost(model: Callable[[np.ndarray], np.ndarray], theta: np.ndarray) -> float:
    try:
        return float(np.sum(model(theta) ** 2))
    except errors.SolverError as exc:
        _LOG.debug("invert: scan point %s skipped: %s", theta, exc)
        return math.inf


def invert_impedance_depth(
    data: NearFieldDataset,
    config: grating.GratingConfig,
    q: complex,
    init: tuple[float, float],
    *,
    scan: bool = True,
    numerics: Optional[config_lib.Numerics] = None,
    method: forward.SolveMethod = forward.SolveMethod.SMATRIX,
    workers: Optional[int] = None,
) -> InversionResult:
    """Recovers the depth c and impedance ρ of a flat impedance bottom.

    The misfit oscillates in c with the slab's standing waves and flattens
    as ρ grows, so a single descent from the initial guess can settle in the
    wrong valley. Gauss–Newton therefore also starts from the
    IMPEDANCE_SCAN_STARTS best points of a coarse (c, ρ) scan, and the run
    with the smallest misfit wins; ties go to the initial guess.

    Args:
        data: Measured traces.
        config: The known geometry; its c and boundary are ignored.
        q: The known constant refractive index of the slab.
        init: The initial guess (c0, ρ0).
        scan: Descend from the initial guess only when false.

    Returns:
        A result with parameters ("c", "rho").

    Raises:
        ConstraintError: If c0 >= b or ρ0 <= 0.
        InversionError: If every descent fails; the first failure is
            re-raised, which may also be a SolverError.
    """
    numerics = numerics or config_lib.Numerics()
    _check_dataset(data, config)
    c0, rho0 = init
    violations = []
    if not c0 < config.b:
        violations.append(f"init.c: {c0} is not below b={config.b}")
    if not rho0 > 0:
        violations.append(f"init.rho: {rho0} is not positive")
    if violations:
        raise errors.ConstraintError(violations)
    misfit = _Misfit(data)
    margin = 1e-6 * max(1.0, config.b - c0)

    def model(theta: np.ndarray) -> np.ndarray:
        c, rho = float(theta[0]), float(theta[1])
        trial = config.replace(c=c, boundary=grating.Boundary.impedance(rho))
        material = grating.Stack.uniform(q, c, config.b)
        return misfit(trial, material, numerics, method, workers)

    def project(theta: np.ndarray) -> np.ndarray:
        theta[0] = min(theta[0], config.b - margin)
        theta[1] = max(theta[1], 1e-8)
        return theta

    starts = [np.array([c0, rho0], dtype=float)]
    if scan:
        k = config.k0 * np.sqrt(complex(q))
        candidates = [
            project(np.array(point)) for point in _depth_scan(c0, rho0, config.b, k)
        ]
        costs = [_scan_cost(model, point) for point in candidates]
        best = np.argsort(costs, kind="stable")[:IMPEDANCE_SCAN_STARTS]
        starts.extend(candidates[index] for index in best)
        _LOG.info(
            "invert: scanned %d (c, rho) points, best misfit %.3e",
            len(candidates),
            math.sqrt(costs[best[0]]),
        )

    results: list[InversionResult] = []
    first_error: Optional[errors.Error] = None
    for start in starts:
        try:
            results.append(
                gauss_newton(
                    model,
                    start,
                    ("c", "rho"),
                    project=project,
                    jacobian_step=numerics.jacobian_step,
                    max_iterations=numerics.max_iterations,
                    absolute_tolerance=1e-12 * misfit.scale(),
                )
            )
        except (errors.InversionError, errors.SolverError) as exc:
            _LOG.info("invert: descent from %s failed: %s", start, exc)
            first_error = first_error or exc
    if not results:
        assert first_error is not None
        raise first_error
    return min(results, key=lambda result: result.misfit)


class Parametrization:
    """Maps real parameter vectors to refractive-index profiles."""

    def names(self) -> tuple[str, ...]:
        raise NotImplementedError

    def to_material(
        self, theta: np.ndarray, c: float, b: float
    ) -> grating.MaterialProfile:
        raise NotImplementedError

    def from_values(self, values: Any) -> np.ndarray:
        raise NotImplementedError

    def project(self, theta: np.ndarray, gamma: float) -> np.ndarray:
        raise NotImplementedError


def _split(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    return np.concatenate([values.real, values.imag])


def _join(theta: np.ndarray) -> np.ndarray:
    half = len(theta) // 2
    return theta[:half] + 1j * theta[half:]


@dataclasses.dataclass(frozen=True)
class StackParametrization(Parametrization):
    """q as equal-thickness layers; parameters are Re q_j then Im q_j."""

    layers: int

    def names(self) -> tuple[str, ...]:
        return tuple(f"re_q{j}" for j in range(self.layers)) + tuple(
            f"im_q{j}" for j in range(self.layers)
        )

    def to_material(self, theta: np.ndarray, c: float, b: float) -> grating.Stack:
        return grating.Stack.equal_layers(list(_join(theta)), c, b)

    def from_values(self, values: Union[complex, Sequence[complex]]) -> np.ndarray:
        values = np.broadcast_to(np.asarray(values, dtype=complex), (self.layers,))
        return _split(values)

    def project(self, theta: np.ndarray, gamma: float) -> np.ndarray:
        half = self.layers
        theta[:half] = np.maximum(theta[:half], gamma)
        theta[half:] = np.maximum(theta[half:], 0.0)
        return theta


@dataclasses.dataclass(frozen=True)
class FourierParametrization(Parametrization):
    """q(x_axis) by its coefficients at the given orders, which include 0.

    Parameters are Re q̂_j then Im q̂_j in the order of orders.
    """

    axis: int
    orders: tuple[int, ...]

    def __post_init__(self) -> None:
        if 0 not in self.orders:
            raise ValueError("a Fourier parametrization needs the order 0")

    def names(self) -> tuple[str, ...]:
        return tuple(f"re_q_{j}" for j in self.orders) + tuple(
            f"im_q_{j}" for j in self.orders
        )

    def to_material(self, theta: np.ndarray, c: float, b: float) -> grating.Fourier1D:
        return grating.Fourier1D(self.axis, dict(zip(self.orders, _join(theta))))

    def from_values(self, values: Union[complex, Mapping[int, complex]]) -> np.ndarray:
        if isinstance(values, Mapping):
            coeffs = [complex(values.get(j, 0.0)) for j in self.orders]
        else:
            coeffs = [complex(values) if j == 0 else 0j for j in self.orders]
        return _split(np.array(coeffs))

    def project(self, theta: np.ndarray, gamma: float) -> np.ndarray:
        profile = self.to_material(theta, 0.0, 1.0)
        grid = 2 * np.pi * np.arange(grating.PROFILE_SAMPLES) / grating.PROFILE_SAMPLES
        samples = profile.evaluate(grid)
        # the same grid and slack as Fourier1D.violations
        slack = 1e-12 * float(np.abs(samples).max())
        zero = self.orders.index(0)
        lowest = float(samples.real.min())
        if lowest < gamma - slack:
            theta[zero] += gamma - lowest
        lowest = float(samples.imag.min())
        if lowest < -slack:
            theta[len(self.orders) + zero] -= lowest
        return theta


def invert_refractive_profile(
    data: NearFieldDataset,
    config: grating.GratingConfig,
    parametrization: Parametrization,
    init: Any,
    *,
    tikhonov: Optional[float] = None,
    numerics: Optional[config_lib.Numerics] = None,
    method: forward.SolveMethod = forward.SolveMethod.SMATRIX,
    workers: Optional[int] = None,
) -> InversionResult:
    """Recovers the refractive index of the slab over a PEC bottom.

    Args:
        data: Measured traces.
        config: The known geometry, with a PEC boundary.
        parametrization: How q is described.
        init: The initial profile, in parametrization.from_values() form.
        tikhonov: The weight of the penalty toward init; numerics.tikhonov
            by default.

    Raises:
        UnsupportedCombinationError: If the boundary is not PEC.
    """
    numerics = numerics or config_lib.Numerics()
    _check_dataset(data, config)
    if config.boundary.kind is not grating.BoundaryKind.PEC:
        raise errors.UnsupportedCombinationError(
            "refractive-index inversion needs a PEC bottom"
        )
    tikhonov = numerics.tikhonov if tikhonov is None else tikhonov
    misfit = _Misfit(data)

    def model(theta: np.ndarray) -> np.ndarray:
        material = parametrization.to_material(theta, config.c, config.b)
        return misfit(config, material, numerics, method, workers)

    start = parametrization.from_values(init)
    return gauss_newton(
        model,
        start,
        parametrization.names(),
        project=lambda theta: parametrization.project(theta, numerics.gamma),
        tikhonov=tikhonov,
        prior=start,
        jacobian_step=numerics.jacobian_step,
        max_iterations=numerics.max_iterations,
        absolute_tolerance=1e-12 * misfit.scale(),
    )


def select_tikhonov_morozov(
    invert: Callable[[float], InversionResult],
    noise_norm: float,
    candidates: Sequence[float],
    *,
    safety: float = 1.0,
) -> tuple[float, InversionResult]:
    """Picks the largest weight whose misfit is within the noise level.

    Candidates are tried from the largest down; the first whose misfit is at
    most safety·noise_norm wins. If none qualifies, the smallest candidate
    is returned.

    Raises:
        ValueError: If there are no candidates.
    """
    if not candidates:
        raise ValueError("no Tikhonov candidates")
    ordered = sorted(candidates, reverse=True)
    result = None
    for weight in ordered:
        result = invert(weight)
        _LOG.debug("morozov: tikhonov %.3e misfit %.3e", weight, result.misfit)
        if result.misfit <= safety * noise_norm:
            return weight, result
    assert result is not None
    return ordered[-1], result


def _slab_breaks(
    first: grating.MaterialProfile,
    second: grating.MaterialProfile,
    c: float,
    b: float,
) -> list[float]:
    breaks = {c, b}
    for material in (first, second):
        if isinstance(material, grating.Stack):
            breaks.update(material.interfaces(c, b))
    return sorted(breaks)


def _fourier_difference(
    first: grating.Fourier1D, second: grating.Fourier1D
) -> grating.Fourier1D:
    orders = {j for j, _ in first.coefficients} | {j for j, _ in second.coefficients}
    return grating.Fourier1D(
        first.axis,
        {j: first.coefficient(j) - second.coefficient(j) for j in orders},
    )


def orthogonality_residual(
    q1: grating.MaterialProfile,
    q2: grating.MaterialProfile,
    config: grating.GratingConfig,
    incident1: lattice.IncidentSpec,
    incident2: lattice.IncidentSpec,
    *,
    numerics: Optional[config_lib.Numerics] = None,
    method: forward.SolveMethod = forward.SolveMethod.SMATRIX,
    workers: Optional[int] = None,
) -> complex:
    """∫ (q1 − q2) E1·conj(E2) over one cell of the slab.

    E1 solves the problem with q1 and E2 the problem with conj(q2), both
    over a PEC bottom at config's momentum. The transverse integral is exact
    by Parseval; the vertical one is Gauss–Legendre on every interval where
    both profiles are smooth, doubling the points until two estimates agree.

    Raises:
        UnsupportedCombinationError: If the profiles are of different kinds
            or vary along different axes.
        QuadratureNonconvergenceError: If 256 points per interval do not
            reach numerics.quadrature_tolerance.
    """
    numerics = numerics or config_lib.Numerics()
    if q1 == q2:
        return 0j
    if type(q1) is not type(q2) or (
        isinstance(q1, grating.Fourier1D)
        and isinstance(q2, grating.Fourier1D)
        and q1.axis != q2.axis
    ):
        raise errors.UnsupportedCombinationError(
            "orthogonality needs two stacks or two profiles along one axis"
        )
    config = config.replace(boundary=grating.Boundary.pec())
    first = forward.solve(
        config, q1, incident1, numerics=numerics, method=method, workers=workers
    )
    second = forward.solve(
        config,
        q2.conjugate(),
        incident2,
        numerics=numerics,
        method=method,
        allow_gain=True,
        workers=workers,
    )
    c, b = config.c, config.b
    if isinstance(q1, grating.Fourier1D) and isinstance(q2, grating.Fourier1D):
        difference = _fourier_difference(q1, q2)
        groups = layers_lib.mode_groups(difference, first.modes)
        coupling = [
            difference.toeplitz(first.modes.indices[group, difference.axis - 1])
            for group in groups
        ]

        def density(height: float) -> complex:
            e1, _ = first.modal_fields(height)
            e2, _ = second.modal_fields(height)
            total = 0j
            for group, matrix in zip(groups, coupling):
                total += complex(np.sum(np.conj(e2[group]) * (matrix @ e1[group])))
            return total

    else:
        assert isinstance(q1, grating.Stack) and isinstance(q2, grating.Stack)

        def density(height: float) -> complex:
            e1, _ = first.modal_fields(height)
            e2, _ = second.modal_fields(height)
            contrast = q1.value_at(height, c, b) - q2.value_at(height, c, b)
            return contrast * complex(np.sum(e1 * np.conj(e2)))

    breaks = _slab_breaks(q1, q2, c, b)
    scale = (2.0 * math.pi) ** 2
    previous: Optional[complex] = None
    for points in QUADRATURE_POINTS:
        nodes, weights = np.polynomial.legendre.leggauss(points)
        total = 0j
        for low, high in zip(breaks[:-1], breaks[1:]):
            half = 0.5 * (high - low)
            middle = 0.5 * (high + low)
            for node, weight in zip(nodes, weights):
                total += weight * half * density(middle + half * node)
        total *= scale
        if previous is not None:
            gap = abs(total - previous)
            limit = numerics.quadrature_tolerance * max(abs(total), numerics.eps_floor)
            if gap <= limit:
                _LOG.debug("orthogonality: converged with %d points", points)
                return total
        previous = total
    raise errors.QuadratureNonconvergenceError(
        f"volume quadrature did not reach {numerics.quadrature_tolerance} "
        f"with {QUADRATURE_POINTS[-1]} points per interval"
    )


def _ring_indices(first: int, last: int) -> np.ndarray:
    """The modes with first <= max(|n1|, |n2|) < last."""
    rings = []
    for order in range(first, last):
        span = np.arange(-order, order + 1)
        inner = span[1:-1]
        rings.extend(
            [
                np.column_stack([np.full_like(span, -order), span]),
                np.column_stack([np.full_like(span, order), span]),
                np.column_stack([inner, np.full_like(inner, -order)]),
                np.column_stack([inner, np.full_like(inner, order)]),
            ]
        )
    return np.concatenate(rings)


def _residual_tail(
    config: grating.GratingConfig,
    k_sq: complex,
    momentum: lattice.QuasiMomentum,
    source: lattice.Dipole,
    test_height: float,
    head: float,
) -> float:
    """The squared bottom residual carried by modes beyond the truncation.

    There the scattered field is the bottom's half-space reflection of the
    dipole's downgoing modes; the top interface only adds terms of order
    e^{-2|β_n|(b − c)}. Rings of modes are summed, INDICATOR_TAIL_CHUNK at a
    time, until a chunk adds less than INDICATOR_TAIL_TOLERANCE of the
    running total or INDICATOR_TAIL_ORDERS is reached.
    """
    rho = config.boundary.rho
    total = 0.0
    first = config.truncation + 1
    while first <= INDICATOR_TAIL_ORDERS:
        last = min(first + INDICATOR_TAIL_CHUNK, INDICATOR_TAIL_ORDERS + 1)
        alpha = _ring_indices(first, last) + momentum.as_array()
        beta = lattice.vertical_wavenumbers(k_sq, np.einsum("ij,ij->i", alpha, alpha))
        e, _ = greens.dipole_mode_coefficients(
            alpha, beta, k_sq, source.y0, source.r, config.c
        )
        trace = e[:, :2] * np.exp(1j * beta * (test_height - config.c))[:, None]
        if config.boundary.kind is grating.BoundaryKind.PEC:
            residual = trace
        else:
            assert rho is not None
            # e3×curl of an upgoing wave is −(i/β)(αα^T + β²) applied to E_T
            coupling = np.einsum("mi,mj->mij", alpha, alpha)
            coupling = coupling + (beta**2)[:, None, None] * np.eye(2)
            residual = np.einsum("mij,mj->mi", coupling, trace) / beta[:, None]
            residual -= rho * trace
        chunk = float(np.vdot(residual, residual).real)
        total += chunk
        if chunk <= INDICATOR_TAIL_TOLERANCE * (head + total):
            return total
        first = last
    _LOG.debug("indicator: modal tail cut at order %d", INDICATOR_TAIL_ORDERS)
    return total


def blowup_indicator(
    config: grating.GratingConfig,
    k1: complex,
    depths: Iterable[float],
    r: np.ndarray,
    *,
    position: tuple[float, float] = (0.0, 0.0),
    test_height: Optional[float] = None,
    momentum: Optional[lattice.QuasiMomentum] = None,
    numerics: Optional[config_lib.Numerics] = None,
    method: forward.SolveMethod = forward.SolveMethod.SMATRIX,
    workers: Optional[int] = None,
) -> list[tuple[float, float]]:
    """The bottom-condition residual of point dipoles' scattered fields.

    A dipole r at (position, z3) inside a slab of constant wavenumber k1 is
    solved at the conjugate momentum. Its scattered field must cancel the
    incident field's bottom residual, so the residual
    ‖e3×curl E^s − iρ E^s_T‖ (or ‖e3×E^s‖ over a PEC bottom) on the plane
    x3 = test_height grows without bound as z3 approaches c. The solved
    modes give the residual up to the truncation, raised if needed so that
    every order beyond it is evanescent in the slab; those orders, which
    carry the growth, come from the bottom reflection of each dipole mode.

    Args:
        test_height: The plane of the residual, with c <= test_height < z3;
            c by default.
        momentum: Solve at this momentum instead of the conjugate one.

    Returns:
        (z3, indicator) pairs sorted by z3.

    Raises:
        WrongHalfSpaceError: If test_height is below c.
        SourcePlaneError: If a dipole is not above test_height.
    """
    depths = sorted(float(z) for z in depths)
    if not depths:
        return []
    test_height = config.c if test_height is None else float(test_height)
    if test_height < config.c:
        raise errors.WrongHalfSpaceError(
            f"test plane {test_height} is below the bottom c={config.c}"
        )
    if depths[0] <= test_height:
        raise errors.SourcePlaneError(
            f"dipole at z3={depths[0]} is not above the test plane {test_height}"
        )
    k_sq = complex(k1) ** 2
    material = grating.Stack.uniform(k_sq / config.k0**2, config.c, config.b)
    momentum = momentum or config.momentum.conjugate()
    # every order outside the solve is evanescent in the slab
    reach = complex(k1).real + float(np.max(np.abs(momentum.as_array())))
    config = config.replace(truncation=max(config.truncation, math.ceil(reach)))
    sources = [
        lattice.Dipole(np.array([position[0], position[1], z]), r) for z in depths
    ]
    solutions = forward.solve_batch(
        config.replace(momentum=momentum),
        material,
        sources,
        numerics=numerics,
        method=method,
        workers=workers,
    )
    curve = []
    for source, solution in zip(sources, solutions):
        e, curl = solution.modal_fields(test_height, part="scattered")
        if config.boundary.kind is grating.BoundaryKind.PEC:
            residual = np.column_stack([-e[:, 1], e[:, 0]])
        else:
            assert config.boundary.rho is not None
            rotated = np.column_stack([-curl[:, 1], curl[:, 0]])
            residual = rotated - 1j * config.boundary.rho * e[:, :2]
        head = float(np.vdot(residual, residual).real)
        tail = _residual_tail(config, k_sq, momentum, source, test_height, head)
        z = float(source.y0[2])
        value = 2.0 * math.pi * math.sqrt(head + tail)
        _LOG.debug("indicator: z3=%s value %.6e, tail %.3e", z, value, tail)
        curve.append((z, value))
    return curve
