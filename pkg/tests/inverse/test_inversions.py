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

import numpy as np
import pytest

from biperiodic import errors
from biperiodic import grating
from biperiodic import inverse
from biperiodic import lattice


def _impedance_setup(
    config: grating.GratingConfig,
) -> tuple[grating.GratingConfig, inverse.NearFieldDataset]:
    truth = config.replace(
        truncation=1, c=0.0, boundary=grating.Boundary.impedance(1.5)
    )
    material = grating.Stack.uniform(2.0, 0.0, truth.b)
    data = inverse.synthesize_data(truth, material, [(0, 0)], [1, 2], 0.0, 0)
    return truth, data


def test_impedance_depth(config: grating.GratingConfig) -> None:
    truth, data = _impedance_setup(config)
    result = inverse.invert_impedance_depth(data, truth, 2.0, (0.08, 1.3))
    assert result.names == ("c", "rho")
    assert result.converged
    np.testing.assert_allclose(result.estimate, [0.0, 1.5], atol=1e-5)
    assert result.residual_history[-1] < 1e-6 * result.residual_history[0]


def test_impedance_depth_rejects_bad_start(config: grating.GratingConfig) -> None:
    truth, data = _impedance_setup(config)
    with pytest.raises(errors.ConstraintError) as info:
        inverse.invert_impedance_depth(data, truth, 2.0, (1.5, -1.0))
    assert len(info.value.violations) == 2


def test_stack_profile(config: grating.GratingConfig) -> None:
    config = config.replace(truncation=1)
    truth = grating.Stack.uniform(2.0 + 0.1j, config.c, config.b)
    data = inverse.synthesize_data(config, truth, [(0, 0)], [1, 2], 0.0, 0)
    parametrization = inverse.StackParametrization(1)
    result = inverse.invert_refractive_profile(
        data, config, parametrization, 1.8 + 0.05j, tikhonov=0.0
    )
    assert result.names == ("re_q0", "im_q0")
    np.testing.assert_allclose(result.estimate, [2.0, 0.1], atol=1e-6)


def test_profile_needs_pec(config: grating.GratingConfig) -> None:
    config = config.replace(truncation=1, boundary=grating.Boundary.impedance(1.0))
    truth = grating.Stack.uniform(2.0, config.c, config.b)
    data = inverse.synthesize_data(config, truth, [(0, 0)], [1], 0.0, 0)
    with pytest.raises(errors.UnsupportedCombinationError):
        inverse.invert_refractive_profile(
            data, config, inverse.StackParametrization(1), 2.0
        )


def test_parametrizations() -> None:
    stack = inverse.StackParametrization(2)
    theta = stack.from_values([2.0 + 0.1j, 3.0])
    np.testing.assert_allclose(theta, [2.0, 3.0, 0.1, 0.0])
    assert stack.to_material(theta, 0.0, 1.0).layers[0].q == 2.0 + 0.1j
    projected = stack.project(np.array([-1.0, 2.0, -0.5, 0.2]), 1e-3)
    np.testing.assert_allclose(projected, [1e-3, 2.0, 0.0, 0.2])

    fourier = inverse.FourierParametrization(1, (-1, 0, 1))
    theta = fourier.from_values({0: 2.0, 1: 0.5})
    profile = fourier.to_material(theta, 0.0, 1.0)
    assert profile.coefficient(1) == 0.5
    projected = fourier.to_material(
        fourier.project(fourier.from_values({0: 0.2, 1: 0.5, -1: 0.5}), 1e-3),
        0.0,
        1.0,
    )
    assert not projected.violations(0.0, 1.0, gamma=1e-3 - 1e-9)
    with pytest.raises(ValueError):
        inverse.FourierParametrization(1, (1, 2))


def test_morozov_picks_largest_admissible() -> None:
    def fake(weight: float) -> inverse.InversionResult:
        return inverse.InversionResult(
            ("x",), np.array([weight]), (1.0,), (), True, weight, 0, weight
        )

    weight, result = inverse.select_tikhonov_morozov(fake, 0.05, [1.0, 0.1, 0.01])
    assert weight == 0.01
    assert result.tikhonov == 0.01
    weight, _ = inverse.select_tikhonov_morozov(fake, 0.5, [1.0, 0.1, 0.01])
    assert weight == 0.1
    weight, _ = inverse.select_tikhonov_morozov(fake, 1e-6, [1.0, 0.1])
    assert weight == 0.1
    with pytest.raises(ValueError):
        inverse.select_tikhonov_morozov(fake, 1.0, [])


def test_orthogonality_of_equal_profiles(config: grating.GratingConfig) -> None:
    stack = grating.Stack.uniform(2.0, config.c, config.b)
    wave = lattice.PlaneOrder((0, 0), np.array([1.0, 0.0, 0.0]))
    assert inverse.orthogonality_residual(stack, stack, config, wave, wave) == 0j


def test_orthogonality_of_mixed_kinds(config: grating.GratingConfig) -> None:
    incident = lattice.PlaneOrder((0, 0), np.array([1.0, 0.0, 0.0]))
    with pytest.raises(errors.UnsupportedCombinationError):
        inverse.orthogonality_residual(
            grating.Stack.uniform(2.0, config.c, config.b),
            grating.Fourier1D(1, {0: 2.0, 1: 0.3}),
            config,
            incident,
            incident,
        )
    with pytest.raises(errors.UnsupportedCombinationError):
        inverse.orthogonality_residual(
            grating.Fourier1D(1, {0: 2.0, 1: 0.3}),
            grating.Fourier1D(2, {0: 2.0, 1: 0.3}),
            config,
            incident,
            incident,
        )


def test_orthogonality_of_two_stacks(config: grating.GratingConfig) -> None:
    config = config.replace(truncation=1)
    first = grating.Stack.uniform(2.0 + 0.1j, config.c, config.b)
    second = grating.Stack.equal_layers([2.0, 2.5], config.c, config.b)
    incident1 = lattice.PlaneOrder((0, 0), np.array([1.0, 0.0, 0.0]))
    incident2 = lattice.PlaneOrder((0, 0), np.array([0.0, 1.0, 0.0]))
    value = inverse.orthogonality_residual(first, second, config, incident1, incident2)
    assert np.isfinite(value)
    assert value != 0j


def test_blowup_indicator_grows_toward_the_bottom(
    config: grating.GratingConfig,
) -> None:
    config = config.replace(truncation=3)
    curve = inverse.blowup_indicator(
        config,
        config.k0 * np.sqrt(2.0),
        [0.5, 0.2, 0.05],
        np.array([1.0, 0.0, 0.0]),
    )
    assert [z for z, _ in curve] == [0.05, 0.2, 0.5]
    values = [value for _, value in curve]
    assert values[0] > values[1] > values[2] > 0.0
    assert inverse.blowup_indicator(config, 3.0, [], np.ones(3)) == []


ORDERS_1 = [(m1, m2) for m1 in (-1, 0, 1) for m2 in (-1, 0, 1)]


def _distant_start_data(
    config: grating.GratingConfig, noise_level: float, seed: int, truncation: int = 2
) -> tuple[grating.GratingConfig, inverse.NearFieldDataset]:
    truth = config.replace(
        truncation=truncation, c=0.0, boundary=grating.Boundary.impedance(0.8)
    )
    material = grating.Stack.uniform(2.0, 0.0, truth.b)
    data = inverse.synthesize_data(
        truth, material, ORDERS_1, [1, 2, 3], noise_level, seed
    )
    return truth, data


def test_impedance_depth_from_a_distant_start(config: grating.GratingConfig) -> None:
    truth, data = _distant_start_data(config, 0.0, 0)
    result = inverse.invert_impedance_depth(data, truth, 2.0, (-0.3, 2.0))
    assert result.converged
    np.testing.assert_allclose(result.estimate, [0.0, 0.8], atol=1e-3 * 0.8)
    assert result.misfit <= 1e-8 * inverse.dataset_norm(data)


def test_impedance_depth_from_the_truth(config: grating.GratingConfig) -> None:
    truth, data = _impedance_setup(config)
    result = inverse.invert_impedance_depth(data, truth, 2.0, (0.0, 1.5))
    assert result.converged
    assert result.steps == 0
    np.testing.assert_array_equal(result.estimate, [0.0, 1.5])


def test_impedance_depth_under_noise(config: grating.GratingConfig) -> None:
    errors_c = []
    errors_rho = []
    for seed in range(20):
        truth, data = _distant_start_data(config, 0.01, seed, truncation=1)
        result = inverse.invert_impedance_depth(
            data, truth, 2.0, (-0.05, 0.9), scan=False
        )
        errors_c.append(abs(result.estimate[0]))
        errors_rho.append(abs(result.estimate[1] - 0.8) / 0.8)
    assert np.median(errors_c) <= 0.02
    assert np.median(errors_rho) <= 0.02


@pytest.mark.parametrize("truth_q", [2.0 + 0.1j, 2.0 + 0j])
def test_stack_profile_from_a_real_start(
    config: grating.GratingConfig, truth_q: complex
) -> None:
    config = config.replace(truncation=1)
    truth = grating.Stack.uniform(truth_q, config.c, config.b)
    data = inverse.synthesize_data(
        config, truth, [(0, 0), (1, 0), (0, 1)], [1, 2, 3], 0.0, 0
    )
    result = inverse.invert_refractive_profile(
        data, config, inverse.StackParametrization(1), 1.5, tikhonov=0.0
    )
    assert result.converged
    estimate = complex(result.estimate[0], result.estimate[1])
    assert abs(estimate - truth_q) <= 1e-4 * abs(truth_q)


def test_three_layer_profile(config: grating.GratingConfig) -> None:
    config = config.replace(truncation=2)
    values = [2.0 + 0.1j, 3.0, 1.5 + 0.05j]
    truth = grating.Stack.equal_layers(values, config.c, config.b)
    orders = [(m1, m2) for m1 in range(-2, 3) for m2 in range(-2, 3)]
    data = inverse.synthesize_data(config, truth, orders, [1, 2], 0.0, 0)
    result = inverse.invert_refractive_profile(
        data, config, inverse.StackParametrization(3), 2.0
    )
    estimate = result.estimate[:3] + 1j * result.estimate[3:]
    for value, expected in zip(estimate, values):
        assert abs(value - expected) <= 0.01 * abs(expected)


def test_fourier_profile(config: grating.GratingConfig) -> None:
    config = config.replace(truncation=2)
    truth = grating.Fourier1D(1, {0: 2.0 + 0.1j, 1: 0.2, -1: 0.2})
    data = inverse.synthesize_data(config, truth, ORDERS_1, [1, 2], 0.0, 0)
    parametrization = inverse.FourierParametrization(1, (-1, 0, 1))
    result = inverse.invert_refractive_profile(
        data, config, parametrization, {0: 2.0}
    )
    estimate = result.estimate[:3] + 1j * result.estimate[3:]
    np.testing.assert_allclose(estimate, [0.2, 2.0 + 0.1j, 0.2], atol=1e-3)


def test_orthogonality_is_linear_in_the_incident_field(
    config: grating.GratingConfig,
) -> None:
    first = grating.Stack.uniform(2.0 + 0.1j, config.c, config.b)
    second = grating.Stack.equal_layers([2.0, 2.5], config.c, config.b)
    p = np.array([1.0, 0.3j, 0.0])
    wave = lattice.PlaneOrder((0, 0), p)
    base = inverse.orthogonality_residual(first, second, config, wave, wave)
    for scale in (2.5, -1.0 + 0.5j):
        scaled = lattice.PlaneOrder((0, 0), scale * p)
        value = inverse.orthogonality_residual(first, second, config, scaled, wave)
        assert value == pytest.approx(scale * base, rel=1e-10)


@pytest.mark.parametrize(
    "boundary", [grating.Boundary.pec(), grating.Boundary.impedance(0.8)]
)
def test_blowup_indicator_growth(
    config: grating.GratingConfig, boundary: grating.Boundary
) -> None:
    config = config.replace(truncation=2, boundary=boundary)
    offsets = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 0.7, 0.9]
    curve = inverse.blowup_indicator(
        config,
        config.k0 * np.sqrt(2.0),
        [config.c + offset for offset in offsets],
        np.array([0.0, 0.0, 1.0]),
    )
    values = dict(zip(offsets, (value for _, value in curve)))
    assert values[0.01] >= 10.0 * values[0.2]
    assert all(
        values[near] > values[far] for near, far in zip(offsets[:4], offsets[1:5])
    )
    assert max(values[0.5], values[0.7], values[0.9]) <= values[0.2]


def test_blowup_indicator_test_plane(config: grating.GratingConfig) -> None:
    config = config.replace(truncation=1)
    r = np.array([1.0, 0.0, 0.0])
    with pytest.raises(errors.SourcePlaneError):
        inverse.blowup_indicator(config, 3.0, [0.2], r, test_height=0.3)
    with pytest.raises(errors.WrongHalfSpaceError):
        inverse.blowup_indicator(config, 3.0, [0.2], r, test_height=-0.1)
    ((_, low),) = inverse.blowup_indicator(config, 3.0, [0.2], r)
    ((_, high),) = inverse.blowup_indicator(config, 3.0, [0.2], r, test_height=0.1)
    assert low > high
