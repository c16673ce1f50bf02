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

from biperiodic import dtn
from biperiodic import errors
from biperiodic import grating
from biperiodic import layers

ALPHA = np.array([[0.31, 0.17]])


def _problem(boundary: grating.Boundary) -> layers.GroupProblem:
    beta = np.sqrt(2.3**2 - np.sum(ALPHA**2, axis=1)) + 0j
    admittance = layers.block_matrix(dtn.curl_blocks(2.3**2, ALPHA, beta))
    bases = [
        layers.homogeneous_basis(2.3**2 * 2.0, ALPHA, 0.0, 0.4),
        layers.homogeneous_basis(2.3**2 * (1.5 + 0.2j), ALPHA, 0.4, 1.0),
    ]
    return layers.GroupProblem(bases, admittance, 1.3, boundary)


def _sources() -> layers.GroupSources:
    zero = np.zeros(2, dtype=complex)
    return layers.GroupSources(
        np.array([1.0, 0.5j]), np.array([0.2, -0.4]), zero, zero, zero, zero
    )


def test_zero_sources() -> None:
    result = layers.solve_group(
        _problem(grating.Boundary.pec()), layers.GroupSources.zeros(1)
    )
    assert result.condition == 1.0
    assert not np.any(result.scattered)


@pytest.mark.parametrize(
    "boundary", [grating.Boundary.pec(), grating.Boundary.impedance(0.8)]
)
def test_methods_agree(boundary: grating.Boundary) -> None:
    problem = _problem(boundary)
    first = layers.solve_group(
        problem, _sources(), method=layers.SolveMethod.SMATRIX
    )
    second = layers.solve_group(
        problem, _sources(), method=layers.SolveMethod.MONOLITHIC
    )
    np.testing.assert_allclose(first.scattered, second.scattered, rtol=1e-10)
    for mine, theirs in zip(first.up + first.down, second.up + second.down):
        np.testing.assert_allclose(mine, theirs, rtol=1e-9, atol=1e-12)


def test_singular_condition() -> None:
    with pytest.raises(errors.SingularSystemError) as info:
        layers.solve_group(
            _problem(grating.Boundary.pec()), _sources(), singular_condition=1.0
        )
    assert info.value.condition is not None
