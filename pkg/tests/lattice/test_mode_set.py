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

from biperiodic import lattice


def test_truncation_indices() -> None:
    indices = lattice.truncation_indices(1)
    assert indices.shape == (9, 2)
    assert indices[0].tolist() == [-1, -1]
    assert indices[4].tolist() == [0, 0]
    assert indices[5].tolist() == [0, 1]


def test_negative_truncation() -> None:
    with pytest.raises(ValueError):
        lattice.truncation_indices(-1)


def test_radial_order_starts_at_origin() -> None:
    indices = lattice.truncation_indices(2)
    ordered = indices[lattice.radial_order(indices)]
    assert ordered[0].tolist() == [0, 0]
    radius = ordered[:, 0] ** 2 + ordered[:, 1] ** 2
    assert np.all(np.diff(radius) >= 0)


def test_position_round_trip() -> None:
    modes = lattice.mode_set(lattice.QuasiMomentum(0.31, 0.17), 2, 2.3)
    assert len(modes) == 25
    for position, n in enumerate(modes.mode_indices()):
        assert modes.position(n) == position
        assert modes.index(position) == n
    with pytest.raises(KeyError):
        modes.position((3, 0))


def test_arrays() -> None:
    momentum = lattice.QuasiMomentum(0.31, 0.17)
    modes = lattice.mode_set(momentum, 1, 2.3)
    np.testing.assert_allclose(modes.alpha, modes.indices + [0.31, 0.17])
    np.testing.assert_allclose(
        modes.beta**2, 2.3**2 - np.sum(modes.alpha**2, axis=1)
    )
    assert not modes.alpha.flags.writeable
    assert modes.propagating[modes.position((0, 0))]


def test_cached() -> None:
    momentum = lattice.QuasiMomentum(0.31, 0.17)
    assert lattice.mode_set(momentum, 1, 2.3) is lattice.mode_set(momentum, 1, 2.3)


def test_momentum_conjugate() -> None:
    momentum = lattice.QuasiMomentum(0.31, -0.17)
    assert momentum.conjugate() == lattice.QuasiMomentum(-0.31, 0.17)


def test_momentum_must_be_finite() -> None:
    with pytest.raises(ValueError):
        lattice.QuasiMomentum(float("nan"), 0.0)
