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

from collections.abc import Iterator

import pytest

from biperiodic import caches as caches_lib
from biperiodic import grating
from biperiodic import lattice
from tests import epfake


@pytest.fixture
def caches() -> Iterator:
    yield
    caches_lib.clear_all()


@pytest.fixture
def entry_point_faker() -> Iterator[epfake.EntryPointFaker]:
    faker = epfake.EntryPointFaker()
    faker.enable()
    yield faker
    faker.disable()


@pytest.fixture
def config() -> grating.GratingConfig:
    """A small PEC-backed configuration away from Wood anomalies."""
    return grating.GratingConfig(
        k0=2.3,
        lambda0=1.0,
        b=1.0,
        c=0.0,
        h=1.5,
        boundary=grating.Boundary.pec(),
        momentum=lattice.QuasiMomentum(0.31, 0.17),
        truncation=2,
    )
