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

import copy
import json
import math
from typing import Any

import pytest

from biperiodic import errors
from biperiodic import grating
from biperiodic import models

DOCUMENT: dict[str, Any] = {
    "geometry": {"b": 1.0, "c": 0.0, "h": 1.5},
    "physics": {"k0": 2.3},
    "material": {"layers": [{"thickness": 1.0, "q": [2.0, 0.1]}]},
    "momentum": {"alpha": [0.31, 0.17]},
    "truncation": 1,
}


def _parse(**changes: Any) -> models.RunConfig:
    document = copy.deepcopy(DOCUMENT)
    document.update(changes)
    return models.parse_config(json.dumps(document))


def test_valid() -> None:
    run = _parse()
    config = models.build_grating(run)
    assert config.k0 == 2.3
    assert config.truncation == 1
    assert config.boundary.kind is grating.BoundaryKind.PEC
    assert config.momentum.alpha1 == 0.31
    material = models.build_material(run)
    assert isinstance(material, grating.Stack)
    assert material.uniform_value() == 2.0 + 0.1j


def test_default_material_is_vacuum() -> None:
    run = _parse(material={})
    assert models.build_material(run).uniform_value() == 1.0


def test_fourier_material() -> None:
    run = _parse(
        material={"kind": "fourier", "axis": 2, "coefficients": {"0": [2.0, 0.0]}}
    )
    material = models.build_material(run)
    assert isinstance(material, grating.Fourier1D)
    assert material.axis == 2
    assert material.coefficient(0) == 2.0


def test_graded_material_uses_staircase_layers() -> None:
    profile = [[1.0, [3.0, 0.2]], [0.0, [1.0, 0.0]]]
    run = _parse(
        material={"kind": "graded", "profile": profile},
        numerics={"staircase_layers": 4},
    )
    material = models.build_material(run)
    assert isinstance(material, grating.Stack)
    assert len(material.layers) == 4
    assert material.layers[0].q == pytest.approx(1.25 + 0.025j)
    assert material.layers[-1].q == pytest.approx(2.75 + 0.175j)
    run = _parse(material={"kind": "graded", "profile": profile})
    material = models.build_material(run)
    assert isinstance(material, grating.Stack)
    assert len(material.layers) == 64


def test_graded_material_needs_nodes() -> None:
    with pytest.raises(errors.ConstraintError):
        _parse(material={"kind": "graded"})


def test_not_json() -> None:
    with pytest.raises(errors.SchemaError):
        models.parse_config("{geometry")
    with pytest.raises(errors.SchemaError):
        models.parse_config("[]")


def test_unknown_key() -> None:
    with pytest.raises(errors.SchemaError) as info:
        _parse(geometry={"b": 1.0, "c": 0.0, "h": 1.5, "d": 3.0})
    assert any(v.startswith("geometry.d") for v in info.value.violations)


def test_wrong_type() -> None:
    with pytest.raises(errors.SchemaError) as info:
        _parse(truncation="many")
    assert any(v.startswith("truncation") for v in info.value.violations)


def test_unknown_numerics_option() -> None:
    with pytest.raises(errors.SchemaError):
        _parse(numerics={"speed": 3})
    run = _parse(numerics={"max_iterations": 7, "tikhonov": 0.5})
    numerics = models.build_numerics(run)
    assert numerics.max_iterations == 7
    assert numerics.tikhonov == 0.5


def test_every_violation_is_listed() -> None:
    with pytest.raises(errors.ConstraintError) as info:
        _parse(
            geometry={"b": 1.0, "c": 2.0, "h": 1.5},
            material={"layers": [{"thickness": 1.0, "q": [-1.0, 0.0]}]},
        )
    violations = info.value.violations
    assert any(v.startswith("geometry.c") for v in violations)
    assert any(v.startswith("material.layers[0].q") for v in violations)
    assert len(violations) >= 3


def test_rho_rules() -> None:
    with pytest.raises(errors.ConstraintError):
        _parse(physics={"k0": 2.3, "boundary": "impedance"})
    with pytest.raises(errors.ConstraintError):
        _parse(physics={"k0": 2.3, "rho": 1.0})
    run = _parse(physics={"k0": 2.3, "boundary": "impedance", "rho": 1.0})
    assert models.build_grating(run).boundary.rho == 1.0


def test_alpha_and_angles_conflict() -> None:
    with pytest.raises(errors.ConstraintError) as info:
        _parse(momentum={"alpha": [0.1, 0.2], "theta1": 1.0})
    assert any("not both" in v for v in info.value.violations)


def test_momentum_from_angles() -> None:
    run = _parse(momentum={"theta1": math.pi / 3, "theta2": 0.0})
    momentum = models.build_momentum(run)
    assert momentum.alpha1 == pytest.approx(2.3 * 0.5)
    assert momentum.alpha2 == pytest.approx(0.0)
    with pytest.raises(errors.ConstraintError):
        _parse(momentum={"theta1": -0.5})


def test_serialize_round_trip() -> None:
    run = _parse(seed=11)
    again = models.parse_config(models.serialize_config(run))
    assert again == run
    assert models.config_digest(again) == models.config_digest(run)


def test_digest() -> None:
    first = models.config_digest(_parse())
    assert first == models.config_digest(_parse())
    assert len(first) == 64
    assert first != models.config_digest(_parse(seed=1))
