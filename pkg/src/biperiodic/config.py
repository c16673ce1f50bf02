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

"""Config abstraction in biperiodic.

Config in biperiodic is modeled as a json-compatible dictionary of flat keys.
The numerical knobs every solver shares (thresholds, tolerances, step sizes)
live under the "numerics_" prefix and are parsed into a Numerics value, which
the library passes around explicitly. Nothing in the library reads a global
config.

Run configs for the command line have a nested schema of their own; see
biperiodic.models. Their "numerics" section is flattened into a Config so both
paths share the validation below.

Example:
    A Config with a tighter Wood-anomaly threshold:

        config = Config(numerics_wood_threshold=1e-10)
        numerics = Numerics.from_config(config)
"""
from __future__ import annotations

from collections.abc import MutableMapping
import dataclasses
import os
from typing import Any
from typing import TypeVar
from typing import Union

from .errors import Error
from .errors import InvalidConfigError

__all__ = [
    "Config",
    "Error",
    "InvalidConfigError",
    "Numerics",
    "THREADS_ENV",
    "thread_count",
]

# Design notes:

# Config is stored as json, so run configs and result records can be diffed
# and edited by hand.

# Numerics is a frozen dataclass instead of a dict so that solver entry points
# can take it as one keyword argument and still be hashable for caching.

THREADS_ENV = "BIPERIODIC_THREADS"

_T = TypeVar("_T")


class Config(dict, MutableMapping[str, Any]):
    """A json-compatible dict."""

    def _get(self, key: str, type_: Union[type[_T], tuple[type, ...]]) -> Any:
        value = self.get(key)
        # bool is an int subclass, but never a valid number here
        bad_bool = isinstance(value, bool) and type_ is not bool
        if key in self and (bad_bool or not isinstance(value, type_)):
            raise InvalidConfigError(f'"{key}": {value!r} is not a {type_}')
        return value

    def _require(self, key: str, type_: Union[type[_T], tuple[type, ...]]) -> Any:
        value = self._get(key, type_)
        if value is None:
            raise InvalidConfigError(f'"{key}": missing')
        return value

    def require_int(self, key: str) -> int:
        """Get a required int value.

        Args:
            key: The name of the value to get.

        Returns:
            An int value.

        Raises:
            InvalidConfigError: If the key does not exist or its value is not
                an int.
        """
        return self._require(key, int)

    def require_float(self, key: str) -> float:
        """Get a required real value.

        Args:
            key: The name of the value to get.

        Returns:
            A float value.

        Raises:
            InvalidConfigError: If the key does not exist or its value is not a
                real number.
        """
        return float(self._require(key, (int, float)))


_NUMERICS_PREFIX = "numerics_"
_NON_NEGATIVE = frozenset({"tikhonov"})


@dataclasses.dataclass(frozen=True)
class Numerics:
    """Numerical knobs shared by the solvers.

    Attributes:
        wood_threshold: |β| below this times k is a Wood anomaly.
        plane_tolerance: Minimum |x3 - y3| for the spectral Green's series.
        fd_step: Step of the finite-difference field diagnostics.
        eps_floor: Absolute floor of relative residual denominators.
        staircase_layers: Layers used to staircase a continuous profile.
        singular_condition: Condition number above which a modal system is
            rejected as singular.
        jacobian_step: Relative step of finite-difference Jacobians.
        max_iterations: Iteration cap of the inverse solvers.
        tikhonov: Default Tikhonov weight of profile inversion.
        gamma: Floor of Re q enforced by projection.
        rel_error_floor: Floor below which two reciprocity sides both count
            as zero.
        smooth_decay: Decay constant of the auxiliary kernel used to split
            the Green's function near its singularity.
        smooth_shells: Real-space lattice shells summed in that split.
        quadrature_tolerance: Relative tolerance of volume quadrature.
    """

    wood_threshold: float = 1e-8
    plane_tolerance: float = 1e-2
    fd_step: float = 1e-3
    eps_floor: float = 1e-30
    staircase_layers: int = 64
    singular_condition: float = 1e12
    jacobian_step: float = 1e-5
    max_iterations: int = 50
    tikhonov: float = 1e-6
    gamma: float = 1e-3
    rel_error_floor: float = 1e-14
    smooth_decay: float = 1.0
    smooth_shells: int = 6
    quadrature_tolerance: float = 1e-10

    @classmethod
    def from_config(cls, config: Config) -> Numerics:
        """Parses the "numerics_" keys of a Config.

        Keys without the prefix are ignored.

        Args:
            config: The config to read.

        Returns:
            A Numerics with every missing key at its default.

        Raises:
            InvalidConfigError: If a "numerics_" key is unknown, has the
                wrong type, or is not positive (tikhonov may also be 0).
        """
        values: dict[str, Any] = {}
        fields = {field.name: field for field in dataclasses.fields(cls)}
        for key in config:
            if not key.startswith(_NUMERICS_PREFIX):
                continue
            name = key[len(_NUMERICS_PREFIX) :]
            field = fields.get(name)
            if field is None:
                raise InvalidConfigError(f'"{key}": unknown numerics option')
            if field.type in (int, "int"):
                value: Any = config.require_int(key)
            else:
                value = config.require_float(key)
            if name in _NON_NEGATIVE:
                if value < 0:
                    raise InvalidConfigError(f'"{key}": {value!r} is negative')
            elif value <= 0:
                raise InvalidConfigError(f'"{key}": {value!r} is not positive')
            values[name] = value
        return cls(**values)


def thread_count() -> int:
    """Returns the worker thread count from the environment.

    Reads BIPERIODIC_THREADS. Unset, empty or non-positive values mean one
    thread.

    Raises:
        InvalidConfigError: If the variable is set but is not an integer.
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        count = int(raw)
    except ValueError as exc:
        raise InvalidConfigError(f"{THREADS_ENV}: {raw!r} is not an int") from exc
    return max(count, 1)
