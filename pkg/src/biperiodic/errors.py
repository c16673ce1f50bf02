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
"""Error types for biperiodic.

Every failure that biperiodic raises on purpose is a subclass of Error. Each
class names the ExitCode the command line reports for it, so callers never
need to pattern-match on messages.
"""
from __future__ import annotations

import builtins
import enum
from typing import Any
from typing import Optional


class ExitCode(enum.IntEnum):

    OK = 0
    FAILURE = 1
    USAGE = 2
    SCHEMA = 3
    CONSTRAINT = 4
    SOLVER = 5
    NONCONVERGENCE = 6
    MISSING_PAYLOAD = 7
    IO = 8


class Error(Exception):
    """Base class for errors."""

    exit_code = ExitCode.FAILURE


class UsageError(Error):
    """The command line was malformed."""

    exit_code = ExitCode.USAGE


class InvalidConfigError(Error):
    """A config item was invalid."""

    exit_code = ExitCode.SCHEMA


class _ViolationsMixin:
    def __init__(self, violations: list[str]) -> None:
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))  # type: ignore


class SchemaError(_ViolationsMixin, InvalidConfigError):
    """A run config had unknown keys or values of the wrong type.

    Attributes:
        violations: One entry per problem, as "<field.path>: <message>".
    """

    exit_code = ExitCode.SCHEMA


class ConstraintError(_ViolationsMixin, InvalidConfigError):
    """Values were well-typed, but broke a geometric or physical constraint.

    Attributes:
        violations: One entry per problem, as "<field.path>: <message>".
    """

    exit_code = ExitCode.CONSTRAINT


class SolverError(Error):
    """Base class for numerical failures of the field solvers."""

    exit_code = ExitCode.SOLVER


class WoodAnomalyError(SolverError):
    """A vertical wavenumber vanished inside the mode truncation."""


class WrongHalfSpaceError(SolverError):
    """A Rayleigh series was evaluated where its evanescent terms grow."""


class SourcePlaneError(SolverError):
    """A spectral Green's series was evaluated too close to the source plane."""


class SingularSystemError(SolverError):
    """A modal system was singular or too ill-conditioned to trust.

    Attributes:
        condition: The estimated condition number, if one was computed.
    """

    def __init__(self, message: str, condition: Optional[float] = None) -> None:
        super().__init__(message)
        self.condition = condition


class UnsupportedCombinationError(SolverError):
    """The requested source, material and boundary cannot be solved together."""


class SourceOnInterfaceError(SolverError):
    """A dipole sat on a material interface or on the bottom boundary."""


class HeightBelowInterfaceError(SolverError):
    """A near-field plane was requested at or below the interface."""


class EvanescentIncidenceError(SolverError):
    """Efficiencies were requested for an incident order that carries no flux."""


class QuadratureNonconvergenceError(SolverError):
    """A volume integral did not converge under refinement."""


class InversionError(Error):
    """Base class for failures of the inverse solvers."""

    exit_code = ExitCode.NONCONVERGENCE


class NonConvergenceError(InversionError):
    """The optimizer ran out of iterations or its line search failed.

    Attributes:
        result: The partial result at the last accepted iterate.
    """

    def __init__(self, message: str, result: Any = None) -> None:
        super().__init__(message)
        self.result = result


class DegenerateJacobianError(InversionError):
    """The misfit Jacobian lost rank and no regularization was given."""


class ConstraintProjectionLoopError(InversionError):
    """Projected steps repeatedly failed to decrease the misfit."""


class MissingPayloadError(Error):
    """A result record lacks the payload a plot table needs."""

    exit_code = ExitCode.MISSING_PAYLOAD


def exit_code_for(exc: BaseException) -> ExitCode:
    """Returns the process exit code that reports an exception."""
    if isinstance(exc, Error):
        return exc.exit_code
    if isinstance(exc, builtins.OSError):
        return ExitCode.IO
    return ExitCode.FAILURE
