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
"""Command handlers and plot-table writers.

Each command takes a validated RunConfig and returns a JSON-compatible
payload. Handlers are looked up by name in the "biperiodic.commands" entry
point group, and plot writers in "biperiodic.plots".
"""
from __future__ import annotations

import logging
import pathlib
import time
from typing import Any
from typing import Callable
from typing import Optional
from typing import Union

import numpy as np

from . import config as config_lib
from . import errors
from . import forward
from . import greens
from . import inverse
from . import lattice
from . import models
from . import plugins
from . import reciprocity

_LOG = logging.getLogger(__name__)

Command = Callable[[models.RunConfig, config_lib.Numerics], dict[str, Any]]
PlotRows = tuple[list[str], list[list[Union[int, float]]]]
Plot = Callable[[models.ResultRecord], PlotRows]

_COMMAND_FUNCS: plugins.Funcs[Command] = plugins.Funcs("biperiodic.commands")
command_plugin = _COMMAND_FUNCS.decorator
"""Registers a command handler under a name.

The name must match an entry point in the "biperiodic.commands" group, if
one is installed.
"""

_PLOT_FUNCS: plugins.Funcs[Plot] = plugins.Funcs("biperiodic.plots")
plot_plugin = _PLOT_FUNCS.decorator


def jsonable(value: Any) -> Any:
    """Converts numpy values and complex numbers for JSON output.

    Complex numbers become [re, im] pairs.
    """
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return models.from_complex(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


@command_plugin("modes")
def _modes(run: models.RunConfig, numerics: config_lib.Numerics) -> dict[str, Any]:
    config = models.build_grating(run)
    modes = lattice.mode_set(
        config.momentum,
        config.truncation,
        config.k0,
        wood_threshold=numerics.wood_threshold,
    )
    order = lattice.radial_order(modes.indices)
    return {
        "modes": [
            {
                "n": list(modes.index(int(i))),
                "alpha": modes.alpha[i].tolist(),
                "beta": models.from_complex(modes.beta[i]),
                "propagating": bool(modes.propagating[i]),
            }
            for i in order
        ]
    }


@command_plugin("green")
def _green(run: models.RunConfig, numerics: config_lib.Numerics) -> dict[str, Any]:
    block = run.green
    if block is None:
        raise errors.SchemaError(["green: block is required for this command"])
    config = models.build_grating(run)
    momentum = config.momentum.conjugate() if block.conjugate else config.momentum
    params = greens.GreenParams(block.k or config.k0, momentum, config.truncation)
    rows = greens.green_table(
        [(np.array(point.x), np.array(point.y)) for point in block.points],
        params,
        plane_tolerance=numerics.plane_tolerance,
        step=numerics.fd_step,
        decay=numerics.smooth_decay,
        shells=numerics.smooth_shells,
    )
    return {"green": jsonable(rows)}


def _solution_payload(solution: forward.Solution) -> dict[str, Any]:
    diagnostics = solution.diagnostics()
    payload: dict[str, Any] = {
        "coefficients": lattice.coefficient_table(solution.scattered_up),
        "diagnostics": {
            "interface_e": diagnostics.interface_e,
            "interface_c": diagnostics.interface_c,
            "boundary": diagnostics.boundary,
            "dtn": diagnostics.dtn,
            "condition": diagnostics.condition,
        },
    }
    if isinstance(solution.incidence, lattice.PlaneOrder):
        try:
            report = forward.energy_report(solution)
        except errors.EvanescentIncidenceError:
            pass
        else:
            payload["efficiencies"] = [
                [n[0], n[1], value] for n, value in report.efficiencies
            ]
            payload["total_efficiency"] = report.total
    return payload


@command_plugin("solve")
def _solve(run: models.RunConfig, numerics: config_lib.Numerics) -> dict[str, Any]:
    block = run.solve
    if block is None:
        raise errors.SchemaError(["solve: block is required for this command"])
    solutions = forward.solve_batch(
        models.build_grating(run),
        models.build_material(run),
        [models.build_incidence(spec) for spec in block.incidences],
        numerics=numerics,
        method=models.method_from_name(block.method),
    )
    return {"solutions": [_solution_payload(solution) for solution in solutions]}


@command_plugin("reciprocity")
def _reciprocity(
    run: models.RunConfig, numerics: config_lib.Numerics
) -> dict[str, Any]:
    block = run.reciprocity
    if block is None:
        raise errors.SchemaError(["reciprocity: block is required for this command"])
    reports = reciprocity.reciprocity_table(
        models.build_grating(run),
        models.build_material(run),
        np.array(block.y0),
        [np.array(r) for r in block.rs],
        [models.to_vector(p) for p in block.ps],
        block.orders,
        include_lambda0=block.include_lambda0,
        numerics=numerics,
    )
    return {
        "reciprocity": [
            {
                "r": jsonable(report.r),
                "p": jsonable(report.p),
                "m": list(report.m),
                "lhs": models.from_complex(report.lhs),
                "rhs": models.from_complex(report.rhs),
                "rel_error": report.rel_error,
            }
            for report in reports
        ]
    }


def _run_inversion(
    run: models.RunConfig,
    numerics: config_lib.Numerics,
    data: inverse.NearFieldDataset,
    tikhonov: Optional[float],
) -> inverse.InversionResult:
    block = run.invert
    assert block is not None
    config = models.build_grating(run)
    if block.target == "impedance_depth":
        q = models.build_material(run).uniform_value()
        if q is None:
            raise errors.UnsupportedCombinationError(
                "impedance-depth inversion needs a constant refractive index"
            )
        if block.init_c is None or block.init_rho is None:
            raise errors.SchemaError(["invert: init_c and init_rho are required"])
        return inverse.invert_impedance_depth(
            data, config, q, (block.init_c, block.init_rho), numerics=numerics
        )
    spec = block.parametrization
    parametrization: inverse.Parametrization
    if spec.kind == "fourier":
        parametrization = inverse.FourierParametrization(spec.axis, tuple(spec.orders))
    else:
        parametrization = inverse.StackParametrization(spec.layers)
    if block.init_q is None:
        raise errors.SchemaError(["invert.init_q: required for profile inversion"])
    return inverse.invert_refractive_profile(
        data,
        config,
        parametrization,
        models.to_complex(block.init_q),
        tikhonov=tikhonov,
        numerics=numerics,
    )


@command_plugin("invert")
def _invert(run: models.RunConfig, numerics: config_lib.Numerics) -> dict[str, Any]:
    block = run.invert
    if block is None:
        raise errors.SchemaError(["invert: block is required for this command"])
    data = inverse.synthesize_data(
        models.build_grating(run),
        models.build_material(run),
        block.orders,
        block.polarizations,
        block.noise_level,
        run.seed,
        numerics=numerics,
    )
    if block.morozov and block.noise_level > 0:
        weight, result = inverse.select_tikhonov_morozov(
            lambda tikhonov: _run_inversion(run, numerics, data, tikhonov),
            block.noise_level * inverse.dataset_norm(data),
            block.morozov,
        )
        _LOG.info("invert: discrepancy principle chose tikhonov %.3e", weight)
    else:
        result = _run_inversion(run, numerics, data, block.tikhonov)
    return {"inversion": result.as_dict()}


@command_plugin("indicator")
def _indicator(
    run: models.RunConfig, numerics: config_lib.Numerics
) -> dict[str, Any]:
    block = run.indicator
    if block is None:
        raise errors.SchemaError(["indicator: block is required for this command"])
    config = models.build_grating(run)
    q = models.build_material(run).uniform_value()
    if q is None:
        raise errors.UnsupportedCombinationError(
            "the dipole indicator needs a constant refractive index"
        )
    curve = inverse.blowup_indicator(
        config,
        config.k0 * np.sqrt(q),
        block.depths,
        np.array(block.r),
        position=block.position,
        test_height=block.test_height,
        numerics=numerics,
    )
    return {"indicator": [[z, value] for z, value in curve]}


def run_command(
    command: str,
    run: models.RunConfig,
    *,
    out: Optional[pathlib.Path] = None,
) -> models.ResultRecord:
    """Runs one command and wraps its payload in a record.

    Args:
        command: A registered command name.
        run: The validated configuration.
        out: If given, the record is written here.

    Raises:
        UsageError: If the command is unknown.
    """
    funcs = _COMMAND_FUNCS.get()
    func = funcs.get(command)
    if func is None:
        raise errors.UsageError(
            f"unknown command {command!r}; expected one of {sorted(funcs)}"
        )
    digest = models.config_digest(run)
    numerics = models.build_numerics(run)
    _LOG.info("%s: starting, config %s", command, digest)
    start = time.perf_counter()
    payload = jsonable(func(run, numerics))
    elapsed = time.perf_counter() - start
    _LOG.info("%s: finished in %.3fs, config %s", command, elapsed, digest)
    record = models.ResultRecord(
        command=command,
        config_digest=digest,
        tool_version=models.tool_version(),
        timing={"wall_seconds": elapsed},
        payload=payload,
    )
    if out is not None:
        out.write_text(record.to_text())
    return record


def _require(record: models.ResultRecord, key: str) -> Any:
    if key not in record.payload:
        raise errors.MissingPayloadError(
            f"{record.command} record has no {key!r} payload"
        )
    return record.payload[key]


@plot_plugin("efficiency_vs_order")
def _efficiency_rows(record: models.ResultRecord) -> PlotRows:
    rows: list[list[Union[int, float]]] = []
    for index, solution in enumerate(_require(record, "solutions")):
        for n1, n2, value in solution.get("efficiencies", []):
            rows.append([index, int(n1), int(n2), float(value)])
    return ["incidence", "n1", "n2", "efficiency"], rows


@plot_plugin("indicator_curve")
def _indicator_rows(record: models.ResultRecord) -> PlotRows:
    points = _require(record, "indicator")
    curve = sorted((float(z), float(value)) for z, value in points)
    return ["z3", "indicator"], [[z, value] for z, value in curve]


@plot_plugin("residual_history")
def _residual_rows(record: models.ResultRecord) -> PlotRows:
    history = _require(record, "inversion")["residual_history"]
    return ["iteration", "residual"], [
        [index, float(value)] for index, value in enumerate(history)
    ]


def _format(value: Union[int, float]) -> str:
    if isinstance(value, int):
        return str(value)
    return f"{value:.16e}"


def emit_plot_data(record: models.ResultRecord, kind: str) -> str:
    """Renders a whitespace-separated table with a header line.

    Floats use 17 significant digits in scientific notation.

    Raises:
        UsageError: If the kind is unknown.
        MissingPayloadError: If the record lacks the payload the kind needs.
    """
    funcs = _PLOT_FUNCS.get()
    func = funcs.get(kind)
    if func is None:
        raise errors.UsageError(
            f"unknown plot kind {kind!r}; expected one of {sorted(funcs)}"
        )
    header, rows = func(record)
    lines = [" ".join(header)]
    lines.extend(" ".join(_format(value) for value in row) for row in rows)
    return "\n".join(lines) + "\n"
