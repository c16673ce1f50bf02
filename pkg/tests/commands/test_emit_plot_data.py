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

from typing import Any

import pytest

from biperiodic import commands
from biperiodic import errors
from biperiodic import models


def _record(command: str, payload: dict[str, Any]) -> models.ResultRecord:
    return models.ResultRecord(
        command=command, config_digest="0" * 64, tool_version="1.0", payload=payload
    )


def test_residual_history() -> None:
    record = _record("invert", {"inversion": {"residual_history": [1.0, 0.5]}})
    assert commands.emit_plot_data(record, "residual_history") == (
        "iteration residual\n"
        "0 1.0000000000000000e+00\n"
        "1 5.0000000000000000e-01\n"
    )


def test_efficiency_vs_order() -> None:
    record = _record(
        "solve",
        {
            "solutions": [
                {"efficiencies": [[0, 0, 0.75], [1, 0, 0.25]]},
                {"coefficients": []},
            ]
        },
    )
    lines = commands.emit_plot_data(record, "efficiency_vs_order").splitlines()
    assert lines == [
        "incidence n1 n2 efficiency",
        "0 0 0 7.5000000000000000e-01",
        "0 1 0 2.5000000000000000e-01",
    ]


def test_indicator_curve_is_sorted() -> None:
    record = _record("indicator", {"indicator": [[0.5, 1.0], [0.1, 4.0]]})
    lines = commands.emit_plot_data(record, "indicator_curve").splitlines()
    assert lines[0] == "z3 indicator"
    assert lines[1].startswith("1.0000000000000001e-01 ")


def test_missing_payload() -> None:
    record = _record("modes", {"modes": []})
    with pytest.raises(errors.MissingPayloadError):
        commands.emit_plot_data(record, "indicator_curve")
    with pytest.raises(errors.MissingPayloadError):
        commands.emit_plot_data(record, "efficiency_vs_order")


def test_unknown_kind() -> None:
    with pytest.raises(errors.UsageError):
        commands.emit_plot_data(_record("modes", {}), "histogram")


def test_empty_table_is_header_only() -> None:
    record = _record("solve", {"solutions": []})
    text = commands.emit_plot_data(record, "efficiency_vs_order")
    assert text == "incidence n1 n2 efficiency\n"
    assert commands.emit_plot_data(record, "efficiency_vs_order") == text
