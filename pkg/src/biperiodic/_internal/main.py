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
"""The biperiodic command line."""
from __future__ import annotations

import argparse
from collections.abc import Sequence
import logging
import pathlib
import sys
from typing import Optional

from .. import commands
from .. import errors
from .. import models

_LOG = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(message)s"


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biperiodic",
        description="Scattering by doubly periodic layered gratings.",
    )
    parser.add_argument(
        "command", help="modes, green, solve, reciprocity, invert or indicator"
    )
    parser.add_argument("--config", type=pathlib.Path, required=True)
    parser.add_argument("--out", type=pathlib.Path, required=True)
    parser.add_argument("--seed", type=int, help="override the config's seed")
    parser.add_argument(
        "--truncation", type=int, help="override the config's truncation"
    )
    parser.add_argument("--plot", help="also emit a plot table of this kind")
    parser.add_argument(
        "--plot-out", type=pathlib.Path, help="write the plot table here"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load(args: argparse.Namespace) -> models.RunConfig:
    run = models.parse_config(args.config.read_text())
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.truncation is not None:
        update["truncation"] = args.truncation
    if update:
        run = models.parse_config(
            models.serialize_config(run.copy(update=update))
        )
    return run


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Runs one command and returns the process exit code."""
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format=LOG_FORMAT,
    )
    try:
        run = _load(args)
        record = commands.run_command(args.command, run, out=args.out)
        if args.plot is not None:
            table = commands.emit_plot_data(record, args.plot)
            if args.plot_out is not None:
                args.plot_out.write_text(table)
            else:
                sys.stdout.write(table)
    except (errors.Error, OSError) as exc:
        _LOG.error("%s: %s", args.command, exc)
        return errors.exit_code_for(exc)
    return errors.ExitCode.OK
