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
"""Thread fan-out for independent solves."""
from __future__ import annotations

from collections.abc import Iterable
from collections.abc import Sequence
import logging
from typing import Callable
from typing import Optional
from typing import TypeVar

import anyio
import anyio.to_thread

from . import config as config_lib

_LOG = logging.getLogger(__name__)

_T = TypeVar("_T")
_R = TypeVar("_R")


async def amap_in_threads(
    func: Callable[[_T], _R], items: Sequence[_T], *, workers: int
) -> list[_R]:
    """Maps a synchronous function over items, in worker threads.

    At most `workers` calls run at once. Results come back in item order.

    If calls fail, the exception of the earliest failing item is raised as-is
    (not wrapped in an exception group), after all calls finish.

    Args:
        func: A synchronous, thread-safe function.
        items: Inputs to func.
        workers: The maximum number of concurrent calls.

    Returns:
        A list of func(item) for each item, in order.
    """
    results: list[Optional[_R]] = [None] * len(items)
    errors: list[Optional[BaseException]] = [None] * len(items)
    limiter = anyio.CapacityLimiter(workers)

    async def run_one(index: int) -> None:
        try:
            results[index] = await anyio.to_thread.run_sync(
                func, items[index], limiter=limiter
            )
        except Exception as exc:
            errors[index] = exc

    async with anyio.create_task_group() as task_group:
        for index in range(len(items)):
            task_group.start_soon(run_one, index)
    for error in errors:
        if error is not None:
            raise error
    return results  # type: ignore


def map_in_threads(
    func: Callable[[_T], _R],
    items: Iterable[_T],
    *,
    workers: Optional[int] = None,
) -> list[_R]:
    """Maps a synchronous function over items, possibly in worker threads.

    With one worker (the default unless BIPERIODIC_THREADS says otherwise),
    this is a plain ordered loop in the calling thread. Otherwise it runs an
    event loop for amap_in_threads(). Either way, results are in item order
    and do not depend on the worker count.

    This must not be called from inside a running event loop.

    Args:
        func: A synchronous, thread-safe function.
        items: Inputs to func.
        workers: The maximum number of concurrent calls. Defaults to
            config.thread_count().

    Returns:
        A list of func(item) for each item, in order.
    """
    items = list(items)
    if workers is None:
        workers = config_lib.thread_count()
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    _LOG.debug("threads: mapping %d items over %d workers", len(items), workers)
    return anyio.run(_amap_kw, func, items, workers)


async def _amap_kw(
    func: Callable[[_T], _R], items: Sequence[_T], workers: int
) -> list[_R]:
    return await amap_in_threads(func, items, workers=workers)
