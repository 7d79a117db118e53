"""Deterministic block scheduling for embarrassingly parallel stages.

Work is cut into fixed-size blocks whose seeds depend only on the block index,
so the worker count never changes a result.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

BLOCK = 10_000


def block_sizes(total: int, block: int = BLOCK) -> list[int]:
    full, rest = divmod(total, block)
    return [block] * full + ([rest] if rest else [])


def _star(args):
    fn, a = args
    return fn(*a)


def map_blocks(fn, arglist, workers: int = 1) -> list:
    """``[fn(*a) for a in arglist]``, optionally across processes, in order."""
    if workers <= 1 or len(arglist) <= 1:
        return [fn(*a) for a in arglist]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_star, [(fn, a) for a in arglist]))
