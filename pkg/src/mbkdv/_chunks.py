"""Deterministic chunked execution, optionally across processes.

Work is split into fixed-size chunks whose boundaries depend only on the
task size, never on the worker count; chunk outputs are reduced in chunk
order.  Together with per-chunk RNG streams this makes every Monte Carlo
result a pure function of (seed, config), so ``--workers`` changes wall
time only.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def chunk_spans(total: int, size: int) -> list[tuple[int, int]]:
    """(start, count) spans covering range(total) in order."""
    spans = []
    start = 0
    while start < total:
        count = min(size, total - start)
        spans.append((start, count))
        start += count
    return spans


def run_chunks(fn, payloads: list, workers: int = 1) -> list:
    """Apply ``fn`` to each payload, in order; processes when workers > 1."""
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, payloads))
