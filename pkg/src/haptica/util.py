"""Shared helpers: capped parallel map and deterministic number formatting."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV_VAR = "HAPTICA_THREADS"


def thread_cap() -> int:
    """Worker cap from the HAPTICA_THREADS environment variable (>= 1)."""
    raw = os.environ.get(THREADS_ENV_VAR, "")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap < 1:
        cap = min(4, os.cpu_count() or 1)
    return cap


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Map ``fn`` over ``items`` preserving order; parallel when allowed.

    Results are merged in input order regardless of completion order, so
    output is deterministic for deterministic ``fn``.
    """
    cap = thread_cap()
    if cap == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=cap) as pool:
        return list(pool.map(fn, items))


def fmt(value) -> str:
    """Serialize a number with 9 significant digits (platform-stable)."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".9g")


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """RFC-4180-style CSV with LF endings and 9-significant-digit numbers."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(cell if isinstance(cell, str) else fmt(cell) for cell in row))
    return "\n".join(lines) + "\n"


def report_text(items: Sequence[tuple[str, object]]) -> str:
    """key: value report lines, LF endings."""
    lines = []
    for key, value in items:
        rendered = value if isinstance(value, str) else fmt(value)
        lines.append(f"{key}: {rendered}")
    return "\n".join(lines) + "\n"
