"""Structured diagnostic events.

Numerical routines call :func:`report` whenever they apply a correction
(mass renormalisation, mean subtraction, ...).  Events always go to the
``infotrans`` logger; inside a :func:`recording` block they are also appended
to a list so that callers such as the CLI can serialise them.
"""
from __future__ import annotations

import contextlib
import contextvars
import json
import logging
from typing import Any, Iterator, TextIO

logger = logging.getLogger("infotrans")

_sink: contextvars.ContextVar[Any] = contextvars.ContextVar("infotrans_sink", default=None)


def report(event: str, **data: Any) -> None:
    record = {"event": event, **data}
    logger.debug("%s %s", event, data)
    sink = _sink.get()
    if sink is not None:
        sink.append(record)


@contextlib.contextmanager
def recording() -> Iterator[list[dict[str, Any]]]:
    """Collect every event reported inside the block."""
    events: list[dict[str, Any]] = []
    token = _sink.set(events)
    try:
        yield events
    finally:
        _sink.reset(token)


def _jsonable(obj: Any) -> Any:
    if hasattr(obj, "item"):
        return obj.item()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def to_json(record: dict[str, Any]) -> str:
    return json.dumps(record, default=_jsonable, allow_nan=True)


class _LineWriter:
    """List-like sink that writes each record as one JSON line."""

    def __init__(self, stream: TextIO) -> None:
        self.stream = stream

    def append(self, record: dict[str, Any]) -> None:
        self.stream.write(to_json(record) + "\n")
        self.stream.flush()


@contextlib.contextmanager
def streaming(stream: TextIO) -> Iterator[_LineWriter]:
    """Write every event reported inside the block to ``stream`` as JSON lines."""
    writer = _LineWriter(stream)
    token = _sink.set(writer)
    try:
        yield writer
    finally:
        _sink.reset(token)
