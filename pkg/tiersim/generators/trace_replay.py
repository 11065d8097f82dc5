from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Iterator, Union

from .kv_workload import AccessEvent

LOG = logging.getLogger(__name__)

TRACE_HEADER = "# time_ns,site_id,context_id,object_id[,offset]"


class TraceFormatError(ValueError):
    """A trace line could not be parsed, or broke timestamp ordering."""

    def __init__(self, line_number: int, text: str, reason: str) -> None:
        self.line_number = line_number
        self.text = text
        self.reason = reason
        super().__init__(f"line {line_number}: {reason}: {text!r}")


def parse_trace_line(line: str, line_number: int) -> AccessEvent:
    fields = [f.strip() for f in line.split(",")]
    if len(fields) not in (4, 5):
        raise TraceFormatError(line_number, line, f"expected 4 or 5 fields, got {len(fields)}")
    try:
        values = [int(f) for f in fields]
    except ValueError:
        raise TraceFormatError(line_number, line, "non-integer field") from None
    if any(v < 0 for v in values):
        raise TraceFormatError(line_number, line, "negative field")
    time, site, context, obj = values[:4]
    offset = values[4] if len(values) == 5 else 0
    return AccessEvent(time, site, context, obj, offset)


def replay_trace(path: Union[str, Path]) -> Iterator[AccessEvent]:
    """Stream events from a trace file in file order.

    Blank lines and `#` comments are skipped. Parsing is lazy, so an error is raised
    when the offending line is reached.
    """
    path = Path(path)
    last_time = -1
    with path.open("r", encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            event = parse_trace_line(line, line_number)
            if event.time < last_time:
                raise TraceFormatError(
                    line_number, line, f"timestamp {event.time} goes back from {last_time}"
                )
            last_time = event.time
            yield event


def write_trace(events: Iterable[AccessEvent], path: Union[str, Path]) -> int:
    """Write events in trace format; offsets are only written when non-zero."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(TRACE_HEADER + "\n")
        for ev in events:
            handle.write(format_event(ev) + "\n")
            count += 1
    LOG.info(f"wrote {count} events to {path}")
    return count


def format_event(ev: AccessEvent) -> str:
    if ev.offset:
        return f"{ev.time},{ev.site},{ev.context},{ev.object},{ev.offset}"
    return f"{ev.time},{ev.site},{ev.context},{ev.object}"


class TraceWriter:
    """Incremental trace writer, used to tee a running simulation's stream to disk."""

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = self.path.open("w", encoding="utf-8", newline="\n")
        self._handle.write(TRACE_HEADER + "\n")
        self.count = 0

    def __call__(self, ev: AccessEvent) -> None:
        self._handle.write(format_event(ev) + "\n")
        self.count += 1

    def close(self) -> None:
        self._handle.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
