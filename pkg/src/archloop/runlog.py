"""Append-only JSONL run log: one record per iteration, UTF-8, flat file.

Reading tolerates exactly one torn (partially written) final line — the
crash-mid-append case — which is dropped with a warning.  Any malformed
record before the final line means the file is not a valid prefix of a run
and reading aborts.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

from archloop.model import RunLogRecord

logger = logging.getLogger(__name__)


class CorruptLogError(Exception):
    """The log contains a malformed record before its final line."""


def record_to_line(record: RunLogRecord) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False, separators=(",", ":"))


def append_record(path: str | Path, record: RunLogRecord) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(record_to_line(record) + "\n")
        fh.flush()


def read_records(path: str | Path) -> tuple[list[RunLogRecord], int]:
    """Read all valid records; returns (records, clean_byte_length).

    ``clean_byte_length`` is the file offset up to which the log is intact;
    it is shorter than the file when a torn final line was dropped.
    """
    raw = Path(path).read_bytes()
    records: list[RunLogRecord] = []
    offset = 0
    lines = raw.split(b"\n")
    # A trailing complete file ends with b"", so the last element is partial
    # content only when non-empty.
    for index, line in enumerate(lines):
        is_last = index == len(lines) - 1
        if line == b"" and is_last:
            break
        try:
            record = RunLogRecord.from_dict(json.loads(line.decode("utf-8")))
        except (ValueError, KeyError, TypeError) as exc:
            if is_last or (index == len(lines) - 2 and lines[-1] == b""):
                logger.warning("dropping torn final log line (%d bytes): %s", len(line), exc)
                return records, offset
            raise CorruptLogError(f"malformed record at line {index + 1}: {exc}") from exc
        if records and record.iteration <= records[-1].iteration:
            raise CorruptLogError(
                f"iteration order violated at line {index + 1}: "
                f"{record.iteration} after {records[-1].iteration}"
            )
        records.append(record)
        offset += len(line) + 1
    return records, offset


def truncate_to(path: str | Path, byte_length: int) -> None:
    """Chop a torn tail off the log so appends continue from a clean prefix."""
    with open(path, "r+b") as fh:
        fh.truncate(byte_length)
