"""Raw-file ingestion and the buffered trace collector.

Raw chain data lives in JSON Lines files named ``<kind>_<start>-<end>.jsonl``
with inclusive block ranges. ``read_stream`` replays a file family in block
order with constant memory. ``Collector`` models the fast collection path:
a bounded in-memory buffer filled by the producer and drained by a single
background writer thread that rotates block-range-named output files.
"""

from __future__ import annotations

import json
import os
import queue
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .model import RECORD_TYPES

KINDS = ("blocks", "traces", "receipts")

_FILE_RE = re.compile(r"^(blocks|traces|receipts)_(\d+)-(\d+)\.jsonl$")


class IngestError(Exception):
    pass


class RangeError(IngestError):
    """Overlapping or gapped block ranges within a file family."""


class ParseError(IngestError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class CollectorClosed(IngestError):
    pass


@dataclass(frozen=True)
class RangedFile:
    path: Path
    kind: str
    start: int
    end: int


@dataclass
class RawFileSet:
    """Directory of block-range-named raw files, grouped by kind."""

    directory: Path
    files: dict = field(default_factory=dict)  # kind -> [RangedFile] sorted by start

    @classmethod
    def scan(cls, directory, allow_gaps: bool = False) -> "RawFileSet":
        directory = Path(directory)
        if not directory.is_dir():
            raise IngestError(f"input directory not found: {directory}")
        families: dict = {k: [] for k in KINDS}
        for entry in sorted(directory.iterdir()):
            m = _FILE_RE.match(entry.name)
            if m is None:
                continue
            kind, start, end = m.group(1), int(m.group(2)), int(m.group(3))
            if start > end:
                raise RangeError(f"{entry.name}: inverted range {start}-{end}")
            families[kind].append(RangedFile(entry, kind, start, end))
        for kind, ranged in families.items():
            ranged.sort(key=lambda rf: rf.start)
            for prev, cur in zip(ranged, ranged[1:]):
                if cur.start <= prev.end:
                    raise RangeError(
                        f"{kind}: overlapping ranges {prev.path.name} / {cur.path.name}"
                    )
                if cur.start != prev.end + 1 and not allow_gaps:
                    raise RangeError(
                        f"{kind}: gap between {prev.path.name} and {cur.path.name} "
                        "(pass allow_gaps to permit)"
                    )
        return cls(directory=directory, files=families)


def read_stream(fileset: RawFileSet, kind: str):
    """Yield parsed records of one kind in block order, one line at a time."""
    if kind not in KINDS:
        raise IngestError(f"unknown record kind: {kind}")
    record_type = RECORD_TYPES[kind]
    for ranged in fileset.files[kind]:
        with open(ranged.path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    record = record_type.from_json_obj(obj)
                except (ValueError, KeyError, TypeError) as exc:
                    raise ParseError(ranged.path, line_no, str(exc)) from exc
                if not ranged.start <= record.block_num <= ranged.end:
                    raise ParseError(
                        ranged.path,
                        line_no,
                        f"block_num {record.block_num} outside file range "
                        f"{ranged.start}-{ranged.end}",
                    )
                yield record


def read_raw_lines(fileset: RawFileSet, kind: str):
    """Like read_stream but yields raw JSON objects (no model validation)."""
    for ranged in fileset.files[kind]:
        with open(ranged.path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    yield json.loads(line)
                except ValueError as exc:
                    raise ParseError(ranged.path, line_no, str(exc)) from exc


@dataclass(frozen=True)
class CollectorConfig:
    output_dir: Path
    kind: str = "traces"
    buffer_capacity: int = 4096
    flush_interval: float = 1.0  # seconds
    records_per_file: int = 100_000

    def __post_init__(self):
        if self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be >= 1")
        if self.records_per_file < 1:
            raise ValueError("records_per_file must be >= 1")
        if self.kind not in KINDS:
            raise ValueError(f"unknown record kind: {self.kind}")


@dataclass(frozen=True)
class FlushReport:
    records_written: int
    files_written: int
    bytes_written: int


_SENTINEL = object()


class Collector:
    """Bounded buffer + asynchronous file writer.

    submit() enqueues a record and blocks when the buffer is full
    (backpressure; records are never dropped). A single background thread
    drains the buffer, serializes records as JSON lines and rotates output
    files of ~records_per_file records, named by the block range they
    actually contain. Rotation only happens at block boundaries so output
    ranges stay disjoint.
    """

    def __init__(self, config: CollectorConfig):
        self.config = config
        self._queue: queue.Queue = queue.Queue(maxsize=config.buffer_capacity)
        self._closed = False
        self._report: FlushReport | None = None
        self._error: BaseException | None = None
        self._high_water_mark = 0
        self._records_written = 0
        self._files_written = 0
        self._bytes_written = 0
        self._out: list = []  # pending lines for the current file
        self._range: tuple[int, int] | None = None
        self._part_path: Path | None = None
        self._part_fh = None
        self._part_count = 0
        self._last_flush = time.monotonic()
        os.makedirs(config.output_dir, exist_ok=True)
        self._thread = threading.Thread(target=self._writer_loop, daemon=True)
        self._thread.start()

    # -- producer side ----------------------------------------------------

    def submit(self, record) -> None:
        if self._closed:
            raise CollectorClosed("collector is closed")
        if self._error is not None:
            raise self._error
        self._queue.put(record)

    @property
    def high_water_mark(self) -> int:
        return self._high_water_mark

    def close(self) -> FlushReport:
        """Drain, flush and stop the writer. Idempotent."""
        if self._report is not None:
            return self._report
        self._closed = True
        self._queue.put(_SENTINEL)
        self._thread.join()
        if self._error is not None:
            raise self._error
        self._report = FlushReport(
            records_written=self._records_written,
            files_written=self._files_written,
            bytes_written=self._bytes_written,
        )
        return self._report

    # -- writer side -------------------------------------------------------

    def _writer_loop(self):
        try:
            while True:
                depth = self._queue.qsize()
                if depth > self._high_water_mark:
                    self._high_water_mark = depth
                record = self._queue.get()
                if record is _SENTINEL:
                    break
                self._write_record(record)
                now = time.monotonic()
                if now - self._last_flush >= self.config.flush_interval:
                    self._flush_partial()
                    self._last_flush = now
            self._finish_file()
        except BaseException as exc:  # surfaced on close()
            self._error = exc
            self._discard_partial()

    def _write_record(self, record):
        block_num = record.block_num
        if self._range is not None and self._range[1] != block_num:
            # rotate only between blocks so output ranges never overlap
            if len(self._out) + self._part_count >= self.config.records_per_file:
                self._finish_file()
        line = json.dumps(record.to_json_obj(), separators=(",", ":")) + "\n"
        self._out.append(line)
        if self._range is None:
            self._range = (block_num, block_num)
        else:
            self._range = (self._range[0], max(self._range[1], block_num))

    def _flush_partial(self):
        """Durably push buffered lines into the current .part file."""
        if not self._out:
            return
        if self._part_fh is None:
            start = self._range[0]
            self._part_path = Path(self.config.output_dir) / (
                f".{self.config.kind}_{start}.part"
            )
            self._part_fh = open(self._part_path, "w", encoding="utf-8")
            self._part_count = 0
        self._part_fh.writelines(self._out)
        self._part_fh.flush()
        self._part_count += len(self._out)
        self._out.clear()

    def _finish_file(self):
        if self._range is None:
            return
        self._flush_partial()
        self._part_fh.close()
        start, end = self._range
        final = Path(self.config.output_dir) / (
            f"{self.config.kind}_{start}-{end}.jsonl"
        )
        os.replace(self._part_path, final)
        self._records_written += self._part_count
        self._files_written += 1
        self._bytes_written += final.stat().st_size
        self._part_fh = None
        self._part_path = None
        self._part_count = 0
        self._range = None

    def _discard_partial(self):
        if self._part_fh is not None:
            try:
                self._part_fh.close()
                os.remove(self._part_path)
            except OSError:
                pass


@dataclass(frozen=True)
class BenchReport:
    buffered_rps: float
    synchronous_rps: float

    @property
    def speedup(self) -> float:
        if self.synchronous_rps == 0:
            return 0.0
        return self.buffered_rps / self.synchronous_rps


def bench_writers(workload, config: CollectorConfig) -> BenchReport:
    """Compare the buffered async writer against a per-record-durable baseline.

    The baseline serializes and fsyncs every record before accepting the
    next one, modeling collection paths coupled to synchronous storage.
    The contract is the relative rate, not absolute throughput.
    """
    records = list(workload)
    n = len(records)
    if n == 0:
        return BenchReport(buffered_rps=0.0, synchronous_rps=0.0)

    out_dir = Path(config.output_dir)
    buffered_dir = out_dir / "buffered"
    sync_dir = out_dir / "synchronous"

    t0 = time.perf_counter()
    collector = Collector(
        CollectorConfig(
            output_dir=buffered_dir,
            kind=config.kind,
            buffer_capacity=config.buffer_capacity,
            flush_interval=config.flush_interval,
            records_per_file=config.records_per_file,
        )
    )
    for record in records:
        collector.submit(record)
    collector.close()
    buffered_elapsed = time.perf_counter() - t0

    os.makedirs(sync_dir, exist_ok=True)
    sync_path = sync_dir / f"{config.kind}_sync.jsonl"
    t0 = time.perf_counter()
    with open(sync_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json_obj(), separators=(",", ":")) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
    sync_elapsed = time.perf_counter() - t0

    return BenchReport(
        buffered_rps=n / buffered_elapsed if buffered_elapsed > 0 else 0.0,
        synchronous_rps=n / sync_elapsed if sync_elapsed > 0 else 0.0,
    )
