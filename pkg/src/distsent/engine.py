"""In-process map/shuffle/reduce engine.

A job maps every input record, hash-partitions the emissions over
``num_reducers`` partitions, groups each partition by key (spilling sorted
runs to disk when the grouping buffer exceeds its byte budget) and calls the
reduce function once per key with the values in sorted byte order.

With ``workers > 1`` the map and reduce phases run in forked worker
processes. Job functions are inherited through ``fork`` rather than pickled,
so closures are fine.
"""

from __future__ import annotations

import heapq
import io
import logging
import multiprocessing as mp
import os
import pickle
import struct
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import groupby
from operator import itemgetter
from pathlib import Path
from typing import Callable, Iterable, Iterator, NamedTuple

from .hashing import PARTITION_SEED, hash64

log = logging.getLogger(__name__)

DEFAULT_SPILL_BUDGET = 64 * 1024 * 1024
_RECORD_OVERHEAD = 8  # two u32 length prefixes, same as the on-disk format
_U32 = struct.Struct("<I")


class KVRecord(NamedTuple):
    key: bytes
    value: bytes


MapFn = Callable[[bytes, bytes], Iterable[tuple[bytes, bytes]]]
ReduceFn = Callable[[bytes, list[bytes]], Iterable[tuple[bytes, bytes]]]


class JobError(RuntimeError):
    """A map or reduce function raised. Carries the job name and offending key."""

    def __init__(self, job: str, key: bytes, cause: str, position: int | None = None):
        super().__init__(job, key, cause, position)
        self.job = job
        self.key = key
        self.cause = cause
        self.position = position

    def __str__(self):
        where = f"chain position {self.position}, " if self.position is not None else ""
        return f"{where}job {self.job!r} failed on key {self.key!r}: {self.cause}"


@dataclass
class JobSpec:
    name: str
    map_fn: MapFn
    reduce_fn: ReduceFn
    num_reducers: int = 12

    def __post_init__(self):
        if self.num_reducers < 1:
            raise ValueError("num_reducers must be >= 1")


def identity_map(key, value):
    return [(key, value)]


def identity_reduce(key, values):
    return [(key, v) for v in values]


# ---------------------------------------------------------------- record files

def write_records(fh, records: Iterable[tuple[bytes, bytes]]) -> int:
    """Length-prefixed binary: u32 klen, key, u32 vlen, value. Returns bytes written."""
    n = 0
    pack = _U32.pack
    for k, v in records:
        fh.write(pack(len(k)))
        fh.write(k)
        fh.write(pack(len(v)))
        fh.write(v)
        n += 8 + len(k) + len(v)
    return n


def read_records(fh) -> Iterator[KVRecord]:
    read = fh.read
    unpack = _U32.unpack
    while True:
        head = read(4)
        if not head:
            return
        if len(head) < 4:
            raise IOError("truncated record file")
        (klen,) = unpack(head)
        k = read(klen)
        (vlen,) = unpack(read(4))
        v = read(vlen)
        if len(k) != klen or len(v) != vlen:
            raise IOError("truncated record file")
        yield KVRecord(k, v)


def render_tsv(records: Iterable[tuple[bytes, bytes]], decode_value=None) -> str:
    """Debug rendering, one ``key<TAB>value`` line per record."""
    lines = []
    for k, v in records:
        if decode_value is not None:
            shown = repr(decode_value(v))
        else:
            try:
                shown = repr(pickle.loads(v))
            except Exception:
                shown = v.hex()
        lines.append(f"{k.decode('utf-8', 'backslashreplace')}\t{shown}")
    return "\n".join(lines) + ("\n" if lines else "")


# ------------------------------------------------------------------- shuffle

class ExternalGrouper:
    """Groups (key, value) pairs by key under a byte budget.

    Pairs are buffered until the buffer holds ``budget`` bytes; the buffer
    is then sorted and written out as a run. Iteration merges all runs and
    yields ``(key, values)`` with values in ascending byte order.
    """

    def __init__(self, emissions: Iterable[tuple[bytes, bytes]], budget: int = DEFAULT_SPILL_BUDGET,
                 tmpdir: str | os.PathLike | None = None):
        if budget <= 0:
            raise ValueError("spill budget must be positive")
        self.budget = budget
        self.tmpdir = tmpdir
        self.runs = 0
        self._files = []
        self._buffer: list[tuple[bytes, bytes]] = []
        used = 0
        for k, v in emissions:
            self._buffer.append((k, v))
            used += len(k) + len(v) + _RECORD_OVERHEAD
            if used > budget:
                self._spill()
                used = 0
        if self._files and self._buffer:
            self._spill()

    def _spill(self):
        self._buffer.sort()
        fh = tempfile.TemporaryFile(dir=self.tmpdir, prefix="distsent-spill-")
        write_records(fh, self._buffer)
        fh.seek(0)
        self._files.append(fh)
        self._buffer = []
        self.runs += 1

    def __iter__(self) -> Iterator[tuple[bytes, list[bytes]]]:
        if self._files:
            stream = heapq.merge(*(read_records(fh) for fh in self._files))
        else:
            self._buffer.sort()
            stream = iter(self._buffer)
        try:
            for key, group in groupby(stream, key=itemgetter(0)):
                yield key, [v for _, v in group]
        finally:
            for fh in self._files:
                fh.close()
            self._files = []


def spill_group(emissions, budget: int = DEFAULT_SPILL_BUDGET, tmpdir=None) -> ExternalGrouper:
    return ExternalGrouper(emissions, budget, tmpdir)


def partition_of(key: bytes, num_reducers: int) -> int:
    if num_reducers == 1:
        return 0
    return hash64(key, PARTITION_SEED) % num_reducers


# ------------------------------------------------------------------ execution

# Inherited by forked workers: (spec, shards-or-partitions, budget, tmpdir).
_TASK_STATE = None


def _map_task(index: int) -> list[list[tuple[bytes, bytes]]]:
    spec, shards = _TASK_STATE[0], _TASK_STATE[1]
    return _run_map(spec, shards[index])


def _reduce_task(index: int) -> list[tuple[bytes, bytes]]:
    spec, parts, budget, tmpdir = _TASK_STATE
    return _run_reduce(spec, parts[index], budget, tmpdir)


def _run_map(spec: JobSpec, shard) -> list[list[tuple[bytes, bytes]]]:
    r = spec.num_reducers
    out = [[] for _ in range(r)]
    map_fn = spec.map_fn
    seen: dict[bytes, int] = {}
    for key, value in shard:
        try:
            emitted = map_fn(key, value)
            for k, v in emitted:
                p = seen.get(k)
                if p is None:
                    if not k:
                        raise ValueError("empty key emitted")
                    p = seen[k] = partition_of(k, r)
                out[p].append((k, v))
        except JobError:
            raise
        except Exception as exc:  # noqa: BLE001 - reported with context
            raise JobError(spec.name, key, f"map: {type(exc).__name__}: {exc}") from None
    return out


def _run_reduce(spec: JobSpec, emissions, budget, tmpdir) -> list[tuple[bytes, bytes]]:
    out = []
    reduce_fn = spec.reduce_fn
    for key, values in spill_group(emissions, budget, tmpdir):
        try:
            out.extend(reduce_fn(key, values))
        except JobError:
            raise
        except Exception as exc:  # noqa: BLE001
            raise JobError(spec.name, key, f"reduce: {type(exc).__name__}: {exc}") from None
    return out


def _shards(records: list, n: int) -> list[list]:
    size, extra = divmod(len(records), n)
    shards, start = [], 0
    for i in range(n):
        end = start + size + (1 if i < extra else 0)
        shards.append(records[start:end])
        start = end
    return shards


def _fork_map(fn, n_tasks: int, workers: int):
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=min(workers, n_tasks), mp_context=ctx) as pool:
        return list(pool.map(fn, range(n_tasks)))


def run_job(spec: JobSpec, records: Iterable[tuple[bytes, bytes]], workers: int = 1,
            spill_budget: int = DEFAULT_SPILL_BUDGET, tmpdir=None) -> list[KVRecord]:
    """Run one job. Output is partition-major, key-sorted within a partition."""
    global _TASK_STATE
    if workers < 1:
        raise ValueError("workers must be >= 1")
    records = list(records)
    parallel = workers > 1 and "fork" in mp.get_all_start_methods()

    shards = _shards(records, workers if parallel else 1)
    if parallel:
        _TASK_STATE = (spec, shards)
        try:
            mapped = _fork_map(_map_task, len(shards), workers)
        finally:
            _TASK_STATE = None
    else:
        mapped = [_run_map(spec, shard) for shard in shards]

    # barrier: every map task has finished before any partition is reduced
    partitions = []
    for p in range(spec.num_reducers):
        if len(mapped) == 1:
            partitions.append(mapped[0][p])
        else:
            partitions.append([kv for task_out in mapped for kv in task_out[p]])
    del mapped

    if parallel and spec.num_reducers > 1:
        _TASK_STATE = (spec, partitions, spill_budget, tmpdir)
        try:
            reduced = _fork_map(_reduce_task, len(partitions), workers)
        finally:
            _TASK_STATE = None
    else:
        reduced = [_run_reduce(spec, part, spill_budget, tmpdir) for part in partitions]

    out = [KVRecord(k, v) for part in reduced for k, v in part]
    log.debug("job %s: %d in, %d out", spec.name, len(records), len(out))
    return out


def run_chain(jobs: list[JobSpec], records, workers: int = 1, spill_budget: int = DEFAULT_SPILL_BUDGET,
              keep_intermediates: str | os.PathLike | None = None, tmpdir=None) -> list[KVRecord]:
    """Feed each job's output to the next one."""
    current = list(records)
    for position, spec in enumerate(jobs):
        try:
            current = run_job(spec, current, workers, spill_budget, tmpdir)
        except JobError as err:
            err.position = position
            raise
        if keep_intermediates is not None:
            dump_intermediate(keep_intermediates, f"{position + 1:02d}-{spec.name}", current)
    return current


def dump_intermediate(directory, stem: str, records: list[tuple[bytes, bytes]]) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    path = d / f"{stem}.bin"
    with open(path, "wb") as fh:
        write_records(fh, records)
    (d / f"{stem}.tsv").write_text(render_tsv(records), encoding="utf-8")
    return path


def sorted_bytes(records: Iterable[tuple[bytes, bytes]]) -> bytes:
    """Canonical serialization of an output as a sorted multiset."""
    buf = io.BytesIO()
    write_records(buf, sorted(records))
    return buf.getvalue()
