import io
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distsent.engine import (ExternalGrouper, JobError, JobSpec, KVRecord, dump_intermediate, identity_map,
                             identity_reduce, partition_of, read_records, render_tsv, run_chain, run_job,
                             sorted_bytes, spill_group, write_records)


def wc_map(key, value):
    return [(w.encode(), b"1") for w in value.decode().split()]


def wc_reduce(key, values):
    return [(key, str(len(values)).encode())]


WORDCOUNT = JobSpec("wordcount", wc_map, wc_reduce, num_reducers=3)


def lines(*texts):
    return [(str(i).encode(), t.encode()) for i, t in enumerate(texts)]


def as_dict(records):
    return {k.decode(): v.decode() for k, v in records}


@pytest.mark.parametrize("workers", [1, 4])
def test_word_count(workers):
    assert as_dict(run_job(WORDCOUNT, lines("a b", "a"), workers=workers)) == {"a": "2", "b": "1"}


def test_empty_input():
    assert run_job(WORDCOUNT, []) == []
    assert run_chain([WORDCOUNT, WORDCOUNT], []) == []


def test_chain_of_one_is_run_job():
    recs = lines("x y z", "y z", "z")
    assert run_chain([WORDCOUNT], recs) == run_job(WORDCOUNT, recs)


def test_identity_chain_is_permutation():
    recs = lines("q", "w", "e", "q")
    ident = JobSpec("id", identity_map, identity_reduce, 5)
    out = run_chain([ident, ident], recs)
    assert sorted(out) == sorted(recs)


def test_values_sorted_within_reduce():
    seen = {}

    def red(key, values):
        seen[key] = list(values)
        return []

    spec = JobSpec("s", lambda k, v: [(b"k", v)], red, 2)
    run_job(spec, [(b"1", b"c"), (b"2", b"a"), (b"3", b"b")])
    assert seen[b"k"] == [b"a", b"b", b"c"]


def test_output_is_partition_major_and_sorted():
    out = run_job(WORDCOUNT, lines("d c b a e f g"))
    parts = [partition_of(k, 3) for k, _ in out]
    assert parts == sorted(parts)
    for p in set(parts):
        keys = [k for (k, _), q in zip(out, parts) if q == p]
        assert keys == sorted(keys)


def test_barrier_reduce_sees_every_shard():
    # each input record lands in a separate map shard with 4 workers
    counts = as_dict(run_job(WORDCOUNT, lines("k", "k", "k", "k", "k"), workers=4))
    assert counts == {"k": "5"}


def test_each_key_reduced_once():
    calls = Counter()

    def red(key, values):
        calls[key] += 1
        return []

    run_job(JobSpec("c", wc_map, red, 7), lines("a b c", "a b", "c c c"))
    assert set(calls.values()) == {1}


def test_map_error_names_job_and_key():
    def bad(key, value):
        if value == b"boom":
            raise ValueError("nope")
        return [(key, value)]

    with pytest.raises(JobError) as err:
        run_job(JobSpec("explode", bad, identity_reduce), [(b"k1", b"ok"), (b"k2", b"boom")])
    assert err.value.job == "explode" and err.value.key == b"k2"
    assert "nope" in str(err.value)


def test_reduce_error_carries_chain_position():
    def bad_reduce(key, values):
        raise KeyError("missing")

    chain = [WORDCOUNT, JobSpec("second", identity_map, bad_reduce, 2)]
    with pytest.raises(JobError) as err:
        run_chain(chain, lines("a"))
    assert err.value.position == 1 and err.value.job == "second" and err.value.key == b"a"
    assert "chain position 1" in str(err.value)


def test_parallel_error_propagates():
    def bad(key, value):
        raise RuntimeError("x")

    with pytest.raises(JobError):
        run_job(JobSpec("p", bad, identity_reduce), lines("a", "b"), workers=2)


def test_empty_key_rejected():
    with pytest.raises(JobError):
        run_job(JobSpec("e", lambda k, v: [(b"", v)], identity_reduce), lines("a"))


def test_invalid_arguments():
    with pytest.raises(ValueError):
        JobSpec("z", identity_map, identity_reduce, 0)
    with pytest.raises(ValueError):
        run_job(WORDCOUNT, [], workers=0)
    with pytest.raises(ValueError):
        spill_group([], budget=0)


def test_record_file_roundtrip():
    recs = [(b"k\t1", b"v\n"), (b"\x00", b""), (b"key", bytes(range(256)))]
    buf = io.BytesIO()
    n = write_records(buf, recs)
    assert n == len(buf.getvalue()) == sum(8 + len(k) + len(v) for k, v in recs)
    buf.seek(0)
    assert list(read_records(buf)) == [KVRecord(*r) for r in recs]


def test_truncated_file():
    buf = io.BytesIO()
    write_records(buf, [(b"abc", b"def")])
    with pytest.raises(IOError):
        list(read_records(io.BytesIO(buf.getvalue()[:-1])))


class TestSpill:
    def test_no_spill_when_budget_is_large(self, tmp_path):
        g = ExternalGrouper([(b"a", b"1"), (b"b", b"2")], budget=1 << 20, tmpdir=tmp_path)
        assert g.runs == 0
        assert list(g) == [(b"a", [b"1"]), (b"b", [b"2"])]
        assert list(tmp_path.iterdir()) == []

    def test_small_budget_equals_in_memory(self, tmp_path):
        rng = random.Random(5)
        pairs = [(f"key{rng.randrange(500)}".encode(), rng.randbytes(rng.randrange(1, 90))) for _ in range(22000)]
        assert sum(len(k) + len(v) for k, v in pairs) > 1 << 20
        spilled = ExternalGrouper(pairs, budget=1024, tmpdir=tmp_path)
        assert spilled.runs > 100
        assert list(spilled) == list(ExternalGrouper(pairs))

    def test_zero_records(self):
        assert list(spill_group([], budget=1)) == []

    @given(st.lists(st.tuples(st.binary(min_size=1, max_size=4), st.binary(max_size=6)), max_size=80),
           st.integers(1, 64))
    @settings(max_examples=100, deadline=None)
    def test_property(self, pairs, budget):
        groups = list(spill_group(pairs, budget))
        expect = {}
        for k, v in pairs:
            expect.setdefault(k, []).append(v)
        assert groups == [(k, sorted(expect[k])) for k in sorted(expect)]

    def test_job_with_tiny_budget(self):
        recs = lines(*(" ".join(f"w{(i * j) % 37}" for j in range(20)) for i in range(50)))
        assert run_job(WORDCOUNT, recs, spill_budget=64) == run_job(WORDCOUNT, recs)


@given(st.lists(st.text(alphabet="abcdef ", max_size=20), max_size=25), st.sampled_from([1, 2, 3]),
       st.sampled_from([1, 5, 12]))
@settings(max_examples=15, deadline=None)
def test_worker_and_reducer_invariance(texts, workers, reducers):
    spec = JobSpec("wc", wc_map, wc_reduce, reducers)
    base = sorted_bytes(run_job(JobSpec("wc", wc_map, wc_reduce, 1), lines(*texts)))
    assert sorted_bytes(run_job(spec, lines(*texts), workers=workers)) == base


def test_closures_run_in_workers():
    offset = 7

    def m(key, value):
        return [(key, str(int(value) + offset).encode())]

    out = run_job(JobSpec("cl", m, identity_reduce, 3), [(b"a", b"1"), (b"b", b"2")], workers=2)
    assert as_dict(out) == {"a": "8", "b": "9"}


def test_intermediate_dump(tmp_path):
    recs = run_chain([WORDCOUNT], lines("a b"), keep_intermediates=tmp_path)
    assert (tmp_path / "01-wordcount.bin").is_file()
    with open(tmp_path / "01-wordcount.bin", "rb") as fh:
        assert list(read_records(fh)) == recs
    tsv = (tmp_path / "01-wordcount.tsv").read_text()
    assert tsv == render_tsv(recs)
    assert dump_intermediate(tmp_path, "x", []).stat().st_size == 0
