"""The classification job chain.

1. feature extraction: tweets -> inverted index ``feature -> [(tweet, weight, class)]``
2. vector construction: index -> one vector per tweet, plus the candidate
   training list of every test tweet
3. distance computation: keyed by training id, Euclidean distance to every
   test vector that lists it
4. classification: k nearest neighbours per test tweet, majority vote

Punctuation weights are normalized by the corpus-wide maxima of the other
three families; those maxima come from a small aggregation job run over the
index between jobs 1 and 2.
"""

from __future__ import annotations

import logging
import math
import pickle
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .bloom import BloomConfig, KeyEncoder
from .corpus import NEUTRAL, DataError, SentimentLabel, Tweet
from .engine import DEFAULT_SPILL_BUDGET, JobSpec, KVRecord, dump_intermediate, run_job
from .features import (
    Family,
    FamilyMaxima,
    FeatureConfig,
    VocabStats,
    build_vocab_stats,
    extract_features,
    feature_weight,
    punct_weight,
)

log = logging.getLogger(__name__)

_dumps = pickle.dumps
_loads = pickle.loads
_PROTO = pickle.HIGHEST_PROTOCOL


class ConsistencyError(RuntimeError):
    """Pipeline state that correct upstream jobs cannot produce."""


@dataclass(frozen=True)
class PipelineConfig:
    k: int = 50
    features: FeatureConfig = field(default_factory=FeatureConfig)
    bloom: BloomConfig = field(default_factory=BloomConfig)
    workers: int = 1
    reducers: int = 12
    spill_budget: int = DEFAULT_SPILL_BUDGET
    keep_intermediates: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def with_(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Neighbor:
    train_id: str
    label: str
    distance: float


@dataclass
class ClassificationResult:
    verdicts: dict[str, str]
    matched: set[str]
    order: list[str]

    @property
    def no_match_fraction(self) -> float:
        if not self.order:
            return 0.0
        return sum(1 for t in self.order if t not in self.matched) / len(self.order)

    def rows(self):
        return [(t, self.verdicts[t]) for t in self.order]


# ------------------------------------------------------------------ helpers

def euclidean(u: dict[str, float], v: dict[str, float]) -> float:
    """Distance over the union of dimensions, absent = 0. Order independent."""
    terms = []
    for key, a in u.items():
        d = a - v.get(key, 0.0)
        terms.append(d * d)
    for key, b in v.items():
        if key not in u:
            terms.append(b * b)
    return math.sqrt(math.fsum(terms))


class SquaredVector:
    """A vector with its per-entry squares cached, for repeated distances.

    Because fsum is exact, summing every square of both vectors and then
    swapping ``a*a + b*b`` for ``(a - b)**2`` on shared keys gives the same
    correctly rounded result as ``euclidean``.
    """

    __slots__ = ("entries", "squares")

    def __init__(self, entries):
        self.entries = dict(entries)
        self.squares = [w * w for w in self.entries.values()]

    def distance(self, other: "SquaredVector") -> float:
        u, v = self.entries, other.entries
        terms = self.squares + other.squares
        for key in u.keys() & v.keys():
            a, b = u[key], v[key]
            d = a - b
            terms.append(-(a * a))
            terms.append(-(b * b))
            terms.append(d * d)
        return math.sqrt(math.fsum(terms))


def vote(neighbors: Iterable[Neighbor], k: int) -> str:
    """Majority label of the k nearest; ties by summed distance, then name."""
    nearest = sorted(neighbors, key=lambda n: (n.distance, n.train_id))[:k]
    if not nearest:
        return NEUTRAL
    by_label: dict[str, list[float]] = defaultdict(list)
    for n in nearest:
        by_label[n.label].append(n.distance)
    return min(by_label, key=lambda lab: (-len(by_label[lab]), math.fsum(by_label[lab]), lab))


def format_distance(d: float) -> str:
    return format(d, ".17g")


def _label_name(label: SentimentLabel | None) -> str | None:
    return None if label is None else label.name


def tweet_records(tweets: Iterable[Tweet]) -> list[KVRecord]:
    """Job 1 input. The raw text is dropped; nothing downstream reads it."""
    out = []
    for t in tweets:
        slim = Tweet(t.id, t.label, tuple(t.tokens), "", t.caps_words, ())
        out.append(KVRecord(t.id.encode("utf-8"), _dumps(slim, _PROTO)))
    return out


def check_disjoint_ids(train: Sequence[Tweet], test: Sequence[Tweet]) -> None:
    overlap = {t.id for t in train} & {t.id for t in test}
    if overlap:
        sample = ", ".join(sorted(overlap)[:5])
        raise DataError(f"{len(overlap)} tweet ids appear in both training and test data: {sample}")


# --------------------------------------------------------------------- jobs

def job1_feature_extraction(stats: VocabStats, cfg: PipelineConfig) -> JobSpec:
    fcfg = cfg.features
    encoder = KeyEncoder(cfg.bloom) if cfg.bloom.enabled else None
    alpha, threshold = fcfg.alpha, fcfg.threshold

    def map_fn(key, value):
        tweet = _loads(value)
        cls = _label_name(tweet.label)
        for f in extract_features(tweet, stats, fcfg, encoder):
            yield f.key.encode("utf-8"), _dumps((f.tweet_id, f.family.value, f.n_exact, f.n_approx, cls), _PROTO)

    def reduce_fn(key, values):
        occ = [_loads(v) for v in values]
        family = min(o[1] for o in occ)
        if family == Family.PUNCT.value:
            m_p = max(o[2] for o in occ)
            postings = tuple((tid, n, cls) for tid, _, n, _, cls in occ)
            return [(key, _dumps((family, m_p, postings), _PROTO))]
        total = sum(o[2] for o in occ)
        if total == 0:  # a pattern never seen in exact form
            return []
        postings = []
        for tid, _, ex, ap, cls in occ:
            w = feature_weight(ex, ap, total, alpha)
            if w >= threshold:
                postings.append((tid, w, cls))
        if not postings:
            return []
        return [(key, _dumps((family, None, tuple(postings)), _PROTO))]

    return JobSpec("feature-extraction", map_fn, reduce_fn, cfg.reducers)


def family_maxima_job(cfg: PipelineConfig) -> JobSpec:
    def map_fn(key, value):
        family, _, postings = _loads(value)
        if family == Family.PUNCT.value:
            return []
        return [(family.encode(), _dumps(max(p[1] for p in postings), _PROTO))]

    def reduce_fn(key, values):
        return [(key, _dumps(max(_loads(v) for v in values), _PROTO))]

    return JobSpec("family-maxima", map_fn, reduce_fn, cfg.reducers)


def maxima_from_records(records) -> FamilyMaxima:
    m = FamilyMaxima()
    for k, v in records:
        m.update(Family(k.decode()), _loads(v))
    return m


def job2_vector_construction(maxima: FamilyMaxima, cfg: PipelineConfig) -> JobSpec:
    threshold = cfg.features.threshold
    usable = maxima.usable

    def map_fn(key, value):
        family, m_p, postings = _loads(value)
        fkey = key.decode("utf-8")
        out = []
        if family == Family.PUNCT.value:
            if not usable:
                return out
            for tid, n, cls in postings:
                w = punct_weight(n, m_p, maxima.word, maxima.ngram, maxima.pattern)
                if w >= threshold:
                    out.append((tid.encode("utf-8"), _dumps(("f", fkey, w, cls), _PROTO)))
            return out
        training = tuple((tid, cls) for tid, _, cls in postings if cls is not None)
        for tid, w, cls in postings:
            out.append((tid.encode("utf-8"), _dumps(("f", fkey, w, cls), _PROTO)))
        if training:
            payload = _dumps(("t", training), _PROTO)
            for tid, _, cls in postings:
                if cls is None:
                    out.append((tid.encode("utf-8"), payload))
        return out

    def reduce_fn(key, values):
        entries = {}
        matches = set()
        cls = None
        for v in values:
            rec = _loads(v)
            if rec[0] == "f":
                entries[rec[1]] = rec[2]
                cls = rec[3]
            else:
                matches.update(rec[1])
        vector = tuple(sorted(entries.items()))
        match_list = None if cls is not None else tuple(sorted(matches))
        return [(key, _dumps((cls, vector, match_list), _PROTO))]

    return JobSpec("vector-construction", map_fn, reduce_fn, cfg.reducers)


def job3_distance(cfg: PipelineConfig) -> JobSpec:
    def map_fn(key, value):
        cls, vector, match_list = _loads(value)
        if cls is not None:
            return [(key, _dumps(("v", cls, vector), _PROTO))]
        if match_list:
            payload = _dumps(("q", key.decode("utf-8"), vector), _PROTO)
            return [(train_id.encode("utf-8"), payload) for train_id, _ in match_list]
        return [(key, _dumps(("e",), _PROTO))]

    # decoded query vectors, shared across reduce calls in one worker
    memo: dict[bytes, tuple] = {}

    def reduce_fn(key, values):
        train = None
        queries = []
        out = []
        for v in values:
            rec = memo.get(v)
            if rec is None:
                rec = _loads(v)
                if rec[0] == "q":
                    rec = (rec[0], rec[1], SquaredVector(rec[2]))
                    memo[v] = rec
            if rec[0] == "v":
                train = rec
            elif rec[0] == "q":
                queries.append(rec)
            else:
                out.append((key, v))
        if queries and train is None:
            raise ConsistencyError(f"training id {key.decode()!r} is listed as a match but has no vector")
        if train is not None:
            train_id = key.decode("utf-8")
            tv = SquaredVector(train[2])
            label = train[1]
            for _, test_id, qv in queries:
                out.append((test_id.encode("utf-8"),
                            _dumps(("n", train_id, label, format_distance(qv.distance(tv))), _PROTO)))
        return out

    return JobSpec("distance-computation", map_fn, reduce_fn, cfg.reducers)


def job4_classify(cfg: PipelineConfig) -> JobSpec:
    k = cfg.k

    def map_fn(key, value):
        return [(key, value)]

    def reduce_fn(key, values):
        neighbors = []
        for v in values:
            rec = _loads(v)
            if rec[0] == "n":
                neighbors.append(Neighbor(rec[1], rec[2], float(rec[3])))
        label = vote(neighbors, k)
        return [(key, _dumps((label, bool(neighbors)), _PROTO))]

    return JobSpec("sentiment-classification", map_fn, reduce_fn, cfg.reducers)


# ------------------------------------------------------------------- driver

@dataclass
class ChainOutputs:
    """Every job's output, for inspection and worker-invariance checks."""

    index: list[KVRecord]
    maxima: list[KVRecord]
    vectors: list[KVRecord]
    distances: list[KVRecord]
    verdicts: list[KVRecord]

    def stages(self):
        return [("index", self.index), ("maxima", self.maxima), ("vectors", self.vectors),
                ("distances", self.distances), ("verdicts", self.verdicts)]


class PipelineRun:
    """Jobs 1-3 run once on construction; ``classify(k)`` runs job 4.

    Only the last job depends on k, so a sweep over k reuses the distances.
    """

    def __init__(self, train: Sequence[Tweet], test: Sequence[Tweet], cfg: PipelineConfig | None = None,
                 stats: VocabStats | None = None):
        cfg = cfg or PipelineConfig()
        if not train:
            raise ValueError("training set is empty")
        if any(t.label is None for t in train):
            raise ValueError("every training tweet needs a label")
        check_disjoint_ids(train, test)
        self.cfg = cfg
        self.test_ids = [t.id for t in test]
        test = [t if t.label is None else replace(t, label=None) for t in test]
        self.stats = stats or build_vocab_stats(train, cfg.features)

        self.index = self._stage("1-feature-extraction", job1_feature_extraction(self.stats, cfg),
                                 tweet_records(list(train) + test))
        self.maxima_records = self._stage("1b-family-maxima", family_maxima_job(cfg), self.index)
        self.maxima = maxima_from_records(self.maxima_records)
        self.vectors = self._stage("2-vector-construction", job2_vector_construction(self.maxima, cfg), self.index)
        self.distances = self._stage("3-distance-computation", job3_distance(cfg), self.vectors)

    def _stage(self, stem, spec, records):
        cfg = self.cfg
        out = run_job(spec, records, workers=cfg.workers, spill_budget=cfg.spill_budget)
        if cfg.keep_intermediates:
            dump_intermediate(cfg.keep_intermediates, stem, out)
        return out

    def verdict_records(self, k: int | None = None) -> list[KVRecord]:
        k = self.cfg.k if k is None else k
        stem = "4-sentiment-classification" + ("" if k == self.cfg.k else f"-k{k}")
        return self._stage(stem, job4_classify(self.cfg.with_(k=k)), self.distances)

    def classify(self, k: int | None = None) -> "ClassificationResult":
        verdicts, matched = {}, set()
        for key, v in self.verdict_records(k):
            label, has_match = _loads(v)
            tid = key.decode("utf-8")
            verdicts[tid] = label
            if has_match:
                matched.add(tid)
        for tid in self.test_ids:
            verdicts.setdefault(tid, NEUTRAL)
        return ClassificationResult(verdicts, matched, list(self.test_ids))

    def outputs(self, k: int | None = None) -> ChainOutputs:
        return ChainOutputs(self.index, self.maxima_records, self.vectors, self.distances, self.verdict_records(k))


def run_pipeline(train, test, cfg: PipelineConfig | None = None, stats: VocabStats | None = None) -> ChainOutputs:
    return PipelineRun(train, test, cfg, stats).outputs()


def classify_corpus(train: Sequence[Tweet], test: Sequence[Tweet], cfg: PipelineConfig | None = None,
                    stats: VocabStats | None = None) -> ClassificationResult:
    """Label every test tweet; tweets without matching vectors get ``neu``."""
    return PipelineRun(train, test, cfg, stats).classify()


def decode_vectors(records) -> dict[str, tuple]:
    """Job 2 output as ``tweet_id -> (class, entries, match_list)``."""
    return {k.decode("utf-8"): _loads(v) for k, v in records}


def write_verdicts(path, result: ClassificationResult) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
        for tid, label in result.rows():
            fh.write(f"{tid}\t{label}\n")
