"""Experimental protocol: stratified k-fold cross-validation, per-class and
macro F1, no-match accounting, feature-vector compression and scaling runs."""

from __future__ import annotations

import enum
import math
import random
import struct
import time
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .bloom import BloomConfig, KeyEncoder
from .corpus import NEUTRAL, DataError, LabelKind, Tweet
from .features import build_vocab_stats, compute_weights, extract_features
from .pipeline import PipelineConfig, PipelineRun

# k values characterized by the reference experiments
CHARACTERIZED_K = (50, 100, 150, 200)


class Setting(enum.Enum):
    MULTICLASS = "multiclass"
    BINARY = "binary"


class EvalError(DataError):
    """Dataset unusable for the requested protocol."""


@dataclass
class FoldPlan:
    num_folds: int
    assignment: dict[str, int]
    seed: int

    def fold(self, i: int) -> set[str]:
        return {t for t, f in self.assignment.items() if f == i}

    def sizes(self) -> list[int]:
        c = Counter(self.assignment.values())
        return [c.get(i, 0) for i in range(self.num_folds)]


def make_folds(labeled: Iterable[Tweet], num_folds: int = 10, seed: int = 0) -> FoldPlan:
    """Stratified assignment: per class, shuffle then deal round-robin.

    The dealing offset carries over between classes so fold sizes stay
    within one of each other overall as well.
    """
    if num_folds < 2:
        raise EvalError("need at least 2 folds")
    by_class: dict[str, list[str]] = defaultdict(list)
    for t in labeled:
        if t.label is None:
            raise EvalError(f"tweet {t.id!r} has no label")
        by_class[t.label.name].append(t.id)
    rng = random.Random(seed)
    assignment: dict[str, int] = {}
    offset = 0
    for name in sorted(by_class):
        ids = sorted(by_class[name])
        if len(ids) < num_folds:
            raise EvalError(f"class {name!r} has {len(ids)} tweets, fewer than {num_folds} folds")
        rng.shuffle(ids)
        for i, tid in enumerate(ids):
            assignment[tid] = (offset + i) % num_folds
        offset = (offset + len(ids)) % num_folds
    return FoldPlan(num_folds, assignment, seed)


# ------------------------------------------------------------------ scoring

@dataclass(frozen=True)
class ClassScore:
    precision: float
    recall: float
    f1: float


def score(truth: dict[str, str], predicted: dict[str, str], classes: Sequence[str]) -> dict[str, ClassScore]:
    """Per-class precision/recall/F1. Predictions outside ``classes`` are plain errors."""
    tp, pred_n, true_n = Counter(), Counter(), Counter()
    for tid, gold in truth.items():
        p = predicted[tid]
        true_n[gold] += 1
        pred_n[p] += 1
        if p == gold:
            tp[gold] += 1
    out = {}
    for c in classes:
        prec = tp[c] / pred_n[c] if pred_n[c] else 0.0
        rec = tp[c] / true_n[c] if true_n[c] else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out[c] = ClassScore(prec, rec, f1)
    return out


def macro_f1(scores: dict[str, ClassScore]) -> float:
    return sum(s.f1 for s in scores.values()) / len(scores) if scores else 0.0


def random_verdicts(test_ids: Iterable[str], classes: Sequence[str], seed: int = 0) -> dict[str, str]:
    """Uniform random labels, the chance baseline."""
    rng = random.Random(seed)
    classes = list(classes)
    return {t: rng.choice(classes) for t in test_ids}


# --------------------------------------------------------------- evaluation

@dataclass
class EvalReport:
    setting: Setting
    bloom: bool
    k: int
    per_class: dict[str, ClassScore]
    macro_f1: float
    no_match_fraction: float
    random_baseline: float
    n_test: int = 0
    fold_seed: int = 0
    extrapolated_k: bool = False
    per_label_macro: dict[str, float] = field(default_factory=dict)

    def summary(self) -> str:
        lines = [f"setting={self.setting.value} bloom={self.bloom} k={self.k} fold_seed={self.fold_seed}",
                 f"macro_f1={self.macro_f1:.4f} random_baseline={self.random_baseline:.4f} "
                 f"no_match_fraction={self.no_match_fraction:.4f} n_test={self.n_test}"]
        if self.extrapolated_k:
            lines.append(f"note: k={self.k} lies outside the characterized range {CHARACTERIZED_K}")
        for c, s in sorted(self.per_class.items()):
            lines.append(f"  {c}\tP={s.precision:.4f}\tR={s.recall:.4f}\tF1={s.f1:.4f}")
        return "\n".join(lines) + "\n"

    def tsv(self) -> str:
        rows = ["# " + line for line in self.summary().splitlines()[:2]]
        rows.append("class\tprecision\trecall\tf1")
        for c, s in sorted(self.per_class.items()):
            rows.append(f"{c}\t{s.precision:.6f}\t{s.recall:.6f}\t{s.f1:.6f}")
        rows.append(f"macro\t\t\t{self.macro_f1:.6f}")
        return "\n".join(rows) + "\n"


def _hide(t: Tweet) -> Tweet:
    return replace(t, label=None)


@dataclass
class _FoldOutcome:
    predictions: dict[str, dict[str, str]]  # k -> test id -> label
    unmatched: int
    n_test: int


def _run_fold(tweets: Sequence[Tweet], plan: FoldPlan, i: int, cfg: PipelineConfig, ks) -> _FoldOutcome:
    test = [t for t in tweets if plan.assignment[t.id] == i]
    train = [t for t in tweets if plan.assignment[t.id] != i]
    if not test or not train:
        raise EvalError(f"fold {i} is empty")
    run = PipelineRun(train, [_hide(t) for t in test], cfg)
    results = {k: run.classify(k) for k in ks}
    # the match lists do not depend on k
    first = results[ks[0]]
    unmatched = len(first.order) - len(first.matched)
    return _FoldOutcome({k: r.verdicts for k, r in results.items()}, unmatched, len(test))


def _cross_validate_many(tweets: Sequence[Tweet], plan: FoldPlan, cfg: PipelineConfig, ks,
                         parallel_folds: bool = False):
    folds = range(plan.num_folds)
    if parallel_folds:
        with ThreadPoolExecutor() as pool:
            outcomes = list(pool.map(lambda i: _run_fold(tweets, plan, i, cfg, ks), folds))
    else:
        outcomes = [_run_fold(tweets, plan, i, cfg, ks) for i in folds]
    merged = {k: {} for k in ks}
    for o in outcomes:
        for k in ks:
            merged[k].update(o.predictions[k])
    unmatched = sum(o.unmatched for o in outcomes)
    n_test = sum(o.n_test for o in outcomes)
    return merged, unmatched, n_test


def evaluate_multiclass(labeled: Sequence[Tweet], plan: FoldPlan, cfg: PipelineConfig, ks=None,
                        parallel_folds: bool = False) -> dict[int, EvalReport]:
    ks = tuple(ks or (cfg.k,))
    classes = sorted({t.label.name for t in labeled})
    truth = {t.id: t.label.name for t in labeled}
    preds, unmatched, n_test = _cross_validate_many(labeled, plan, cfg, ks, parallel_folds)
    reports = {}
    for k in ks:
        per_class = score(truth, preds[k], classes)
        reports[k] = EvalReport(Setting.MULTICLASS, cfg.bloom.enabled, k, per_class, macro_f1(per_class),
                                unmatched / n_test, 1.0 / len(classes), n_test, plan.seed,
                                k > max(CHARACTERIZED_K))
    return reports


def binary_dataset(label: str, labeled: Sequence[Tweet], neutral: Sequence[Tweet], seed: int = 0) -> list[Tweet]:
    """Tweets of ``label`` plus an equal-size seeded sample of no-sentiment tweets."""
    positives = [t for t in labeled if t.label.name == label]
    pool = sorted(neutral, key=lambda t: t.id)
    if len(pool) < len(positives):
        raise EvalError(f"need {len(positives)} neutral tweets for {label!r}, have {len(pool)}")
    rng = random.Random(f"{seed}:{label}")
    return positives + rng.sample(pool, len(positives))


def evaluate_binary(labeled: Sequence[Tweet], neutral: Sequence[Tweet], cfg: PipelineConfig, num_folds: int = 10,
                    seed: int = 0, ks=None, parallel_folds: bool = False) -> dict[int, EvalReport]:
    """One label-vs-neutral problem per label; scores averaged over labels.

    ``neu`` verdicts count as predictions of the neutral class here.
    """
    ks = tuple(ks or (cfg.k,))
    if any(t.label is None or t.label.kind is not LabelKind.NEUTRAL for t in neutral):
        raise EvalError("the neutral set must contain only 'neu' tweets")
    labels = sorted({t.label.name for t in labeled} - {NEUTRAL})
    per_label = {k: {} for k in ks}
    label_macro = {k: {} for k in ks}
    unmatched = n_test = 0
    for label in labels:
        data = binary_dataset(label, labeled, neutral, seed)
        plan = make_folds(data, num_folds, seed)
        truth = {t.id: t.label.name for t in data}
        preds, um, nt = _cross_validate_many(data, plan, cfg, ks, parallel_folds)
        unmatched += um
        n_test += nt
        for k in ks:
            s = score(truth, preds[k], [label, NEUTRAL])
            per_label[k][label] = s[label]
            label_macro[k][label] = macro_f1(s)
    reports = {}
    for k in ks:
        avg = sum(label_macro[k].values()) / len(labels)
        reports[k] = EvalReport(Setting.BINARY, cfg.bloom.enabled, k, per_label[k], avg,
                                unmatched / n_test if n_test else 0.0, 0.5, n_test, seed,
                                k > max(CHARACTERIZED_K), label_macro[k])
    return reports


def cross_validate(labeled: Sequence[Tweet], plan: FoldPlan | None, k: int, bloom_cfg: BloomConfig,
                   setting: Setting | str = Setting.MULTICLASS, neutral: Sequence[Tweet] = (),
                   cfg: PipelineConfig | None = None, parallel_folds: bool = False) -> EvalReport:
    setting = Setting(setting)
    cfg = (cfg or PipelineConfig()).with_(k=k, bloom=bloom_cfg)
    if setting is Setting.MULTICLASS:
        plan = plan or make_folds(labeled)
        return evaluate_multiclass(labeled, plan, cfg, parallel_folds=parallel_folds)[k]
    num_folds = plan.num_folds if plan else 10
    seed = plan.seed if plan else 0
    return evaluate_binary(labeled, neutral, cfg, num_folds, seed, parallel_folds=parallel_folds)[k]


# -------------------------------------------------------------- compression

# binary layout used for byte accounting:
#   vector = u32 id length, id, u32 entry count, entries
#   entry  = u16 key length, key, f64 weight
VECTOR_HEADER = 8
ENTRY_OVERHEAD = 10


def serialize_vector(tweet_id: str, entries: dict[str, float]) -> bytes:
    tid = tweet_id.encode("utf-8")
    parts = [struct.pack("<I", len(tid)), tid, struct.pack("<I", len(entries))]
    for key in sorted(entries):
        k = key.encode("utf-8")
        parts.append(struct.pack("<H", len(k)))
        parts.append(k)
        parts.append(struct.pack("<d", entries[key]))
    return b"".join(parts)


@dataclass
class CompressionReport:
    bytes_plain: int
    bytes_bloom: int
    n_vectors: int = 0
    entries_plain: int = 0
    entries_bloom: int = 0

    @property
    def ratio(self) -> float:
        return 1.0 - self.bytes_bloom / self.bytes_plain

    def tsv(self) -> str:
        return ("# bytes_plain bytes_bloom ratio n_vectors entries_plain entries_bloom\n"
                f"{self.bytes_plain}\t{self.bytes_bloom}\t{self.ratio:.6f}\t{self.n_vectors}\t"
                f"{self.entries_plain}\t{self.entries_bloom}\n")


def feature_vectors(tweets: Sequence[Tweet], cfg: PipelineConfig, stats=None) -> dict[str, dict[str, float]]:
    """Weighted vectors of every tweet, keys encoded when ``cfg.bloom.enabled``."""
    labeled = [t for t in tweets if t.label is not None] or list(tweets)
    stats = stats or build_vocab_stats(labeled, cfg.features)
    encode = KeyEncoder(cfg.bloom) if cfg.bloom.enabled else None
    raw = [f for t in tweets for f in extract_features(t, stats, cfg.features, encode)]
    return compute_weights(raw, cfg.features).vectors


def measure_compression(tweets: Sequence[Tweet], bloom_cfg: BloomConfig, cfg: PipelineConfig | None = None) -> CompressionReport:
    if not tweets:
        raise EvalError("corpus is empty")
    cfg = cfg or PipelineConfig()
    labeled = [t for t in tweets if t.label is not None] or list(tweets)
    stats = build_vocab_stats(labeled, cfg.features)
    plain = feature_vectors(tweets, cfg.with_(bloom=replace(bloom_cfg, enabled=False)), stats)
    if bloom_cfg.enabled:
        encoded = feature_vectors(tweets, cfg.with_(bloom=bloom_cfg), stats)
    else:
        encoded = plain
    bp = sum(len(serialize_vector(t, v)) for t, v in sorted(plain.items()))
    bb = sum(len(serialize_vector(t, v)) for t, v in sorted(encoded.items()))
    return CompressionReport(bp, bb, len(plain), sum(map(len, plain.values())), sum(map(len, encoded.values())))


# ------------------------------------------------------------------ scaling

def subsample(tweets: Sequence[Tweet], fraction: float, seed: int = 0) -> list[Tweet]:
    """Seeded subsample; smaller fractions are prefixes of larger ones."""
    if not 0 < fraction <= 1:
        raise EvalError(f"fraction must lie in (0, 1], got {fraction}")
    order = sorted(tweets, key=lambda t: t.id)
    random.Random(seed).shuffle(order)
    return order[:max(1, round(fraction * len(order)))]


@dataclass
class ScalingRow:
    fraction: float
    workers: int
    n_tweets: int
    seconds: float
    speedup: float


def measure_scaling(tweets: Sequence[Tweet], fractions=(0.2, 0.4, 0.6, 0.8, 1.0), workers_list=(1,),
                    cfg: PipelineConfig | None = None, seed: int = 0, test_every: int = 10) -> list[ScalingRow]:
    """Wall time of a full classification run per (fraction, workers) cell.

    Every ``test_every``-th tweet of a subsample is held out as test data.
    """
    cfg = cfg or PipelineConfig()
    rows = []
    for fr in fractions:
        sample = subsample(tweets, fr, seed)
        train = [t for i, t in enumerate(sample) if i % test_every]
        test = [_hide(t) for i, t in enumerate(sample) if not i % test_every]
        cell = []
        for w in workers_list:
            start = time.perf_counter()
            PipelineRun(train, test, cfg.with_(workers=w)).classify()
            cell.append(ScalingRow(fr, w, len(sample), time.perf_counter() - start, 0.0))
        # speedup is relative to the single-worker run, or the first one listed
        ref = next((r.seconds for r in cell if r.workers == 1), cell[0].seconds)
        for r in cell:
            r.speedup = ref / r.seconds if r.seconds > 0 else math.inf
        rows.extend(cell)
    return rows


def linear_fit(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, float]:
    """Least squares ``y = a + b x``; returns (a, b, r_squared)."""
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    b = sxy / sxx
    a = my - b * mx
    ss_res = sum((y - a - b * x) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - my) ** 2 for y in ys)
    return a, b, 1.0 - ss_res / ss_tot if ss_tot else 1.0


def scaling_tsv(rows: Sequence[ScalingRow]) -> str:
    out = ["# fraction workers n_tweets seconds speedup"]
    out += [f"{r.fraction:g}\t{r.workers}\t{r.n_tweets}\t{r.seconds:.4f}\t{r.speedup:.4f}" for r in rows]
    return "\n".join(out) + "\n"
