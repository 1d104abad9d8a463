"""Single-process brute-force reference classifier.

Builds every feature vector in memory, then for each test tweet scans the
full training set for vectors sharing a word/n-gram/pattern key. No inverted
index, no engine. The job chain must agree with it verdict for verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bloom import KeyEncoder
from .corpus import NEUTRAL
from .features import build_vocab_stats, compute_weights, extract_features


def _squares(vec):
    return [w * w for w in vec.values()]


def _distance(u, su, v, sv):
    # exact sum: all squares of both, shared keys swapped for their difference
    terms = su + sv
    for key in u.keys() & v.keys():
        d = u[key] - v[key]
        terms.extend((-(u[key] * u[key]), -(v[key] * v[key]), d * d))
    return math.sqrt(math.fsum(terms))


def _majority(ranked, k):
    tally = {}
    for dist, _, label in ranked[:k]:
        tally.setdefault(label, []).append(dist)
    return min(tally, key=lambda lab: (-len(tally[lab]), math.fsum(tally[lab]), lab))


@dataclass
class OracleResult:
    rankings: dict[str, list[tuple[float, str, str]]]
    vectors: dict[str, dict[str, float]]
    order: list[str]

    @property
    def matched(self) -> set[str]:
        return {t for t, r in self.rankings.items() if r}

    def no_match_count(self) -> int:
        return sum(1 for t in self.order if not self.rankings[t])

    def verdicts(self, k: int) -> dict[str, str]:
        return {t: _majority(r, k) if r else NEUTRAL for t, r in self.rankings.items()}


def brute_force_rankings(train, test, cfg) -> OracleResult:
    """Every test tweet's matching training vectors, nearest first.

    ``cfg`` is a PipelineConfig; only ``features`` and ``bloom`` are read.
    """
    fcfg = cfg.features
    stats = build_vocab_stats(train, fcfg)
    encode = KeyEncoder(cfg.bloom) if cfg.bloom.enabled else None
    raw = []
    for t in train:
        raw.extend(extract_features(t, stats, fcfg, encode))
    for t in test:
        hidden = type(t)(t.id, None, t.tokens, t.raw_text, t.caps_words, t.label_marks)
        raw.extend(extract_features(hidden, stats, fcfg, encode))
    vectors = compute_weights(raw, fcfg).vectors

    pool = []
    for t in train:
        v = vectors.get(t.id, {})
        pool.append((t.id, t.label.name, v, _squares(v), {key for key in v if not key.startswith("U:")}))

    rankings = {}
    for t in test:
        u = vectors.get(t.id, {})
        su = _squares(u)
        keys = {key for key in u if not key.startswith("U:")}
        ranked = [(_distance(u, su, v, sv), train_id, label)
                  for train_id, label, v, sv, vkeys in pool if not keys.isdisjoint(vkeys)]
        ranked.sort()
        rankings[t.id] = ranked
    return OracleResult(rankings, vectors, [t.id for t in test])


def brute_force_classify(train, test, cfg) -> dict[str, str]:
    return brute_force_rankings(train, test, cfg).verdicts(cfg.k)
