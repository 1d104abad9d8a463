"""Feature extraction and weighting.

Four families are extracted from a tweet:

* words (``W:<word>``), including punctuation runs of length >= 2 but not
  meta-words;
* n-grams of 2..5 consecutive tokens (``N:<t1 t2 ...>``);
* patterns, ordered sequences of high-frequency words and content-word
  slots (``P:<c1|c2|...>``), matched exactly or with regular words inserted
  between components;
* five punctuation statistics (``U:P1`` .. ``U:P5``).

Word, n-gram and pattern weights are ``(exact + alpha * approximate) /
count(f)`` with ``count(f)`` the number of occurrences over the whole corpus.
Punctuation weights are ``N_p / (M_p * mean(M_w, M_ng, M_pa))``.
"""

from __future__ import annotations

import enum
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .corpus import SentimentLabel, TokenKind, Tweet

CW_SLOT = "[CW]"
PUNCT_KEYS = ("U:P1", "U:P2", "U:P3", "U:P4", "U:P5")


class Family(str, enum.Enum):
    WORD = "W"
    NGRAM = "N"
    PATTERN = "P"
    PUNCT = "U"


class WordClass(enum.Enum):
    HFW = "HFW"
    CW = "CW"
    RW = "RW"


@dataclass(frozen=True)
class FeatureConfig:
    f_h: float = 100.0
    f_c: float = 1000.0
    threshold: float = 0.005
    alpha: float = 0.1
    swap_overlap_bands: bool = False
    n_min: int = 2
    n_max: int = 5
    min_hfw: int = 2
    max_hfw: int = 6
    min_cw: int = 1
    max_cw: int = 5

    def __post_init__(self):
        if not self.f_h < self.f_c:
            raise ValueError(f"need f_h < f_c, got {self.f_h} >= {self.f_c}")
        if self.n_min < 2 or self.n_max < self.n_min:
            raise ValueError("invalid n-gram range")


@dataclass
class VocabStats:
    total_tokens: int
    counts: Counter
    f_h: float = 100.0
    f_c: float = 1000.0
    swap_overlap_bands: bool = False

    def freq(self, surface: str) -> float:
        """Occurrences per million tokens."""
        return 1e6 * self.counts.get(surface, 0) / self.total_tokens

    def dump_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("word\tfreq_per_million\tclass\n")
            for w in sorted(self.counts):
                fh.write(f"{w}\t{self.freq(w):.6f}\t{classify_frequency(self.freq(w), self).value}\n")


def build_vocab_stats(training: Iterable[Tweet], cfg: FeatureConfig | None = None) -> VocabStats:
    cfg = cfg or FeatureConfig()
    counts = Counter()
    for t in training:
        counts.update(tok.surface for tok in t.tokens)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("cannot build vocabulary statistics from an empty training set")
    return VocabStats(total, counts, cfg.f_h, cfg.f_c, cfg.swap_overlap_bands)


def classify_frequency(fr: float, stats) -> WordClass:
    f_h, f_c = stats.f_h, stats.f_c
    if fr >= f_c:
        return WordClass.HFW
    if fr <= f_h:
        return WordClass.RW
    lower = fr < (f_h + f_c) / 2
    if stats.swap_overlap_bands:
        lower = not lower
    return WordClass.HFW if lower else WordClass.CW


def classify_word(surface: str, kind: TokenKind, stats: VocabStats) -> WordClass:
    if kind is not TokenKind.WORD:
        # punctuation runs and meta-words are always high-frequency
        return WordClass.HFW
    return classify_frequency(stats.freq(surface), stats)


# ------------------------------------------------------------------ features

@dataclass
class RawFeature:
    key: str
    family: Family
    n_exact: int
    tweet_id: str
    label: SentimentLabel | None = None
    n_approx: int = 0

    @property
    def count_in_tweet(self) -> int:
        return self.n_exact + self.n_approx


def word_counts(tokens) -> Counter:
    c = Counter()
    for t in tokens:
        if t.kind is TokenKind.WORD or (t.kind is TokenKind.PUNCT and len(t.surface) >= 2):
            c["W:" + t.surface] += 1
    return c


def ngram_counts(tokens, n_min: int = 2, n_max: int = 5) -> Counter:
    c = Counter()
    surfaces = [t.surface for t in tokens]
    is_meta = [t.is_meta for t in tokens]
    for n in range(n_min, n_max + 1):
        for i in range(len(tokens) - n + 1):
            if all(is_meta[i:i + n]):
                continue
            c["N:" + " ".join(surfaces[i:i + n])] += 1
    return c


def _escape(component: str) -> str:
    return component.replace("\\", "\\\\").replace("|", "\\|")


def pattern_key(components) -> str:
    return "P:" + "|".join(c if c == CW_SLOT else _escape(c) for c in components)


def token_classes(tokens, stats: VocabStats) -> list[WordClass]:
    return [classify_word(t.surface, t.kind, stats) for t in tokens]


def _pattern_windows(tokens, classes, cfg: FeatureConfig):
    """Yield ``(components, exact)`` for every pattern occurrence in the tweet.

    Windows run over the tweet with its regular words deleted; an occurrence
    is exact when no regular word was deleted between its first and last
    component.
    """
    kept = [(pos, classes[pos], tokens[pos].surface) for pos in range(len(tokens))
            if classes[pos] is not WordClass.RW]
    max_len = cfg.max_hfw + cfg.max_cw
    for i, (start_pos, cls_i, surf_i) in enumerate(kept):
        if cls_i is not WordClass.HFW:
            continue
        hfw, cw = 1, 0
        components = [surf_i]
        for j in range(i + 1, min(len(kept), i + max_len)):
            pos_j, cls_j, surf_j = kept[j]
            if cls_j is WordClass.HFW:
                hfw += 1
                if hfw > cfg.max_hfw:
                    break
                components.append(surf_j)
                if cw >= cfg.min_cw and hfw >= cfg.min_hfw:
                    yield tuple(components), pos_j - start_pos == j - i
            else:
                cw += 1
                if cw > cfg.max_cw:
                    break
                components.append(CW_SLOT)


def pattern_counts(tokens, classes, cfg: FeatureConfig) -> dict[str, list[int]]:
    """Pattern key -> [exact occurrences, approximate occurrences]."""
    out: dict[str, list[int]] = {}
    for components, exact in _pattern_windows(tokens, classes, cfg):
        slot = out.setdefault(pattern_key(components), [0, 0])
        slot[0 if exact else 1] += 1
    return out


def extract_patterns(tweet: Tweet, stats: VocabStats, cfg: FeatureConfig | None = None) -> list[tuple[str, ...]]:
    """Exact-form patterns of a tweet, with multiplicity."""
    cfg = cfg or FeatureConfig()
    classes = token_classes(tweet.tokens, stats)
    return [c for c, exact in _pattern_windows(tweet.tokens, classes, cfg) if exact]


def match_pattern(pattern, tweet: Tweet, stats: VocabStats) -> tuple[int, int]:
    """(exact, approximate) occurrences of ``pattern`` in the tweet."""
    tokens = tweet.tokens
    classes = token_classes(tokens, stats)
    kept = [(pos, classes[pos], tokens[pos].surface) for pos in range(len(tokens))
            if classes[pos] is not WordClass.RW]
    n = len(pattern)
    exact = approx = 0
    for i in range(len(kept) - n + 1):
        for c, (_, cls, surf) in zip(pattern, kept[i:i + n]):
            if c == CW_SLOT:
                if cls is not WordClass.CW:
                    break
            elif cls is not WordClass.HFW or surf != c:
                break
        else:
            if kept[i + n - 1][0] - kept[i][0] == n - 1:
                exact += 1
            else:
                approx += 1
    return exact, approx


@dataclass
class PunctStats:
    length_words: int
    exclamations: int
    questions: int
    quotes: int
    caps_words: int

    def as_tuple(self):
        return (self.length_words, self.exclamations, self.questions, self.quotes, self.caps_words)


def punct_stats(tweet: Tweet) -> PunctStats:
    words = excl = ques = quot = 0
    for t in tweet.tokens:
        if t.kind is TokenKind.PUNCT:
            s = t.surface
            excl += s.count("!")
            ques += s.count("?")
            quot += s.count('"')
        else:
            words += 1
    return PunctStats(words, excl, ques, quot, tweet.caps_words)


def extract_word_features(tweet: Tweet) -> list[RawFeature]:
    return [RawFeature(k, Family.WORD, n, tweet.id, tweet.label)
            for k, n in sorted(word_counts(tweet.tokens).items())]


def extract_ngram_features(tweet: Tweet, n_min: int = 2, n_max: int = 5) -> list[RawFeature]:
    return [RawFeature(k, Family.NGRAM, n, tweet.id, tweet.label)
            for k, n in sorted(ngram_counts(tweet.tokens, n_min, n_max).items())]


def extract_features(tweet: Tweet, stats: VocabStats, cfg: FeatureConfig | None = None,
                     encode: Callable[[str], str] | None = None) -> list[RawFeature]:
    """All four families. With ``encode`` set, non-punctuation keys are
    re-keyed and features that collide inside the tweet are merged."""
    cfg = cfg or FeatureConfig()
    tokens = tweet.tokens
    # key -> [family, exact, approx]
    acc: dict[str, list] = {}

    def add(key, family, ex, ap):
        if encode is not None:
            key = encode(key)
        slot = acc.get(key)
        if slot is None:
            acc[key] = [family, ex, ap]
        else:
            if family.value < slot[0].value:
                slot[0] = family
            slot[1] += ex
            slot[2] += ap

    for k, n in word_counts(tokens).items():
        add(k, Family.WORD, n, 0)
    for k, n in ngram_counts(tokens, cfg.n_min, cfg.n_max).items():
        add(k, Family.NGRAM, n, 0)
    for k, (ex, ap) in pattern_counts(tokens, token_classes(tokens, stats), cfg).items():
        add(k, Family.PATTERN, ex, ap)

    out = [RawFeature(k, fam, ex, tweet.id, tweet.label, ap) for k, (fam, ex, ap) in sorted(acc.items())]
    for key, n in zip(PUNCT_KEYS, punct_stats(tweet).as_tuple()):
        if n > 0:
            out.append(RawFeature(key, Family.PUNCT, n, tweet.id, tweet.label))
    return out


# ------------------------------------------------------------------- weights

def feature_weight(n_exact, n_approx, total, alpha: float) -> float:
    return (n_exact + alpha * n_approx) / total


def punct_weight(n, m_p, m_w: float, m_ng: float, m_pa: float) -> float:
    return n / (m_p * ((m_w + m_ng + m_pa) / 3))


@dataclass
class FamilyMaxima:
    word: float = 0.0
    ngram: float = 0.0
    pattern: float = 0.0

    def update(self, family: Family, w: float):
        if family is Family.WORD:
            self.word = max(self.word, w)
        elif family is Family.NGRAM:
            self.ngram = max(self.ngram, w)
        elif family is Family.PATTERN:
            self.pattern = max(self.pattern, w)

    @property
    def usable(self) -> bool:
        return self.word + self.ngram + self.pattern > 0


@dataclass
class WeightedCorpus:
    vectors: dict[str, dict[str, float]]
    labels: dict[str, SentimentLabel | None]
    families: dict[str, Family] = field(default_factory=dict)
    maxima: FamilyMaxima = field(default_factory=FamilyMaxima)


def key_family(raw: Iterable[RawFeature]) -> dict[str, Family]:
    fam: dict[str, Family] = {}
    for f in raw:
        cur = fam.get(f.key)
        if cur is None or f.family.value < cur.value:
            fam[f.key] = f.family
    return fam


def compute_weights(raw: Iterable[RawFeature], cfg: FeatureConfig | None = None) -> WeightedCorpus:
    """In-memory weighting of every feature occurrence in a corpus.

    ``raw`` must hold the features of every tweet (training and test).
    """
    cfg = cfg or FeatureConfig()
    raw = list(raw)
    families = key_family(raw)
    totals = defaultdict(int)
    punct_max = defaultdict(int)
    labels: dict[str, SentimentLabel | None] = {}
    for f in raw:
        labels[f.tweet_id] = f.label
        if f.family is Family.PUNCT:
            punct_max[f.key] = max(punct_max[f.key], f.n_exact)
        else:
            # approximate pattern occurrences weigh in the numerator only
            totals[f.key] += f.n_exact

    vectors: dict[str, dict[str, float]] = {tid: {} for tid in labels}
    maxima = FamilyMaxima()
    for f in raw:
        if f.family is Family.PUNCT or totals[f.key] == 0:
            continue
        w = feature_weight(f.n_exact, f.n_approx, totals[f.key], cfg.alpha)
        if w >= cfg.threshold:
            vectors[f.tweet_id][f.key] = w
            maxima.update(families[f.key], w)
    if maxima.usable:
        for f in raw:
            if f.family is not Family.PUNCT:
                continue
            w = punct_weight(f.n_exact, punct_max[f.key], maxima.word, maxima.ngram, maxima.pattern)
            if w >= cfg.threshold:
                vectors[f.tweet_id][f.key] = w
    return WeightedCorpus(vectors, labels, families, maxima)
