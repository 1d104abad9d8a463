"""Seeded synthetic tweet corpora.

Tweets are drawn from a Zipf-distributed shared vocabulary mixed with a
small per-class signal vocabulary, sprinkled with function words, meta-words,
punctuation and capitalization so every feature family fires. The output is
raw dataset text that goes through the normal parser.
"""

from __future__ import annotations

import itertools
import random
import string
from dataclasses import dataclass

from .corpus import NEUTRAL, DatasetConfig, ParsedDataset, parse_lines

EMOTICONS = (":)", ":(", ":D", ";)")
FUNCTION_WORDS = ("the", "a", "to", "and", "of", "i", "is", "it", "in", "my", "so", "for", "this", "on", "me")
PUNCT = ("!", "!!", "?", "...", ",", ".", "!?", '"')


@dataclass(frozen=True)
class SyntheticSpec:
    n_tweets: int = 500
    n_classes: int = 4
    seed: int = 0
    vocab_size: int = 5000
    zipf_s: float = 1.1
    signal_words: int = 40
    signal_rate: float = 0.25
    function_rate: float = 0.3
    min_words: int = 6
    max_words: int = 16
    label_kind: str = "hashtag"  # or "emoticon"
    mark_rate: float = 0.5
    orphan_rate: float = 0.03  # tweets of never-repeated words, so they match nothing


def _pseudo_words(rng: random.Random, n: int, taken: set) -> list[str]:
    out = []
    letters = string.ascii_lowercase
    while len(out) < n:
        w = "".join(rng.choice(letters) for _ in range(rng.randint(3, 9)))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def class_labels(n_classes: int, kind: str = "hashtag") -> list[str]:
    if kind == "emoticon":
        if n_classes > len(EMOTICONS):
            raise ValueError(f"at most {len(EMOTICONS)} emoticon classes")
        return list(EMOTICONS[:n_classes])
    return [f"#mood{i}" for i in range(n_classes)]


def dataset_config(labels, **kwargs) -> DatasetConfig:
    return DatasetConfig(hashtag_list=[x for x in labels if x.startswith("#")],
                         emoticon_list=[x for x in labels if not x.startswith("#")], **kwargs)


class Generator:
    def __init__(self, spec: SyntheticSpec):
        self.spec = spec
        self.rng = random.Random(spec.seed)
        taken = set(FUNCTION_WORDS) | {"url", "ref", "tag", "rt"}
        self.vocab = _pseudo_words(self.rng, spec.vocab_size, taken)
        self.cum = list(itertools.accumulate(1.0 / (r + 1) ** spec.zipf_s for r in range(spec.vocab_size)))
        self.labels = class_labels(spec.n_classes, spec.label_kind)
        self.signal = {lab: _pseudo_words(self.rng, spec.signal_words, taken) for lab in self.labels}

    def _token(self, signal: list[str] | None) -> str:
        rng, spec = self.rng, self.spec
        u = rng.random()
        if signal is not None and u < spec.signal_rate:
            w = rng.choice(signal)
        elif u < spec.signal_rate + spec.function_rate:
            w = rng.choice(FUNCTION_WORDS)
        else:
            w = rng.choices(self.vocab, cum_weights=self.cum)[0]
        v = rng.random()
        if v < 0.04:
            w = w.upper()
        elif v < 0.12:
            w = w.capitalize()
        return w

    def orphan_text(self, n: int) -> str:
        letters = string.ascii_lowercase
        return " ".join("".join(self.rng.choice(letters) for _ in range(12)) for _ in range(n))

    def text(self, label: str | None) -> str:
        rng, spec = self.rng, self.spec
        signal = self.signal.get(label) if label else None
        n = rng.randint(spec.min_words, spec.max_words)
        if rng.random() < spec.orphan_rate:
            return self.orphan_text(n)
        parts = [self._token(signal) for _ in range(n)]
        if rng.random() < 0.5:
            parts.insert(rng.randrange(len(parts) + 1), rng.choice(PUNCT))
        if rng.random() < 0.2:
            parts.append(rng.choice(PUNCT))
        if rng.random() < 0.15:
            parts.append("http://t.co/" + "".join(rng.choice(string.ascii_letters) for _ in range(6)))
        if rng.random() < 0.15:
            parts.insert(0, "@" + rng.choice(self.vocab))
        if rng.random() < 0.1:
            parts.append("#" + rng.choice(self.vocab))
        if rng.random() < 0.05:
            parts.insert(0, "RT")
        if label and label != NEUTRAL and rng.random() < spec.mark_rate:
            parts.append(label)
        return " ".join(parts)

    def lines(self, id_prefix: str = "t") -> list[str]:
        out = []
        for i in range(self.spec.n_tweets):
            label = self.labels[i % len(self.labels)]
            out.append(f"{id_prefix}{i:06d}\t{label}\t{self.text(label)}")
        return out

    def neutral_lines(self, n: int, id_prefix: str = "n") -> list[str]:
        return [f"{id_prefix}{i:06d}\t{NEUTRAL}\t{self.text(None)}" for i in range(n)]


def make_corpus(spec: SyntheticSpec, neutral: int = 0) -> tuple[ParsedDataset, DatasetConfig]:
    """Balanced labeled corpus (plus ``neutral`` no-sentiment tweets) and its config."""
    gen = Generator(spec)
    cfg = dataset_config(gen.labels, min_proper_words=spec.min_words)
    lines = gen.lines() + (gen.neutral_lines(neutral) if neutral else [])
    return parse_lines(lines, cfg, labeled=True), cfg


def split(tweets, test_fraction: float = 0.2, seed: int = 0):
    """Seeded train/test split."""
    tweets = list(tweets)
    order = list(range(len(tweets)))
    random.Random(seed).shuffle(order)
    n_test = max(1, round(len(tweets) * test_fraction))
    held = set(order[:n_test])
    train = [t for i, t in enumerate(tweets) if i not in held]
    test = [t for i, t in enumerate(tweets) if i in held]
    return train, test
