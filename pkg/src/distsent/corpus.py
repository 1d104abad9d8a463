"""Tweet datasets: parsing, tokenization and admission.

Input files are UTF-8, one tweet per line, ``tweet_id TAB class TAB text``.
The class column holds a label hashtag, a label emoticon, ``neu`` or ``-``
(unlabeled).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


NEUTRAL = "neu"
UNLABELED = "-"


class DataError(Exception):
    """Bad input data. Maps to CLI exit code 2."""


class DuplicateIdError(DataError):
    def __init__(self, tweet_id: str, line_number: int):
        super().__init__(f"duplicate tweet id {tweet_id!r} at line {line_number}")
        self.tweet_id = tweet_id
        self.line_number = line_number


class LabelKind(enum.Enum):
    HASHTAG = "hashtag"
    EMOTICON = "emoticon"
    NEUTRAL = "neutral"


@dataclass(frozen=True, order=True)
class SentimentLabel:
    name: str
    kind: LabelKind = field(compare=False)

    @classmethod
    def parse(cls, name: str) -> "SentimentLabel":
        if name == NEUTRAL:
            return cls(name, LabelKind.NEUTRAL)
        if name.startswith("#"):
            return cls(name.lower(), LabelKind.HASHTAG)
        return cls(name, LabelKind.EMOTICON)

    def __str__(self):
        return self.name


class TokenKind(enum.Enum):
    WORD = "W"
    URL = "URL"
    REF = "REF"
    TAG = "TAG"
    RT = "RT"
    PUNCT = "P"


META_KINDS = frozenset({TokenKind.URL, TokenKind.REF, TokenKind.TAG, TokenKind.RT})
_META_LITERALS = {"URL": TokenKind.URL, "REF": TokenKind.REF, "TAG": TokenKind.TAG}


@dataclass(frozen=True)
class Token:
    surface: str
    kind: TokenKind

    @property
    def is_meta(self) -> bool:
        return self.kind in META_KINDS


def meta(kind: TokenKind) -> Token:
    return Token(kind.value, kind)


def word(surface: str) -> Token:
    return Token(surface, TokenKind.WORD)


def punct(surface: str) -> Token:
    return Token(surface, TokenKind.PUNCT)


@dataclass
class DatasetConfig:
    hashtag_list: list[str] = field(default_factory=list)
    emoticon_list: list[str] = field(default_factory=list)
    min_proper_words: int = 5
    dictionary_path: str | None = None

    def __post_init__(self):
        self.hashtag_list = [h.lower() for h in self.hashtag_list]
        bad = [h for h in self.hashtag_list if not h.startswith("#")]
        if bad:
            raise ValueError(f"hashtag labels must start with '#': {bad}")
        overlap = set(self.hashtag_list) & set(self.emoticon_list)
        if overlap:
            raise ValueError(f"hashtag and emoticon lists overlap: {sorted(overlap)}")
        self._hashtags = frozenset(self.hashtag_list)
        self._emoticons = frozenset(self.emoticon_list)

    @property
    def labels(self) -> list[str]:
        return list(self.hashtag_list) + list(self.emoticon_list)

    def is_label_hashtag(self, text: str) -> bool:
        return text.lower() in self._hashtags

    def is_label_emoticon(self, text: str) -> bool:
        return text in self._emoticons

    @classmethod
    def from_label_file(cls, path, **kwargs) -> "DatasetConfig":
        """One label per line; lines starting with '#' are hashtags, the rest emoticons."""
        names = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
        names = [n for n in names if n]
        return cls(hashtag_list=[n for n in names if n.startswith("#")],
                   emoticon_list=[n for n in names if not n.startswith("#")], **kwargs)


@dataclass
class Tweet:
    id: str
    label: SentimentLabel | None
    tokens: tuple[Token, ...]
    raw_text: str = ""
    caps_words: int = 0
    label_marks: tuple[str, ...] = ()

    @property
    def is_test(self) -> bool:
        return self.label is None


@dataclass
class Analysis:
    tokens: list[Token]
    label_marks: list[str]
    caps_words: int


_URL_PREFIXES = ("http://", "https://", "www.")
# @name, #tag, word (with inner apostrophes), punctuation run
_PIECE = re.compile(r"(@\w+)|(#\w+)|(\w+(?:'\w+)*)|([^\w\s]+)")


def _is_caps(surface: str) -> bool:
    return len(surface) >= 2 and surface.isupper()


def _is_capitalized(surface: str) -> bool:
    return surface[:1].isupper()


def analyze(raw_text: str, cfg: DatasetConfig) -> Analysis:
    """Tokenize ``raw_text``, pulling out label marks and capitalization counts."""
    tokens: list[Token] = []
    marks: list[str] = []
    caps = 0
    chunks = raw_text.split()
    for i, chunk in enumerate(chunks):
        if i == 0 and chunk in ("RT", "RT:"):
            tokens.append(meta(TokenKind.RT))
            continue
        if cfg.is_label_emoticon(chunk):
            marks.append(chunk)
            continue
        if chunk.startswith(_URL_PREFIXES):
            tokens.append(meta(TokenKind.URL))
            continue
        for m in _PIECE.finditer(chunk):
            ref, tag, w, p = m.groups()
            if ref:
                tokens.append(meta(TokenKind.REF))
            elif tag:
                if cfg.is_label_hashtag(tag):
                    marks.append(tag.lower())
                else:
                    tokens.append(meta(TokenKind.TAG))
            elif w in _META_LITERALS:
                tokens.append(meta(_META_LITERALS[w]))
            elif w:
                if _is_caps(w) or _is_capitalized(w):
                    caps += 1
                tokens.append(word(w.lower()))
            elif cfg.is_label_emoticon(p):
                marks.append(p)
            else:
                tokens.append(punct(p))
    return Analysis(tokens, marks, caps)


def preprocess(raw_text: str, cfg: DatasetConfig) -> list[Token]:
    return analyze(raw_text, cfg).tokens


def render(tokens: Iterable[Token]) -> str:
    """Text form of a token list; ``preprocess(render(ts)) == ts``."""
    return " ".join(t.surface for t in tokens)


def load_dictionary(path) -> frozenset[str]:
    words = Path(path).read_text(encoding="utf-8").split()
    return frozenset(w.lower() for w in words)


def label_set(tweet: Tweet) -> set[str]:
    """Distinct label marks a tweet carries, counting its class column."""
    found = set(tweet.label_marks)
    if tweet.label is not None and tweet.label.kind is not LabelKind.NEUTRAL:
        found.add(tweet.label.name)
    return found


def admit(tweet: Tweet, cfg: DatasetConfig, dictionary: frozenset[str] | None = None) -> bool:
    """At least ``min_proper_words`` dictionary words and at most one label mark."""
    labels = label_set(tweet)
    if len(labels) > 1:
        return False
    if tweet.label is not None and tweet.label.kind is LabelKind.NEUTRAL and labels:
        return False
    words = [t.surface for t in tweet.tokens if t.kind is TokenKind.WORD]
    proper = len(words) if dictionary is None else sum(w in dictionary for w in words)
    return proper >= cfg.min_proper_words


@dataclass
class ParsedDataset:
    tweets: list[Tweet]
    rejects: list[tuple[int, str]]

    def __iter__(self):
        return iter(self.tweets)

    def __len__(self):
        return len(self.tweets)


def parse_line(line: str, cfg: DatasetConfig, labeled: bool) -> Tweet:
    """One record. Raises ValueError with a reason for a malformed line."""
    fields = line.split("\t")
    if len(fields) != 3:
        raise ValueError(f"expected 3 tab-separated fields, got {len(fields)}")
    tweet_id, cls, text = fields
    if not tweet_id:
        raise ValueError("empty tweet id")
    label = None
    if labeled:
        if cls == NEUTRAL:
            label = SentimentLabel.parse(cls)
        elif cfg.is_label_hashtag(cls) or cfg.is_label_emoticon(cls):
            label = SentimentLabel.parse(cls)
        else:
            raise ValueError(f"unknown label {cls!r}")
    a = analyze(text, cfg)
    if not a.tokens:
        raise ValueError("no tokens after preprocessing")
    return Tweet(tweet_id, label, tuple(a.tokens), text, a.caps_words, tuple(a.label_marks))


def parse_lines(lines: Iterable[bytes | str], cfg: DatasetConfig, labeled: bool) -> ParsedDataset:
    tweets, rejects, seen = [], [], {}
    for number, raw in enumerate(lines, 1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError:
                rejects.append((number, "invalid UTF-8"))
                continue
        line = raw.rstrip("\n").rstrip("\r")
        if not line:
            continue
        try:
            tweet = parse_line(line, cfg, labeled)
        except ValueError as exc:
            rejects.append((number, str(exc)))
            continue
        if tweet.id in seen:
            raise DuplicateIdError(tweet.id, number)
        seen[tweet.id] = number
        tweets.append(tweet)
    return ParsedDataset(tweets, rejects)


def parse_dataset(path, cfg: DatasetConfig, labeled: bool = True) -> ParsedDataset:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such dataset file: {p}")
    data = p.read_bytes()
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    return parse_lines(lines, cfg, labeled)


def write_dataset(path, tweets: Iterable[Tweet]) -> None:
    """Writes tweets back in the input format; the raw text is kept so re-parsing is exact."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in tweets:
            cls = t.label.name if t.label is not None else UNLABELED
            text = " ".join(t.raw_text.split())
            fh.write(f"{t.id}\t{cls}\t{text}\n")


def write_rejects(path, rejects: Iterable[tuple[int, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("line_number\treason\n")
        for number, reason in rejects:
            fh.write(f"{number}\t{reason}\n")
