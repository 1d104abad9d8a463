"""Distant-supervision sentiment classification of tweets with kNN over
word, n-gram, pattern and punctuation features, run as a chain of
MapReduce jobs on an in-process engine."""

from .bloom import BloomConfig
from .corpus import DataError, DatasetConfig, Tweet, parse_dataset
from .features import FeatureConfig
from .pipeline import ConsistencyError, PipelineConfig, PipelineRun, classify_corpus

__all__ = [
    "BloomConfig",
    "ConsistencyError",
    "DataError",
    "DatasetConfig",
    "FeatureConfig",
    "PipelineConfig",
    "PipelineRun",
    "Tweet",
    "classify_corpus",
    "parse_dataset",
]
