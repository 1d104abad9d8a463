"""Bloom compression ratio against corpus size, as a TSV for plotting.

    python scripts/compression_figure.py --sizes 250,500,1000,2000,4000 > compression.tsv
"""

import argparse

from _common import add_corpus_args, load_corpus

from distsent.bloom import BloomConfig
from distsent.evaluation import measure_compression, subsample


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    add_corpus_args(p, n_tweets=4000, n_classes=4)
    p.add_argument("--sizes", default="250,500,1000,2000,4000")
    p.add_argument("--bits", type=int, default=999)
    p.add_argument("--hashes", type=int, default=3)
    args = p.parse_args(argv)
    labeled, _ = load_corpus(args)
    bloom = BloomConfig(enabled=True, bits=args.bits, hashes=args.hashes)

    print("# reference band for the ratio: 0.15-0.20")
    print("n_tweets\tbytes_plain\tbytes_bloom\tratio")
    for size in (int(x) for x in args.sizes.split(",")):
        tweets = subsample(labeled, min(1.0, size / len(labeled)), seed=args.seed)
        r = measure_compression(tweets, bloom)
        print(f"{len(tweets)}\t{r.bytes_plain}\t{r.bytes_bloom}\t{r.ratio:.4f}")


if __name__ == "__main__":
    main()
