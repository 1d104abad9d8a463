"""Wall time of the job chain over corpus fractions and worker counts.

Writes gnuplot-friendly TSV; the linear fit of time on corpus size goes to a
comment line at the end.

    python scripts/scalability.py --n-tweets 50000 --workers 1,2,4 > scaling.tsv
    gnuplot -e "set key autotitle columnhead; plot 'scaling.tsv' using 3:4 with linespoints"
"""

import argparse

from _common import add_corpus_args

from distsent.corpus import DatasetConfig, parse_dataset
from distsent.evaluation import linear_fit, measure_scaling, scaling_tsv
from distsent.synthetic import SyntheticSpec, make_corpus


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    add_corpus_args(p, n_tweets=50000, n_classes=13)
    p.add_argument("--fractions", default="0.2,0.4,0.6,0.8,1.0")
    p.add_argument("--workers", default="1")
    args = p.parse_args(argv)
    if args.data:
        tweets = parse_dataset(args.data, DatasetConfig.from_label_file(args.labels)).tweets
    else:
        spec = SyntheticSpec(n_tweets=args.n_tweets, n_classes=args.n_classes, seed=args.seed,
                             vocab_size=200000, min_words=5, max_words=10)
        tweets = make_corpus(spec)[0].tweets
    fractions = tuple(float(x) for x in args.fractions.split(","))
    workers = tuple(int(x) for x in args.workers.split(","))
    rows = measure_scaling(tweets, fractions, workers, seed=args.seed)
    print(scaling_tsv(rows), end="")
    single = [r for r in rows if r.workers == workers[0]]
    a, b, r2 = linear_fit([r.n_tweets for r in single], [r.seconds for r in single])
    print(f"# seconds = {a:.3f} + {b:.3e} * n_tweets  (R^2 = {r2:.3f}); "
          f"t(max)/t(min) = {single[-1].seconds / single[0].seconds:.2f}")


if __name__ == "__main__":
    main()
