"""Corpus loading shared by the scripts: a dataset file or a synthetic corpus."""

from distsent.corpus import NEUTRAL, DatasetConfig, parse_dataset
from distsent.synthetic import SyntheticSpec, make_corpus


def add_corpus_args(parser, n_tweets=2000, n_classes=13):
    parser.add_argument("--data", help="labeled dataset (id<TAB>class<TAB>text); synthetic when omitted")
    parser.add_argument("--labels", help="label file for --data")
    parser.add_argument("--n-tweets", type=int, default=n_tweets)
    parser.add_argument("--n-classes", type=int, default=n_classes)
    parser.add_argument("--seed", type=int, default=0)


def load_corpus(args, neutral=0):
    """(labeled tweets, neutral tweets)."""
    if args.data:
        if not args.labels:
            raise SystemExit("--data needs --labels")
        tweets = parse_dataset(args.data, DatasetConfig.from_label_file(args.labels)).tweets
    else:
        spec = SyntheticSpec(n_tweets=args.n_tweets, n_classes=args.n_classes, seed=args.seed)
        tweets = make_corpus(spec, neutral=neutral)[0].tweets
    labeled = [t for t in tweets if t.label.name != NEUTRAL]
    return labeled, [t for t in tweets if t.label.name == NEUTRAL]
