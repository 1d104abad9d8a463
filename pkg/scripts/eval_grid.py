"""Macro-F1 over a k grid, Bloom off and on, in both evaluation settings.

    python scripts/eval_grid.py --n-tweets 3000 --setting both --k-grid 10,50,100,150,200
"""

import argparse
import sys

from _common import add_corpus_args, load_corpus

from distsent.bloom import BloomConfig
from distsent.evaluation import evaluate_binary, evaluate_multiclass, make_folds
from distsent.pipeline import PipelineConfig


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    add_corpus_args(p)
    p.add_argument("--setting", choices=("multiclass", "binary", "both"), default="multiclass")
    p.add_argument("--k-grid", default="10,50,100,150,200")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--parallel-folds", action="store_true")
    args = p.parse_args(argv)
    ks = tuple(int(x) for x in args.k_grid.split(","))
    settings = ("multiclass", "binary") if args.setting == "both" else (args.setting,)
    labeled, neutral = load_corpus(args, neutral=args.n_tweets if "binary" in settings else 0)

    columns = {}
    for setting in settings:
        for bloom in (False, True):
            cfg = PipelineConfig(bloom=BloomConfig(enabled=bloom))
            if setting == "multiclass":
                plan = make_folds(labeled, args.folds, seed=args.seed)
                reports = evaluate_multiclass(labeled, plan, cfg, ks, args.parallel_folds)
            else:
                reports = evaluate_binary(labeled, neutral, cfg, args.folds, args.seed, ks, args.parallel_folds)
            columns[(setting, bloom)] = reports
            print(f"[{setting} bloom={'on' if bloom else 'off'}] done", file=sys.stderr)

    header = ["k"] + [f"{s}/{'bloom' if b else 'plain'}" for s, b in columns]
    print("\t".join(header))
    for k in ks:
        print("\t".join([str(k)] + [f"{reports[k].macro_f1:.4f}" for reports in columns.values()]))
    any_reports = next(iter(columns.values()))
    print("\t".join(["random"] + [f"{r[ks[0]].random_baseline:.4f}" for r in columns.values()]))
    print("\t".join(["no-match"] + [f"{r[ks[0]].no_match_fraction:.4f}" for r in columns.values()]))
    if any(any_reports[k].extrapolated_k for k in ks):
        print("# k above 200 lies outside the characterized range", file=sys.stderr)


if __name__ == "__main__":
    main()
