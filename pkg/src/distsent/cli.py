"""Command-line entry point: ingest, classify, eval, compress-report, scale-report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal consistency
error (a failed job or an impossible pipeline state).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .bloom import BLOOM_SEED1, BLOOM_SEED2, BloomConfig
from .corpus import DataError, DatasetConfig, admit, load_dictionary, parse_dataset, write_dataset, write_rejects
from .engine import DEFAULT_SPILL_BUDGET, JobError
from .evaluation import (Setting, evaluate_binary, evaluate_multiclass, linear_fit, make_folds,
                         measure_compression, measure_scaling, scaling_tsv)
from .features import FeatureConfig
from .pipeline import ConsistencyError, PipelineConfig, PipelineRun, write_verdicts

log = logging.getLogger("distsent")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int(text: str) -> int:
    """Decimal or 0x-prefixed integer."""
    return int(text, 0)


def _items(text: str) -> list[str]:
    return [x.strip() for x in text.strip().strip("[]").split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in _items(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in _items(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run")
    g.add_argument("--config", help="key=value file; flags given on the command line win")
    g.add_argument("--out", default="out", help="output directory (default: out)")
    g.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    g = p.add_argument_group("dataset")
    g.add_argument("--labels", help="label list file, one hashtag or emoticon per line")
    g.add_argument("--dictionary", help="word list for the proper-word admission rule")
    g.add_argument("--min-proper-words", type=_int, default=5)

    g = p.add_argument_group("classifier")
    g.add_argument("--k", type=_int, default=50)
    g.add_argument("--bloom", action="store_true", help="encode feature keys with a Bloom filter")
    g.add_argument("--bloom-bits", type=_int, default=999)
    g.add_argument("--bloom-hashes", type=_int, default=3)
    g.add_argument("--bloom-seed1", type=_int, default=BLOOM_SEED1)
    g.add_argument("--bloom-seed2", type=_int, default=BLOOM_SEED2)
    g.add_argument("--f-h", type=float, default=100.0)
    g.add_argument("--f-c", type=float, default=1000.0)
    g.add_argument("--threshold", type=float, default=0.005)
    g.add_argument("--alpha", type=float, default=0.1)
    g.add_argument("--swap-overlap-bands", action="store_true")

    g = p.add_argument_group("engine")
    g.add_argument("--workers", type=_int, default=1)
    g.add_argument("--reducers", type=_int, default=12)
    g.add_argument("--spill-budget", type=_int, default=DEFAULT_SPILL_BUDGET)
    g.add_argument("--keep-intermediates", metavar="DIR",
                   help="write every job's output (binary and TSV) into DIR")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="distsent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    cmds = {}

    p = cmds["ingest"] = sub.add_parser("ingest", help="parse, filter and report rejects")
    p.add_argument("--input")
    p.add_argument("--unlabeled", action="store_true", help="ignore the class column")

    p = cmds["classify"] = sub.add_parser("classify", help="label a test set from a training set")
    p.add_argument("--train")
    p.add_argument("--test")

    p = cmds["eval"] = sub.add_parser("eval", help="stratified cross-validation")
    p.add_argument("--data", help="labeled dataset")
    p.add_argument("--neutral", help="no-sentiment dataset, required for --setting binary")
    p.add_argument("--setting", choices=[s.value for s in Setting], default=Setting.MULTICLASS.value)
    p.add_argument("--folds", type=_int, default=10)
    p.add_argument("--fold-seed", type=_int, default=0)
    p.add_argument("--k-grid", type=_int_list, help="comma-separated k values; overrides --k")
    p.add_argument("--parallel-folds", action="store_true")

    p = cmds["compress-report"] = sub.add_parser("compress-report", help="feature-vector bytes with and without Bloom keys")
    p.add_argument("--data")

    p = cmds["scale-report"] = sub.add_parser("scale-report", help="wall time over data fractions and worker counts")
    p.add_argument("--data")
    p.add_argument("--fractions", type=_float_list, default=[0.2, 0.4, 0.6, 0.8, 1.0])
    p.add_argument("--workers-list", type=_int_list, default=[1])
    p.add_argument("--subsample-seed", type=_int, default=0)

    for p in cmds.values():
        _common(p)
    return parser, cmds


# ------------------------------------------------------------------- config

def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` lines; '#' starts a comment, quotes around values are dropped."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such config file: {p}")
    out = {}
    for number, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("["):
            continue
        if "=" not in line:
            raise UsageError(f"{p}:{number}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        out[key.replace("-", "_")] = value
    return out


def _config_defaults(sub: argparse.ArgumentParser, values: dict[str, str]) -> dict:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    out = {}
    for key, text in values.items():
        if key == "command":  # present in run.toml; the command line decides
            continue
        if key not in actions:
            raise UsageError(f"unknown config key {key!r}")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {key!r} expects a boolean, got {text!r}")
            out[key] = text.lower() in ("true", "1", "yes")
        elif action.type is not None:
            try:
                out[key] = action.type(text)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
        else:
            out[key] = text
        if action.choices is not None and out[key] not in action.choices:
            raise UsageError(f"config key {key!r} must be one of {sorted(action.choices)}")
    return out


# required inputs are checked after the config file is merged, so it can supply them
REQUIRED = {"ingest": ["input"], "classify": ["train", "test"], "eval": ["data"],
            "compress-report": ["data"], "scale-report": ["data"]}


def parse_args(argv) -> argparse.Namespace:
    parser, cmds = build_parser()
    ns = parser.parse_args(argv)
    if ns.config:
        cmds[ns.command].set_defaults(**_config_defaults(cmds[ns.command], read_config(ns.config)))
        ns = parser.parse_args(argv)
    missing = ["--" + dest for dest in REQUIRED[ns.command] if getattr(ns, dest) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")
    return ns


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return '"' + str(v).replace("\\", "\\\\").replace('"', '\\"') + '"'


def write_run_config(out: Path, ns: argparse.Namespace) -> None:
    lines = [f"command = {_toml_value(ns.command)}"]
    for key in sorted(vars(ns)):
        v = getattr(ns, key)
        if key in ("command", "config", "log_level") or v is None:
            continue
        lines.append(f"{key} = {_toml_value(v)}")
    (out / "run.toml").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ----------------------------------------------------------------- commands

def dataset_config(ns) -> DatasetConfig:
    if not ns.labels:
        return DatasetConfig(min_proper_words=ns.min_proper_words, dictionary_path=ns.dictionary)
    if not Path(ns.labels).is_file():
        raise DataError(f"no such label file: {ns.labels}")
    try:
        return DatasetConfig.from_label_file(ns.labels, min_proper_words=ns.min_proper_words,
                                             dictionary_path=ns.dictionary)
    except ValueError as exc:
        raise DataError(f"{ns.labels}: {exc}") from None


def pipeline_config(ns) -> PipelineConfig:
    try:
        features = FeatureConfig(f_h=ns.f_h, f_c=ns.f_c, threshold=ns.threshold, alpha=ns.alpha,
                                 swap_overlap_bands=ns.swap_overlap_bands)
        bloom = BloomConfig(enabled=ns.bloom, bits=ns.bloom_bits, hashes=ns.bloom_hashes,
                            seed1=ns.bloom_seed1, seed2=ns.bloom_seed2)
        return PipelineConfig(k=ns.k, features=features, bloom=bloom, workers=ns.workers, reducers=ns.reducers,
                              spill_budget=ns.spill_budget,
                              keep_intermediates=ns.keep_intermediates)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _dictionary(ds: DatasetConfig):
    if ds.dictionary_path is None:
        return None
    if not Path(ds.dictionary_path).is_file():
        raise DataError(f"no such dictionary file: {ds.dictionary_path}")
    return load_dictionary(ds.dictionary_path)


def _load_labeled(path, ds: DatasetConfig, rejects_path: Path):
    """Parses, applies admission, writes rejects; returns admitted tweets."""
    parsed = parse_dataset(path, ds, labeled=True)
    words = _dictionary(ds)
    rejects = list(parsed.rejects)
    kept = []
    for t in parsed.tweets:
        if admit(t, ds, words):
            kept.append(t)
        else:
            rejects.append(("-", f"{t.id}: not admitted"))
    write_rejects(rejects_path, rejects)
    log.info("%s: %d tweets admitted, %d rejected", path, len(kept), len(rejects))
    return kept


def cmd_ingest(ns, out: Path) -> None:
    ds = dataset_config(ns)
    if ns.unlabeled:
        parsed = parse_dataset(ns.input, ds, labeled=False)
        kept, rejects = parsed.tweets, parsed.rejects
        write_rejects(out / "rejects.tsv", rejects)
    else:
        kept = _load_labeled(ns.input, ds, out / "rejects.tsv")
    write_dataset(out / "tweets.tsv", kept)
    print(f"{len(kept)} tweets written to {out / 'tweets.tsv'}")


def cmd_classify(ns, out: Path) -> None:
    ds = dataset_config(ns)
    cfg = pipeline_config(ns)
    train = _load_labeled(ns.train, ds, out / "train.rejects.tsv")
    test = parse_dataset(ns.test, ds, labeled=False)
    write_rejects(out / "test.rejects.tsv", test.rejects)
    if not train:
        raise DataError(f"{ns.train}: no admissible training tweets")
    res = PipelineRun(train, test.tweets, cfg).classify()
    write_verdicts(out / "verdicts.tsv", res)
    print(f"{len(res.order)} verdicts written to {out / 'verdicts.tsv'}; "
          f"no-match fraction {res.no_match_fraction:.4f}")


def cmd_eval(ns, out: Path) -> None:
    ds = dataset_config(ns)
    cfg = pipeline_config(ns)
    ks = ns.k_grid or [ns.k]
    for k in ks:
        if k < 1:
            raise UsageError("k must be >= 1")
    labeled = _load_labeled(ns.data, ds, out / "data.rejects.tsv")
    if ns.setting == Setting.BINARY.value:
        if not ns.neutral:
            raise UsageError("--setting binary needs --neutral")
        neutral = _load_labeled(ns.neutral, ds, out / "neutral.rejects.tsv")
        reports = evaluate_binary(labeled, neutral, cfg, ns.folds, ns.fold_seed, ks, ns.parallel_folds)
    else:
        plan = make_folds(labeled, ns.folds, ns.fold_seed)
        reports = evaluate_multiclass(labeled, plan, cfg, ks, ns.parallel_folds)
    text, grid = [], ["# k macro_f1 no_match_fraction random_baseline"]
    for k in ks:
        r = reports[k]
        text.append(r.summary())
        (out / f"eval-k{k}.tsv").write_text(r.tsv(), encoding="utf-8")
        grid.append(f"{k}\t{r.macro_f1:.6f}\t{r.no_match_fraction:.6f}\t{r.random_baseline:.6f}")
    (out / "eval.txt").write_text("\n".join(text), encoding="utf-8")
    (out / "eval-grid.tsv").write_text("\n".join(grid) + "\n", encoding="utf-8")
    sys.stdout.write("\n".join(text))


def cmd_compress(ns, out: Path) -> None:
    ds = dataset_config(ns)
    cfg = pipeline_config(ns)
    tweets = _load_labeled(ns.data, ds, out / "data.rejects.tsv")
    if not tweets:
        raise DataError(f"{ns.data}: no admissible tweets")
    report = measure_compression(tweets, replace(cfg.bloom, enabled=True), cfg)
    (out / "compression.tsv").write_text(report.tsv(), encoding="utf-8")
    print(f"plain {report.bytes_plain} B, bloom {report.bytes_bloom} B, ratio {report.ratio:.4f}")


def cmd_scale(ns, out: Path) -> None:
    ds = dataset_config(ns)
    cfg = pipeline_config(ns)
    tweets = _load_labeled(ns.data, ds, out / "data.rejects.tsv")
    if not tweets:
        raise DataError(f"{ns.data}: no admissible tweets")
    for f in ns.fractions:
        if not 0 < f <= 1:
            raise UsageError(f"fraction {f} outside (0, 1]")
    rows = measure_scaling(tweets, ns.fractions, ns.workers_list, cfg, ns.subsample_seed)
    table = scaling_tsv(rows)
    single = [r for r in rows if r.workers == rows[0].workers]
    if len(single) >= 3:
        a, b, r2 = linear_fit([r.n_tweets for r in single], [r.seconds for r in single])
        table += f"# linear fit seconds = {a:.6g} + {b:.6g} * n_tweets, r2 = {r2:.4f}\n"
    (out / "scaling.tsv").write_text(table, encoding="utf-8")
    sys.stdout.write(table)


COMMANDS = {"ingest": cmd_ingest, "classify": cmd_classify, "eval": cmd_eval,
            "compress-report": cmd_compress, "scale-report": cmd_scale}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = parse_args(argv)
        logging.basicConfig(level=ns.log_level.upper(), format="%(levelname)s %(message)s")
        out = Path(ns.out)
        out.mkdir(parents=True, exist_ok=True)
        write_run_config(out, ns)
        COMMANDS[ns.command](ns, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConsistencyError, JobError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
