import pickle

import pytest

from distsent.cli import main, parse_args, read_config
from distsent.synthetic import Generator, SyntheticSpec


@pytest.fixture
def data(tmp_path):
    gen = Generator(SyntheticSpec(n_tweets=150, n_classes=3, seed=2))
    lines = gen.lines()
    files = {
        "all": "\n".join(lines),
        "train": "\n".join(lines[:120]),
        "test": "\n".join("\t".join((ln.split("\t")[0], "-", ln.split("\t")[2])) for ln in lines[120:]),
        "neutral": "\n".join(gen.neutral_lines(150)),
        "labels": "\n".join(gen.labels),
    }
    paths = {}
    for name, text in files.items():
        paths[name] = tmp_path / f"{name}.txt"
        paths[name].write_text(text + "\n", encoding="utf-8")
    return paths


def run(*argv):
    return main([str(a) for a in argv])


def test_classify_writes_verdicts(data, tmp_path):
    out = tmp_path / "o"
    assert run("classify", "--train", data["train"], "--test", data["test"], "--labels", data["labels"],
               "--k", 50, "--bloom", "--out", out) == 0
    rows = (out / "verdicts.tsv").read_text().splitlines()
    assert len(rows) == 30
    assert all(r.split("\t")[1] in {"#mood0", "#mood1", "#mood2", "neu"} for r in rows)
    run_toml = (out / "run.toml").read_text()
    assert 'command = "classify"' in run_toml and "bloom = true" in run_toml and "k = 50" in run_toml


def test_identical_runs_are_byte_identical(data, tmp_path):
    for name in ("a", "b"):
        assert run("classify", "--train", data["train"], "--test", data["test"], "--labels", data["labels"],
                   "--workers", 2 if name == "b" else 1, "--out", tmp_path / name) == 0
    assert (tmp_path / "a" / "verdicts.tsv").read_bytes() == (tmp_path / "b" / "verdicts.tsv").read_bytes()


def test_eval_binary(data, tmp_path, capsys):
    out = tmp_path / "e"
    assert run("eval", "--setting", "binary", "--data", data["all"], "--neutral", data["neutral"], "--labels",
               data["labels"], "--folds", 5, "--k", 10, "--out", out) == 0
    text = (out / "eval.txt").read_text()
    assert "setting=binary" in text and "random_baseline=0.5000" in text
    assert "#mood2" in (out / "eval-k10.tsv").read_text()
    assert "macro_f1" in capsys.readouterr().out


def test_eval_k_grid_and_extrapolation(data, tmp_path):
    out = tmp_path / "g"
    assert run("eval", "--data", data["all"], "--labels", data["labels"], "--folds", 3, "--k-grid", "5,300",
               "--fold-seed", 4, "--out", out) == 0
    grid = (out / "eval-grid.tsv").read_text().splitlines()
    assert [ln.split("\t")[0] for ln in grid[1:]] == ["5", "300"]
    assert "outside the characterized range" in (out / "eval.txt").read_text()
    assert "fold_seed=4" in (out / "eval.txt").read_text()


def test_binary_without_neutral_is_usage_error(data, tmp_path):
    assert run("eval", "--setting", "binary", "--data", data["all"], "--labels", data["labels"],
               "--out", tmp_path) == 1


def test_ingest(data, tmp_path):
    out = tmp_path / "i"
    bad = tmp_path / "bad.txt"
    bad.write_text(data["all"].read_text() + "x\tonly-two\n" + "y\t#mood0\ttoo short\n", encoding="utf-8")
    assert run("ingest", "--input", bad, "--labels", data["labels"], "--out", out) == 0
    kept = (out / "tweets.tsv").read_text().splitlines()
    rejects = (out / "rejects.tsv").read_text().splitlines()
    assert len(kept) == 150
    assert rejects[0] == "line_number\treason"
    assert any(r.startswith("151\t") for r in rejects) and any("y: not admitted" in r for r in rejects)


def test_compress_and_scale_reports(data, tmp_path):
    assert run("compress-report", "--data", data["all"], "--labels", data["labels"], "--out", tmp_path / "c") == 0
    plain, bloom, ratio = (tmp_path / "c" / "compression.tsv").read_text().splitlines()[1].split("\t")[:3]
    assert float(ratio) == pytest.approx(1 - int(bloom) / int(plain), abs=1e-6)
    assert run("scale-report", "--data", data["all"], "--labels", data["labels"], "--fractions", "0.5,1",
               "--workers-list", "1,2", "--out", tmp_path / "s") == 0
    rows = (tmp_path / "s" / "scaling.tsv").read_text().splitlines()
    assert len(rows) == 5


def test_keep_intermediates(data, tmp_path):
    mid = tmp_path / "mid"
    assert run("classify", "--train", data["train"], "--test", data["test"], "--labels", data["labels"],
               "--keep-intermediates", mid, "--out", tmp_path / "o") == 0
    assert (mid / "3-distance-computation.bin").is_file()
    assert (mid / "2-vector-construction.tsv").is_file()


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert run("classify", "--bogus") == 1
        assert "usage:" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        assert run("frobnicate") == 1

    def test_missing_required(self, tmp_path, capsys):
        assert run("classify", "--train", "x", "--out", tmp_path) == 1
        assert "--test" in capsys.readouterr().err

    def test_bad_value(self, tmp_path):
        assert run("classify", "--train", "a", "--test", "b", "--k", "0", "--out", tmp_path) == 1

    def test_missing_file_is_data_error(self, data, tmp_path, capsys):
        assert run("classify", "--train", tmp_path / "nope.tsv", "--test", data["test"], "--labels", data["labels"],
                   "--out", tmp_path) == 2
        assert "nope.tsv" in capsys.readouterr().err

    def test_duplicate_id_is_data_error(self, data, tmp_path, capsys):
        dup = tmp_path / "dup.txt"
        first = data["train"].read_text().splitlines()[0]
        dup.write_text(first + "\n" + first + "\n", encoding="utf-8")
        assert run("classify", "--train", dup, "--test", data["test"], "--labels", data["labels"],
                   "--out", tmp_path) == 2
        assert "line 2" in capsys.readouterr().err

    def test_overlapping_ids_are_data_error(self, data, tmp_path):
        assert run("classify", "--train", data["train"], "--test", data["train"], "--labels", data["labels"],
                   "--out", tmp_path) == 2

    def test_internal_error(self, data, tmp_path, monkeypatch):
        from distsent import pipeline

        def broken(*args, **kwargs):
            raise pipeline.ConsistencyError("training id 't1' is listed as a match but has no vector")

        monkeypatch.setattr("distsent.cli.PipelineRun", broken)
        assert run("classify", "--train", data["train"], "--test", data["test"], "--labels", data["labels"],
                   "--out", tmp_path) == 3


class TestConfigFile:
    def test_file_sets_defaults_and_flags_win(self, data, tmp_path):
        cfg = tmp_path / "run.conf"
        cfg.write_text(f'# grid cell\ntrain = "{data["train"]}"\ntest = {data["test"]}\nk = 7\nbloom = true\n'
                       f'labels = {data["labels"]}\nbloom-bits = 0x3E7\n', encoding="utf-8")
        ns = parse_args(["classify", "--config", str(cfg), "--k", "9"])
        assert ns.k == 9 and ns.bloom is True and ns.bloom_bits == 999 and ns.train == str(data["train"])

    def test_run_toml_roundtrip(self, data, tmp_path):
        out = tmp_path / "first"
        assert run("classify", "--train", data["train"], "--test", data["test"], "--labels", data["labels"],
                   "--k", 5, "--out", out) == 0
        again = tmp_path / "second"
        assert run("classify", "--config", out / "run.toml", "--out", again) == 0
        assert (out / "verdicts.tsv").read_bytes() == (again / "verdicts.tsv").read_bytes()

    def test_lists_accept_toml_arrays(self, tmp_path):
        cfg = tmp_path / "c.conf"
        cfg.write_text("data = x.tsv\nfractions = [0.5, 1.0]\nworkers_list = [1, 4]\n", encoding="utf-8")
        ns = parse_args(["scale-report", "--config", str(cfg)])
        assert ns.fractions == [0.5, 1.0] and ns.workers_list == [1, 4]

    @pytest.mark.parametrize("body", ["nonsense_key = 1\n", "k = many\n", "bloom = maybe\n", "no equals sign\n"])
    def test_bad_config_is_usage_error(self, tmp_path, body):
        cfg = tmp_path / "bad.conf"
        cfg.write_text(body, encoding="utf-8")
        assert run("classify", "--config", cfg, "--train", "a", "--test", "b", "--out", tmp_path / "o") == 1

    def test_read_config(self, tmp_path):
        p = tmp_path / "x.conf"
        p.write_text("[section]\nf-h = 50\n\n# c\nout = 'dir'\n", encoding="utf-8")
        assert read_config(p) == {"f_h": "50", "out": "dir"}


def test_verdict_value_format_is_stable(data, tmp_path):
    # the fourth job's binary dump stores (label, matched) pairs
    mid = tmp_path / "m"
    run("classify", "--train", data["train"], "--test", data["test"], "--labels", data["labels"],
        "--keep-intermediates", mid, "--out", tmp_path / "o")
    from distsent.engine import read_records
    with open(mid / "4-sentiment-classification.bin", "rb") as fh:
        label, matched = pickle.loads(next(iter(read_records(fh))).value)
    assert isinstance(label, str) and isinstance(matched, bool)
