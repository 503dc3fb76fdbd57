import csv
import json

import pytest

from prophet_lab import cli
from prophet_lab.cli import CSV_COLUMNS, ConfigError, main, parse_config, run_experiment
from prophet_lab.values import FiniteDiscrete, PointMass


def test_parse_ratio_example():
    cfg = parse_config("experiment = ratio\nrule = single-sample\ninstance = hard(0.01)\ntrials = 100000\nseed = 7")
    assert (cfg.experiment, cfg.rule, cfg.trials, cfg.seed) == ("ratio", "single-sample", 100000, 7)
    assert cfg.schedule == "constant(1)"


def test_parse_reports_every_error():
    with pytest.raises(ConfigError) as err:
        parse_config("experiment = lemma1\nepsilon = 1.5\nbogus = 3\ntrials = 0\n")
    text = " | ".join(err.value.errors)
    assert "epsilon" in text and "out of range" in text
    assert "unknown key 'bogus'" in text
    assert "trials" in text
    assert "missing required field 'distribution'" in text


def test_parse_epsilon_alone():
    with pytest.raises(ConfigError, match="epsilon = 1.5 out of range"):
        parse_config("epsilon = 1.5")


def test_non_monotone_schedule_file(tmp_path):
    (tmp_path / "s.txt").write_text("0.5\n0.2\n0.7\n")
    text = "experiment = verify-iid\ndistribution = uniform(0, 1)\nn = 3\nepsilon = 0.2\n" \
           "trials = 10\nseed = 1\nschedule = file(s.txt)\n"
    with pytest.raises(ConfigError, match="non-monotone"):
        parse_config(text, base_dir=tmp_path)


def test_subcommand_must_match():
    with pytest.raises(ConfigError, match="does not match"):
        parse_config("experiment = ratio\nworlds = 3\nseed = 1", experiment="oracle-sweep")


@pytest.mark.parametrize("text, check", [
    ("discrete([0, 2], [0.5, 0.5])", lambda d: d == FiniteDiscrete((0.0, 2.0), (0.5, 0.5))),
    ("point(3)", lambda d: d == PointMass(3.0)),
    ("exp(2)", lambda d: d.rate == 2.0),
    ("empirical([1, 2, 2])", lambda d: d.atoms == (1.0, 2.0)),
])
def test_parse_distribution(text, check):
    assert check(cli.parse_distribution(text))


def test_parse_instance_forms():
    assert cli.parse_instance("hard(0.5)").n == 2
    assert cli.parse_instance("iid(uniform(0, 1), 4)").is_iid
    assert cli.parse_instance("[point(1), exp(1)]").n == 2
    with pytest.raises(ValueError):
        cli.parse_distribution("gamma(2)")


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


CONFIGS = {
    "oracle-sweep": "worlds = 20\nmax_n = 6\nseed = 1\n",
    "verify-single-sample": "worlds = 10\nmax_n = 4\nseed = 2\n",
    "ratio": "rule = single-sample\ninstance = hard(0.01)\ntrials = 20000\nseed = 7\n",
    "lemma1": "distribution = uniform(0, 1)\nn = 10\nepsilon = 0.5\npools = 20\nseed = 3\n",
    "verify-iid": "distribution = uniform(0, 1)\nn = 6\nepsilon = 0.3\nm = 500\ntrials = 4000\nseed = 4\n",
}


@pytest.mark.parametrize("experiment", sorted(CONFIGS))
def test_each_subcommand(tmp_path, capsys, experiment):
    cfg = write(tmp_path, "c.txt", CONFIGS[experiment])
    out = tmp_path / "out"
    out.mkdir()
    assert main([experiment, "--config", str(cfg), "--out", str(out)]) == 0
    assert "PASS" in capsys.readouterr().out
    with open(out / f"{experiment}.csv", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    assert header == CSV_COLUMNS[experiment]
    summary = json.loads((out / f"{experiment}_summary.json").read_text())
    assert {"config", "estimates", "checks", "seed"} <= set(summary)
    assert all({"name", "pass", "detail"} <= set(c) for c in summary["checks"])


def test_verify_single_sample_min_ratio(tmp_path):
    cfg = parse_config(CONFIGS["verify-single-sample"], "verify-single-sample")
    status, summary = run_experiment(cfg, tmp_path)
    assert status == 0 and summary["estimates"]["min_ratio"] >= 0.5


def test_lemma1_reports_pool_size(tmp_path):
    cfg = parse_config(CONFIGS["lemma1"], "lemma1")
    status, summary = run_experiment(cfg, tmp_path)
    assert summary["estimates"]["m"] == 2662 and 0 <= summary["estimates"]["good_fraction"] <= 1


def test_missing_output_dir(tmp_path, capsys):
    cfg = write(tmp_path, "c.txt", CONFIGS["oracle-sweep"])
    assert main(["oracle-sweep", "--config", str(cfg), "--out", str(tmp_path / "nope")]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "output directory does not exist"


def test_bad_config_exits_nonzero(tmp_path, capsys):
    cfg = write(tmp_path, "c.txt", "epsilon = 2\n")
    assert main(["lemma1", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert json.loads(capsys.readouterr().err)["errors"]


def test_failed_check_exits_one(tmp_path, capsys):
    text = "rule = single-sample\ninstance = hard(0.01)\ntrials = 5000\nseed = 7\nmin_ratio = 0.99\n"
    cfg = write(tmp_path, "c.txt", text)
    assert main(["ratio", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert json.loads(capsys.readouterr().err)["failures"] == ["ratio_at_least_target"]


def test_config_echo_reproduces(tmp_path):
    """The echoed config alone reruns to byte-identical artifacts."""
    cfg = parse_config(CONFIGS["ratio"], "ratio")
    first, second = tmp_path / "a", tmp_path / "b"
    first.mkdir()
    second.mkdir()
    _, summary = run_experiment(cfg, first)
    echo = summary["config"]
    text = "\n".join(f"{k} = {v}" for k, v in echo.items() if v is not None)
    run_experiment(parse_config(text), second)
    assert (first / "ratio.csv").read_bytes() == (second / "ratio.csv").read_bytes()
    assert (first / "ratio_summary.json").read_bytes() == (second / "ratio_summary.json").read_bytes()


def test_threads_and_seed_override(tmp_path):
    cfg = write(tmp_path, "c.txt", CONFIGS["ratio"])
    a, b, c = (tmp_path / d for d in "abc")
    for d in (a, b, c):
        d.mkdir()
    main(["ratio", "--config", str(cfg), "--out", str(a)])
    main(["ratio", "--config", str(cfg), "--out", str(b), "--threads", "3"])
    main(["ratio", "--config", str(cfg), "--out", str(c), "--seed-override", "8"])
    assert (a / "ratio.csv").read_bytes() == (b / "ratio.csv").read_bytes()
    assert (a / "ratio.csv").read_bytes() != (c / "ratio.csv").read_bytes()
    assert json.loads((c / "ratio_summary.json").read_text())["seed"] == 8


def test_csv_reals_use_17_digits(tmp_path):
    cfg = parse_config("worlds = 3\nseed = 5\n", "oracle-sweep")
    run_experiment(cfg, tmp_path)
    with open(tmp_path / "oracle-sweep.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        assert float(row["prophet_exact"]) == float(f"{float(row['prophet_exact']):.17g}")
        assert "," not in row["ratio"]
