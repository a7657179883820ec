"""Command-line runner: subcommands, exit codes, configs and reproducibility."""

import csv
import io
import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsitytest.cli import (
    OUTPUT_DIR_ENV,
    ExperimentConfig,
    build_parser,
    main,
    parse_weights,
    run_experiment,
)
from sparsitytest.distributions import Distribution, SampleBatch
from sparsitytest.errors import ConfigError


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestWeights:
    def test_forms(self):
        assert parse_weights("1,0,2.5") == (1.0, 0.0, 2.5)
        assert parse_weights("uniform:4") == (0.5,) * 4
        assert parse_weights("sparse:5:2") == pytest.approx((2**-0.5, 2**-0.5, 0, 0, 0))

    def test_rejects_garbage(self):
        with pytest.raises(ConfigError):
            parse_weights("uniform:x")


class TestSubcommands:
    def test_help_lists_commands(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["--help"])
        out = capsys.readouterr().out
        for cmd in ("simulate", "estimate", "test", "lowerbound", "cumulants"):
            assert cmd in out

    def test_cumulants(self, capsys):
        code, out, _ = run(capsys, "cumulants", "--model", "rademacher", "--max-order", "6")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [r["order"] for r in rows] == ["1", "2", "3", "4", "5", "6"]
        assert float(rows[3]["cumulant"]) == -2 and float(rows[5]["cumulant"]) == 16

    def test_simulate_then_estimate(self, capsys, tmp_path):
        out_root = tmp_path / "batch"
        code, _, _ = run(capsys, "simulate", "--w", "1,0,0", "--samples", "4000",
                         "--seed", "3", "--output", str(out_root))
        assert code == 0
        batch = SampleBatch.from_csv(str(out_root) + ".csv")
        assert batch.m == 4000 and batch.n == 3
        code, out, _ = run(capsys, "estimate", "--data", str(out_root) + ".csv",
                           "--max-order", "4")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert rows[0].keys() == {"order", "power_sum", "s2"}
        assert float(rows[-1]["power_sum"]) == pytest.approx(1, abs=0.3)

    def test_test_rows(self, capsys, tmp_path):
        out_root = tmp_path / "runs" / "yes"
        code, _, _ = run(capsys, "test", "--w", "1,0,0,0", "--samples", "100000", "--trials",
                         "3", "--k", "1", "--output", str(out_root))
        assert code == 0
        rows = [json.loads(line) for line in open(str(out_root) + ".jsonl")]
        assert [r["trial"] for r in rows] == [0, 1, 2]
        for r in rows:
            assert {"decision", "statistic", "threshold", "w_tilde", "s2", "true_distance",
                    "seed"} <= r.keys()
            assert r["true_distance"] == 0
        summary = list(csv.DictReader(open(str(out_root) + "_summary.csv")))[0]
        assert float(summary["success_rate"]) >= 0.9
        assert {"config_hash", "mean_statistic", "ci_low", "ci_high"} <= summary.keys()

    def test_sympoly_and_noiseless(self, capsys, tmp_path):
        code, _, _ = run(capsys, "test", "--tester", "sympoly", "--eps", "0.5", "--w",
                         "1,0,0", "--samples", "100000", "--output", str(tmp_path / "a"))
        assert code == 0
        code, _, _ = run(capsys, "test", "--tester", "noiseless", "--model", "gaussian",
                         "--w", "0,3,0,0", "--samples", "2", "--output", str(tmp_path / "b"))
        assert code == 0
        row = json.loads(open(str(tmp_path / "b") + ".jsonl").readline())
        assert row["support"] == [1] and row["decision"] == "sparse"

    def test_lowerbound(self, capsys, tmp_path):
        code, _, _ = run(capsys, "lowerbound", "--construction", "gaussian_hidden", "--n", "16",
                         "--t", "4", "--c", "0.1", "--trials", "100", "--output",
                         str(tmp_path / "lb"))
        assert code == 0
        (row,) = [json.loads(line) for line in open(str(tmp_path / "lb") + ".jsonl")]
        assert {"construction", "params", "advantage", "stderr", "trials"} <= row.keys()

    def test_output_dir_from_environment(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
        code, _, _ = run(capsys, "test", "--w", "1,0", "--samples", "1000")
        assert code == 0
        assert len(list(tmp_path.glob("test-*.jsonl"))) == 1


class TestExitCodes:
    def test_odd_order_names_invariant(self, capsys):
        code, _, err = run(capsys, "test", "--w", "1,0", "--schedule", "practical:5")
        assert code == 2
        assert "even" in err

    def test_unknown_model(self, capsys):
        code, _, _ = run(capsys, "cumulants", "--model", "cauchy")
        assert code == 2

    def test_numerical_error_flushes_marker(self, capsys, tmp_path):
        data = tmp_path / "huge.csv"
        data.write_text("x1,y\n1.0,1e300\n2.0,-1e300\n")
        out_root = tmp_path / "est"
        code, _, _ = run(capsys, "estimate", "--data", str(data), "--output", str(out_root))
        assert code == 3
        rows = [json.loads(line) for line in open(str(out_root) + ".jsonl")]
        assert rows[-1]["truncated"] is True


CONFIGS = st.builds(
    ExperimentConfig,
    command=st.sampled_from(["test", "cumulants", "lowerbound"]),
    seed=st.integers(0, 2**63 - 1),
    trials=st.integers(1, 50),
    model=st.sampled_from([Distribution.rademacher(), Distribution.uniform(standardized=True),
                           Distribution.discrete_uniform([-1, 0, 1]),
                           Distribution.gauss_bernoulli(Fraction(1, 100))]),
    noise=st.sampled_from([Distribution.zero(), Distribution.gaussian(0, 0.01),
                           Distribution.rademacher(scale=0.5)]),
    w=st.lists(st.floats(-5, 5), min_size=1, max_size=6).map(tuple),
    k=st.integers(1, 3),
    C=st.floats(0.5, 4),
    tester=st.sampled_from(["general", "sympoly"]),
)


class TestConfig:
    @settings(max_examples=60, deadline=None)
    @given(CONFIGS)
    def test_round_trip(self, config):
        assert ExperimentConfig.parse(config.serialize()) == config

    def test_hash_stable_under_reordering(self):
        a = ("[experiment]\ncommand = test\nseed = 4\nk = 2\nw = 1,0,0\n"
             "[model]\nkind = uniform\na = -1\nb = 1\n")
        b = ("[model]\nb = 1\nkind = uniform\na = -1\n"
             "[experiment]\nw = 1,0,0\nk = 2\ncommand = test\nseed = 4\n")
        assert ExperimentConfig.parse(a).config_hash() == ExperimentConfig.parse(b).config_hash()

    def test_rejects_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.parse("[experiment]\ncommand = test\nw = 1\ncolour = red\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.parse("[experiment]\ncommand = test\nw = 1\n[extra]\na = 1\n")

    def test_rejects_bad_domain(self):
        with pytest.raises(ConfigError):
            ExperimentConfig("test", w=(1.0,), c=0.5, s=0.2)

    def test_config_file(self, capsys, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text("[experiment]\ncommand = test\nsamples = 2000\ntrials = 2\nw = 1,0\n"
                        "[noise]\nkind = gaussian\nvar = 0.01\n")
        code, _, _ = run(capsys, "test", "--config", str(path), "--output",
                         str(tmp_path / "o"))
        assert code == 0


class TestReproducibility:
    def test_byte_identical_rows(self, tmp_path):
        rows = []
        for name in ("a", "b"):
            config = ExperimentConfig("test", seed=11, trials=3, samples=20_000, w=(0.8, 0.6),
                                      noise=Distribution.rademacher(scale=0.1),
                                      output=str(tmp_path / name))
            run_experiment(config)
            rows.append((tmp_path / f"{name}.jsonl").read_bytes())
        assert rows[0] == rows[1]

    def test_lowerbound_reproducible(self):
        config = ExperimentConfig("lowerbound", construction="poisson_noniid", n=20, t=2,
                                  trials=100, seed=4)
        assert run_experiment(config).rows == run_experiment(config).rows
