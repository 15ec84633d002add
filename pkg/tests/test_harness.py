import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lrdhomog.cli import main
from lrdhomog.config import ExperimentConfig, config_hash, load_config
from lrdhomog.experiments import rate_regime, run_experiment, run_fluctuation_experiment
from lrdhomog.hermite_limit import simulate_hermite_path
from lrdhomog.io import path_to_csv, path_to_raw, read_csv, read_raw, samples_to_csv
from lrdhomog.lrd_gaussian import sample_fgn_path
from lrdhomog.parallel import map_replicates
from lrdhomog.results import CSV_COLUMNS, ResultTable, within
from lrdhomog.rng import replicate_stream, stream

from conftest import CONFIG_DIR

SMALL_RATE = dict(
    kind="rate",
    H0=0.75,
    operator={"kind": "laplace", "q0": 1.0, "n": 511},
    eps=[2.0**-3, 2.0**-4, 2.0**-5, 2.0**-6],
    replicates=20,
    seed=5,
)


def write_config(tmp_path, **fields):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(fields))
    return path


class TestConfig:
    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_shipped_configs_round_trip(self, path):
        cfg = load_config(path)
        assert ExperimentConfig.from_json(cfg.to_json()) == cfg
        assert config_hash(ExperimentConfig.from_json(cfg.to_json())) == config_hash(cfg)
        assert cfg.seed == 1

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            ExperimentConfig.from_dict(SMALL_RATE | {"bogus": 1})

    @pytest.mark.parametrize(
        "change",
        [
            dict(kind="nope"),
            dict(H0=0.45),
            dict(eps=[2.0**-4, 2.0**-3, 2.0**-5, 2.0**-6]),
            dict(eps=[2.0**-6, 2.0**-7, 2.0**-8, 2.0**-9]),
            dict(eps=[2.0**-3, 2.0**-4, 2.0**-5]),
            dict(eps=[]),
            dict(m=2),
            dict(L="weird"),
            dict(seed=-1),
            dict(kind="fluctuation-dist", operator={"kind": "spectral_fractional", "q0": 1.0, "n": 511, "s": 0.2}),
        ],
    )
    def test_invalid(self, change):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(SMALL_RATE | change)

    def test_missing_required(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"kind": "rate"})

    def test_rank_from_potential(self):
        cfg = ExperimentConfig(kind="autocov", H0=0.9, potential={"phi": "centered_cos"})
        assert cfg.m == 2
        with pytest.raises(ValueError):
            ExperimentConfig(kind="autocov", H0=0.7, potential={"phi": "centered_cos"})

    def test_hash_changes(self):
        a = ExperimentConfig.from_dict(SMALL_RATE)
        assert config_hash(a) != config_hash(a.replace(seed=6))


class TestRngAndParallel:
    def test_streams_independent_of_order(self):
        a = replicate_stream(3, "x", 7).standard_normal(4)
        replicate_stream(3, "x", 6).standard_normal(100)
        assert np.array_equal(a, replicate_stream(3, "x", 7).standard_normal(4))
        assert not np.array_equal(a, replicate_stream(3, "y", 7).standard_normal(4))
        assert not np.array_equal(a, replicate_stream(4, "x", 7).standard_normal(4))
        with pytest.raises(ValueError):
            stream(-1)

    @pytest.mark.parametrize("threads", [1, 2, 5])
    def test_ordered(self, threads):
        out = map_replicates(lambda i: replicate_stream(0, "p", i).random(), 100, threads, chunk=7)
        ref = [replicate_stream(0, "p", i).random() for i in range(100)]
        assert out == ref


class TestResultTable:
    def make(self):
        t = ResultTable("rate", metadata={"seed": 1})
        t.add("slope", 0.5, 0.01, H0=np.float64(0.75), m=np.int64(1))
        t.add("mean", 1.0, eps=0.1)
        t.verdict(within("slope", 0.5, 0.35, 0.65))
        return t

    def test_value_lookup(self):
        t = self.make()
        assert t.value("slope", H0=0.75) == 0.5
        with pytest.raises(KeyError):
            t.value("missing")

    def test_same_rows(self):
        a, b = self.make(), self.make()
        assert a.same_rows(b)
        b.rows[0]["value"] += 1e-9
        assert not a.same_rows(b)
        b.metadata["seed"] = 2
        assert a.same_rows(self.make())

    def test_verdicts(self):
        t = self.make()
        assert t.passed
        t.verdict(within("bad", np.nan, 0, 1))
        assert not t.passed
        assert t.verdicts[0].line().startswith("PASS slope")

    def test_write(self, tmp_path):
        csv_path, json_path = self.make().write(tmp_path, "demo")
        header, rows = read_csv(csv_path)
        assert tuple(header) == CSV_COLUMNS
        assert json.loads(rows[0][1]) == {"H0": 0.75, "m": 1}
        assert float(rows[0][3]) == 0.5 and rows[1][4] == "nan"
        summary = json.loads(json_path.read_text())
        assert summary["passed"] and summary["verdicts"][0]["name"] == "slope"


class TestIO:
    def test_raw_round_trip(self, tmp_path):
        p = sample_fgn_path(0.7, 64, 1.0, 0)
        path_to_raw(p, tmp_path / "g.raw")
        arr, meta = read_raw(tmp_path / "g.raw")
        assert np.array_equal(arr, p.values)
        assert meta["H0"] == 0.7 and meta["shape"] == [65]

    def test_hermite_path_raw_and_csv(self, tmp_path):
        p = simulate_hermite_path(2, 0.9, 2**10, 16, seed=1)
        path_to_raw(p, tmp_path / "z.raw")
        arr, meta = read_raw(tmp_path / "z.raw")
        assert np.array_equal(arr, p.values) and meta["m"] == 2
        header, rows = read_csv(path_to_csv(p, tmp_path / "z.csv"))
        assert header == ["index", "x", "value"] and len(rows) == 17
        assert float(rows[-1][2]) == p.values[-1]

    def test_samples_csv(self, tmp_path):
        header, rows = read_csv(samples_to_csv([0.5, -1.25], tmp_path / "s.csv"))
        assert header == ["replicate", "value"] and rows == [["0", "0.5"], ["1", "-1.25"]]


class TestExperiments:
    @pytest.mark.parametrize(
        "m, H0, beta, expected, regime",
        [(1, 0.75, 1.0, 0.5, "long-range"), (1, 0.9, 0.4, 0.2, "long-range"), (1, 0.55, 0.4, 0.8, "singular"), (1, 0.6, 0.4, 0.8, "boundary (log-corrected)")],
    )
    def test_rate_regime(self, m, H0, beta, expected, regime):
        e, r = rate_regime(m, H0, beta)
        assert_allclose(e, expected)
        assert r == regime

    def test_kind_mismatch(self):
        with pytest.raises(ValueError):
            run_fluctuation_experiment(ExperimentConfig.from_dict(SMALL_RATE))

    def test_zero_amplitude_fluctuation(self):
        cfg = ExperimentConfig(
            kind="fluctuation-dist",
            H0=0.75,
            potential={"phi": "sin", "amplitude": 0.0, "m": 1},
            operator={"kind": "laplace", "q0": 1.0, "n": 255},
            eps=(2.0**-5,),
            replicates=50,
            oracle_replicates=50,
            T=(2**12,),
        )
        table = run_experiment(cfg)
        print([v.line() for v in table.verdicts])
        assert table.value("ks_statistic") == 0.0
        assert table.value("variance_ratio") == 1.0
        assert np.all(table.extra["samples"] == 0) and np.all(table.extra["oracle"] == 0)

    @pytest.mark.parametrize(
        "name, operator, H0",
        [
            ("laplace", {"kind": "laplace", "q0": 1.0, "n": 1023}, 0.75),
            ("fractional", {"kind": "spectral_fractional", "q0": 1.0, "n": 1023, "s": 0.2}, 0.9),
        ],
    )
    def test_regime_verdict_seed_stable(self, name, operator, H0):
        base = ExperimentConfig(kind="rate", H0=H0, operator=operator, eps=tuple(2.0 ** -np.arange(4, 8)), replicates=100)
        slopes, verdicts = [], []
        for seed in (11, 12, 13):
            table = run_experiment(base.replace(seed=seed))
            slopes.append(table.extra["slope"])
            verdicts.append(table.passed)
        print(f"{name}: slopes {np.round(slopes, 3)}, expected {table.extra['expected']}, verdicts {verdicts}")
        assert len(set(verdicts)) == 1 and verdicts[0]


class TestCli:
    def test_pass_and_report(self, tmp_path, capsys):
        # 20 replicates only exercise the plumbing; a wide band makes the verdict certain
        cfg = write_config(tmp_path, **SMALL_RATE | {"tolerance": 10.0})
        out = tmp_path / "out"
        assert main(["rate", "--config", str(cfg), "--out", str(out), "--threads", "2"]) == 0
        assert (out / "cfg.csv").exists()
        assert main(["report", "--out", str(out)]) == 0
        assert "PASS rate_slope" in capsys.readouterr().out

    def test_failed_verdict(self, tmp_path):
        cfg = write_config(tmp_path, **SMALL_RATE | {"tolerance": 1e-9})
        out = tmp_path / "out"
        assert main(["rate", "--config", str(cfg), "--seed", "9", "--out", str(out)]) == 2
        assert json.loads((out / "cfg.json").read_text())["metadata"]["seed"] == 9
        assert main(["report", "--out", str(out)]) == 2

    def test_errors(self, tmp_path):
        cfg = write_config(tmp_path, **SMALL_RATE)
        assert main(["autocov", "--config", str(cfg), "--out", str(tmp_path)]) == 1
        assert main(["rate", "--config", str(tmp_path / "missing.json")]) == 1
        assert main(["report", "--out", str(tmp_path / "empty")]) == 1
        bad = write_config(tmp_path, **SMALL_RATE | {"bogus": 1})
        assert main(["rate", "--config", str(bad)]) == 1
