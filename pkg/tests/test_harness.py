import math
import xml.dom.minidom

import numpy as np
import pytest

from paramshare.harness import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    RunRecord,
    describe,
    parse_config_text,
    read_csv,
    run_experiment,
    summarize,
    verify_chi2,
    verify_claim1,
    verify_claim2,
    verify_claim3,
    write_csv,
)
from paramshare.harness.cli import main
from paramshare.harness.plot import emit_plot


def cfg(**kw):
    return ExperimentConfig.for_experiment(kw.pop("experiment", "gaussian"), **kw)


class TestConfig:
    def test_defaults_per_experiment(self):
        assert cfg().learning_rate == 2e-2 and cfg().split() == (30, 70)
        s = cfg(experiment="shift")
        assert s.learning_rate == 0.1 and s.split() == (50, 100)
        d = cfg(experiment="denoise")
        assert d.learning_rate == 0.2 and d.split() == (50, 100) and d.dims == (10,)
        assert cfg(experiment="sum").split() == (100, 150)
        assert cfg(experiment="verify-claim2").runs == 500

    @pytest.mark.parametrize("bad", [
        dict(train_ratio=1.0), dict(train_ratio=0.0), dict(runs=0), dict(methods="guess"),
        dict(methods="brute", dims=(13,)), dict(rank_gt=5, dims=(4,)), dict(epochs=0),
        dict(experiment="denoise", methods="oracle"), dict(experiment="shift", kernel_len=5),
        dict(experiment="verify-claim2", alpha=0.2), dict(experiment="nope"),
        dict(n_total=2, train_ratio=0.1),
    ])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            cfg(**bad)

    def test_brute_guard_counts_flattened_parameters(self):
        with pytest.raises(ConfigError, match="parameters"):
            cfg(experiment="shift", methods="brute", dims=(5,), kernel_len=2)  # 4 x 5 = 20
        cfg(experiment="shift", methods="brute", dims=(3,), kernel_len=2)

    def test_config_text(self):
        got = parse_config_text("# comment\nrank-gt = 2\ndims = 2,3\nnegated = yes\nlr=0.5\n"
                                "method = brute,oracle\npatience = none\n")
        assert got == dict(rank_gt=2, dims=(2, 3), negated=True, learning_rate=0.5,
                           methods="brute,oracle", patience=None)
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("bogus = 1")
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("runs = 3\nruns: 4")


class TestSummaries:
    def test_examples(self):
        s = describe([0.0, 2.0])
        assert (s.mean, s.sd, s.half_width) == (1.0, pytest.approx(math.sqrt(2)), pytest.approx(1.96))
        flat = describe([3.0] * 5)
        assert flat.sd == 0 and flat.half_width == 0
        with pytest.raises(ValueError):
            describe([1.0])

    def test_half_width_shrinks_like_inverse_sqrt(self):
        rng = np.random.default_rng(0)
        widths = [describe(rng.standard_normal(n)).half_width for n in (400, 1600, 6400)]
        assert widths[0] / widths[1] == pytest.approx(2, rel=0.1)
        assert widths[1] / widths[2] == pytest.approx(2, rel=0.1)

    def test_per_method(self):
        recs = [RunRecord(i, 0, m, float(i), i % 2) for i in range(4) for m in ("a", "b")]
        out = summarize(recs)
        assert list(out) == ["a", "b"] and out["a"].runs == 4 and out["a"].mse.mean == 1.5
        with pytest.raises(ValueError):
            summarize(recs[:1])

    def test_record_rejects_nan(self):
        with pytest.raises(ValueError):
            RunRecord(0, 0, "a", float("nan"), 0)


class TestRuns:
    def test_deterministic_and_matched(self):
        c = cfg(methods="relaxed,no-sharing,oracle,brute", runs=3, epochs=30, dims=(3,))
        a, b = run_experiment(c), run_experiment(c)
        assert a == b
        assert [r.method for r in a[:4]] == ["relaxed", "no-sharing", "oracle", "brute"]
        assert all(r.pd == 0 for r in a if r.method == "oracle")
        assert all(r.wall_time == 0 for r in a)

    def test_workers_do_not_change_records(self):
        c = cfg(methods="relaxed", runs=4, epochs=20, dims=(3,))
        assert run_experiment(c) == run_experiment(c.replace(workers=3))

    def test_regression_experiments(self):
        for exp, extra in [("shift", {}), ("sum", dict(negated=True)), ("denoise", dict(dims=(3,)))]:
            recs = run_experiment(cfg(experiment=exp, methods="relaxed,no-sharing", runs=2,
                                      epochs=20, n_test=200, **extra))
            assert len(recs) == 4 and all(r.mse >= 0 for r in recs)

    def test_oracle_sum_is_exact_on_clean_test(self):
        recs = run_experiment(cfg(experiment="sum", methods="oracle", runs=2, n_test=100))
        assert all(r.pd == 0 and r.mse < 0.01 for r in recs)

    def test_no_sharing_mse_matches_theory(self):
        recs = run_experiment(cfg(methods="no-sharing", runs=2000, dims=(4,)))
        v = np.array([r.mse for r in recs])
        assert abs(v.mean() - 0.04) <= 3 * v.std(ddof=1) / math.sqrt(v.size)

    def test_record_time(self):
        recs = run_experiment(cfg(methods="no-sharing", runs=2, record_time=True))
        assert all(r.wall_time > 0 for r in recs)


class TestCsvAndPlot:
    def test_header_only(self, tmp_path):
        p = tmp_path / "e.csv"
        write_csv([], p)
        assert p.read_text() == ",".join(CSV_COLUMNS) + "\n"

    def test_round_trip(self, tmp_path):
        recs = [RunRecord(0, 5, "relaxed", 0.1 + 0.2, 3, 0.0, 1000), RunRecord(1, 5, "oracle", 1e-17, 0)]
        p = tmp_path / "r.csv"
        write_csv(recs, p)
        assert read_csv(p) == recs

    def test_io_error_mentions_path(self, tmp_path):
        with pytest.raises(OSError, match="missing"):
            write_csv([], tmp_path / "missing" / "x.csv")

    def test_svg_is_well_formed(self, tmp_path):
        p = tmp_path / "f.svg"
        emit_plot({"a": ([2, 3], [0.1, 0.2], [0.01, 0.02]), "b": ([2, 3], [0.3, 0.1], None)}, p)
        doc = xml.dom.minidom.parse(str(p))
        assert doc.documentElement.tagName == "svg"


class TestVerifiers:
    def test_claim3(self):
        rep = verify_claim3(4)
        assert rep.holds and rep.details["pairs"] == 105
        assert verify_claim3(2).details["pairs"] == 1
        with pytest.raises(ValueError):
            verify_claim3(5)

    def test_claim1_small(self):
        rep = verify_claim1(cfg(experiment="verify-claim1", runs=4000), n_configs=4)
        assert rep.holds and rep.rows[0]["scheme"] == "identity"
        assert rep.rows[0]["closed_form"] == pytest.approx(0.08)

    def test_chi2(self):
        rep = verify_chi2(cfg(experiment="verify-chi2", runs=10_000))
        assert rep.holds and len(rep.rows) == 4

    def test_claim2_small_and_curve(self):
        c = cfg(experiment="verify-claim2", dims=(4,), runs=30, rank_gt=2)
        rep = verify_claim2(c)
        assert rep.details["method"] == "brute" and rep.holds
        xs, ys = rep.details["curve"]
        i = int(np.argmin(ys))
        assert 0 < i < len(xs) - 1


class TestCli:
    def test_pd(self, tmp_path, capsys):
        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        a.write_text("K 5\n0 1 2 3 4\n")
        b.write_text("K 5\n0 0 0 0 0\n")
        c.write_text("K 5\n0 2 1 0 0\n")
        assert main(["pd", str(a), str(a)]) == 0
        assert main(["pd", str(a), str(b)]) == 0
        assert capsys.readouterr().out.split() == ["0", "4"]
        assert main(["pd", str(a), str(c)]) == 1
        assert "line 2, column 3" in capsys.readouterr().err
        (tmp_path / "d").write_text("K 3\n0 0 0\n")
        assert main(["pd", str(a), str(tmp_path / "d")]) == 1
        assert main(["pd", str(a), str(tmp_path / "nope")]) == 2

    def test_experiment_writes_csv_and_plot(self, tmp_path, capsys):
        out, svg = tmp_path / "g.csv", tmp_path / "g.svg"
        rc = main(["gaussian", "--dims", "2,3", "--runs", "3", "--method", "brute,no-sharing",
                   "--seed", "4", "--out", str(out), "--plot", str(svg)])
        assert rc == 0
        assert (tmp_path / "g_K2.csv").exists() and (tmp_path / "g_K3.csv").exists()
        assert len(read_csv(tmp_path / "g_K3.csv")) == 6
        xml.dom.minidom.parse(str(svg))
        assert "K=3 brute" in capsys.readouterr().out

    def test_config_file_and_flag_override(self, tmp_path):
        conf = tmp_path / "c.txt"
        conf.write_text("runs = 2\nmethod = oracle\nseed = 9\n")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["gaussian", "--config", str(conf), "--out", str(a)]) == 0
        assert main(["gaussian", "--config", str(conf), "--runs", "3", "--out", str(b)]) == 0
        ra, rb = read_csv(a), read_csv(b)
        assert len(ra) == 2 and len(rb) == 3 and ra[0].seed == 9 and ra[0].method == "oracle"

    def test_exit_codes(self, tmp_path):
        assert main(["gaussian", "--train-ratio", "1.5"]) == 1
        assert main(["gaussian", "--bogus"]) == 1
        assert main(["frobnicate"]) == 1
        assert main(["gaussian", "--method", "brute", "--dims", "20"]) == 1
        assert main(["gaussian", "--config", str(tmp_path / "missing.txt")]) == 1
        assert main(["verify", "claim3"]) == 0
        assert main(["verify", "claim2", "--alpha", "0.5"]) == 1
        assert main(["gaussian", "--runs", "2", "--out", str(tmp_path / "no" / "x.csv")]) == 2

    def test_failed_bound_exits_2(self, monkeypatch):
        from paramshare.harness import cli
        from paramshare.harness.verify import VerifyReport

        monkeypatch.setattr(cli, "verify_claim3", lambda K: VerifyReport("claim3", False))
        assert main(["verify", "claim3"]) == 2
