from __future__ import annotations

import csv

import numpy as np
import pytest

from fxreserves.cli import main

from conftest import write_synthetic_country


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _run(*argv):
    return main([str(a) for a in argv])


def _set(cfg, **keys):
    """Set config keys in place, appending the ones not present yet."""
    keys = {k.replace("__", "."): v for k, v in keys.items()}
    lines = []
    for line in cfg.read_text().splitlines():
        name = line.split("=")[0].strip()
        lines.append(f"{name} = {keys.pop(name)}" if name in keys else line)
    lines += [f"{k} = {v}" for k, v in keys.items()]
    cfg.write_text("\n".join(lines) + "\n")


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "data"
    assert _run("synth", "--out-dir", out, "--seed", 4, "--start", "2012Q4",
                "--end", "2019Q4") == 0
    text = (out / "config.ini").read_text().replace("n_particles = 10000", "n_particles = 3000")
    (out / "config.ini").write_text(text)
    return out


class TestEstimate:
    def test_outputs_and_determinism(self, synth_dir, tmp_path, capsys):
        cfg = synth_dir / "config.ini"
        assert _run("estimate", "--config", cfg, "--out-dir", tmp_path / "a") == 0
        printed = capsys.readouterr().out
        assert "2019Q4" in printed and "USD" in printed and "IQR" in printed
        assert _run("estimate", "--config", cfg, "--out-dir", tmp_path / "b", "--workers", 3,
                    "--no-figures") == 0
        for name in ("summary.csv", "goodness.csv", "metadata.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes() \
                or name == "metadata.json"
        assert (tmp_path / "a" / "summary.png").exists()
        assert not (tmp_path / "b" / "summary.png").exists()
        rows = _read(tmp_path / "a" / "summary.csv")
        assert list(rows[0]) == ["quarter", "currency", "p10", "p25", "p50", "p75", "p90"]
        assert len(rows) == 28 * 6
        good = _read(tmp_path / "a" / "goodness.csv")
        assert list(good[0]) == ["quarter", "y_observed", "y_predicted_median", "sigma_obs", "ess"]

    def test_seed_flag_overrides(self, synth_dir, tmp_path):
        cfg = synth_dir / "config.ini"
        _run("estimate", "--config", cfg, "--out-dir", tmp_path / "a", "--no-figures")
        _run("estimate", "--config", cfg, "--out-dir", tmp_path / "b", "--no-figures",
             "--seed", 99)
        assert (tmp_path / "a" / "summary.csv").read_bytes() != \
            (tmp_path / "b" / "summary.csv").read_bytes()

    def test_global_flags_before_subcommand(self, synth_dir, tmp_path):
        assert _run("--config", synth_dir / "config.ini", "--out-dir", tmp_path / "g",
                    "--no-figures", "estimate") == 0
        assert (tmp_path / "g" / "summary.csv").exists()


class TestSweep:
    def test_default_point_matches_estimate(self, synth_dir, tmp_path):
        cfg = synth_dir / "config.ini"
        _run("estimate", "--config", cfg, "--out-dir", tmp_path, "--no-figures")
        est = _read(tmp_path / "summary.csv")
        for axis, values, label in (("maturity", "7,2", "7"), ("prior_width", "1,2", "1"),
                                    ("distribution", "laplace,normal", "laplace")):
            assert _run("sweep", "--axis", axis, "--values", values, "--config", cfg,
                        "--out-dir", tmp_path, "--no-figures", "--workers", 2) == 0
            sweep = [r for r in _read(tmp_path / f"sweep_{axis}.csv") if r["value"] == label]
            assert [{k: r[k] for k in est[0]} for r in sweep] == est, axis

    def test_maturity_invariance(self, tmp_path):
        cfg, _ = write_synthetic_country(tmp_path, n_particles=1500)
        # flat, time-constant yields make the holding return maturity-free
        rows = _read(tmp_path / "yields.csv")
        with open(tmp_path / "yields.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quarter", "currency", "maturity_years", "yield"])
            for r in rows:
                w.writerow([r["quarter"], r["currency"], r["maturity_years"], "0.03"])
        assert _run("sweep", "--axis", "maturity", "--config", cfg, "--out-dir", tmp_path / "o",
                    "--no-figures") == 0
        cols = ("p10", "p25", "p50", "p75", "p90")
        by_value = {}
        for r in _read(tmp_path / "o" / "sweep_maturity.csv"):
            by_value.setdefault(r["value"], []).append([float(r[c]) for c in cols])
        assert sorted(by_value) == ["10", "2", "5", "7"]
        ref = np.array(by_value["2"])
        for v, block in by_value.items():
            np.testing.assert_allclose(np.array(block), ref, rtol=0, atol=1e-12, err_msg=v)

    def test_prior_width_widens_first_quarter(self, tmp_path):
        cfg, _ = write_synthetic_country(tmp_path, n_particles=4000)
        _run("sweep", "--axis", "prior_width", "--values", "0.5,1,2", "--config", cfg,
             "--out-dir", tmp_path / "o", "--no-figures")
        rows = _read(tmp_path / "o" / "sweep_prior_width.csv")
        first_q = rows[0]["quarter"]
        width = {r["value"]: float(r["p90"]) - float(r["p10"])
                 for r in rows if r["quarter"] == first_q and r["currency"] == "USD"}
        assert width["0.5"] <= width["1"] <= width["2"]

    def test_unknown_distribution_is_config_error(self, synth_dir, tmp_path):
        assert _run("sweep", "--axis", "distribution", "--values", "student",
                    "--config", synth_dir / "config.ini", "--out-dir", tmp_path) == 2


class TestCalibrate:
    def test_self_consistent_band(self, tmp_path):
        # seven annual reports per seed are too few; pool all currencies over six seeds
        cover = []
        for seed in range(6):
            d = tmp_path / str(seed)
            _run("synth", "--out-dir", d, "--seed", seed, "--start", "2012Q4", "--end", "2019Q4")
            text = (d / "config.ini").read_text().replace("n_particles = 10000",
                                                          "n_particles = 2000")
            (d / "config.ini").write_text(text)
            assert _run("calibrate", "--config", d / "config.ini", "--out-dir", d / "o",
                        "--no-figures") == 0
            rows = _read(d / "o" / "calibration.csv")
            assert list(rows[0]) == ["level", "currency", "coverage", "n_reports"]
            cover += [(float(r["level"]), float(r["coverage"])) for r in rows]
        levels = sorted({lv for lv, _ in cover})
        assert levels == pytest.approx([0.1 * k for k in range(1, 10)])
        for lv in levels:
            assert abs(np.mean([c for v, c in cover if v == lv]) - lv) <= 0.1, lv

    def test_reported_medians_full_coverage(self, synth_dir, tmp_path):
        cfg = synth_dir / "config.ini"
        _run("estimate", "--config", cfg, "--out-dir", tmp_path / "e", "--no-figures")
        summary = _read(tmp_path / "e" / "summary.csv")
        with open(tmp_path / "medians.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["quarter", "currency", "share"])
            for r in summary:
                w.writerow([r["quarter"], r["currency"], r["p50"]])
        assert _run("calibrate", "--config", cfg, "--reported", tmp_path / "medians.csv",
                    "--out-dir", tmp_path / "c", "--no-figures") == 0
        assert all(float(r["coverage"]) == 1.0 for r in _read(tmp_path / "c" / "calibration.csv"))

    def test_empty_reported_exit_3(self, synth_dir, tmp_path):
        (tmp_path / "empty.csv").write_text("quarter,currency,share\n")
        assert _run("calibrate", "--config", synth_dir / "config.ini", "--reported",
                    tmp_path / "empty.csv", "--out-dir", tmp_path) == 3


class TestBaselineAndEquity:
    def test_baseline_outputs(self, synth_dir, tmp_path):
        assert _run("baseline", "--config", synth_dir / "config.ini", "--out-dir", tmp_path,
                    "--no-figures") == 0
        rows = _read(tmp_path / "baseline.csv")
        assert list(rows[0]) == ["quarter", "currency", "share", "nonunique_flag", "sse"]

    def test_baseline_noisier_than_filter(self, synth_dir, tmp_path):
        cfg = synth_dir / "config.ini"
        _run("baseline", "--config", cfg, "--out-dir", tmp_path, "--no-figures")
        _run("estimate", "--config", cfg, "--out-dir", tmp_path, "--no-figures")
        base = np.array([float(r["share"]) for r in _read(tmp_path / "baseline.csv")
                         if r["currency"] == "USD"])
        filt = np.array([float(r["p50"]) for r in _read(tmp_path / "summary.csv")
                         if r["currency"] == "USD"])
        assert base.var() >= filt.var()

    def test_degenerate_design_flagged(self, tmp_path):
        cfg, _ = write_synthetic_country(tmp_path)
        _set(cfg, baseline__window=2)
        assert _run("baseline", "--config", cfg, "--out-dir", tmp_path / "o",
                    "--no-figures") == 0
        flags = [r["nonunique_flag"] for r in _read(tmp_path / "o" / "baseline.csv")]
        assert set(flags) == {"1"}  # two rows cannot pin down four shares

    def test_equity_share_output(self, synth_dir, tmp_path):
        assert _run("equity-share", "--config", synth_dir / "config.ini", "--out-dir",
                    tmp_path, "--no-figures") == 0
        rows = _read(tmp_path / "equity_share.csv")
        assert list(rows[0]) == ["quarter", "equity_share", "degenerate_flag"]
        assert all(0.0 <= float(r["equity_share"]) <= 1.0 for r in rows)


class TestExitCodes:
    def test_config_error(self, tmp_path, capsys):
        p = tmp_path / "bad.ini"
        p.write_text("gamma = 0.3\n")
        assert _run("estimate", "--config", p, "--out-dir", tmp_path) == 2
        assert "gamma" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert _run("estimate", "--out-dir", tmp_path) == 2
        assert _run("estimate", "--config", tmp_path / "nope.ini") == 2

    def test_data_error(self, synth_dir, tmp_path, capsys):
        lines = (synth_dir / "reserves.csv").read_text().splitlines()
        (synth_dir / "reserves.csv").write_text("\n".join(lines[:5] + lines[6:]) + "\n")
        assert _run("estimate", "--config", synth_dir / "config.ini", "--out-dir", tmp_path) == 3
        assert "gap" in capsys.readouterr().err

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numerical_error(self, synth_dir, tmp_path, capsys):
        _set(synth_dir / "config.ini", sigma_obs__constant="1e-200", distribution="normal")
        assert _run("estimate", "--config", synth_dir / "config.ini", "--out-dir", tmp_path) == 4
        assert "quarter" in capsys.readouterr().err
