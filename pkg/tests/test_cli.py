import json

import numpy as np
import pytest

import commonshock as cs
from commonshock.cli import main, read_claims_csv, write_claims_csv
from commonshock.datasets import bundled_paths


def write_config(path, **keys):
    lines = ["# test configuration"]
    for k, v in keys.items():
        lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture
def bundled_config(tmp_path):
    return write_config(
        tmp_path / "run.cfg",
        data=", ".join(bundled_paths()),
        t_max=15,
        partition="cell",
        design="chain_ladder",
        covariance="cellwise_two_level",
    )


class TestFitCommand:
    def test_reference_fit_report(self, bundled_config, tmp_path):
        out = tmp_path / "fit"
        assert main(["fit", "--config", bundled_config, "--out", str(out)]) == 0
        payload = json.loads((tmp_path / "fit.json").read_text())
        assert payload["fitted_cells_per_array"] == 120
        assert payload["dispersion"]["sigma2"] == pytest.approx(0.089272**2, rel=1e-3)
        assert payload["dispersion"]["v2"] == pytest.approx(0.123741**2, rel=1e-3)
        assert payload["dependence"]["correlation"] == pytest.approx(0.3611, abs=1e-3)
        assert payload["dependence"]["cells"] == 225
        a1 = payload["location"]["array_1"]
        assert a1["column_effects"][0] == pytest.approx(248.3, rel=2e-3)
        assert a1["row_effects"][0] == 1.0
        text = (tmp_path / "fit.txt").read_text()
        assert "Dispersion parameters" in text
        assert "sign agreement" in text

    def test_fixed_dispersion_path(self, tmp_path):
        cfg = write_config(
            tmp_path / "fixed.cfg",
            data=", ".join(bundled_paths()),
            t_max=15,
            sigma2=0.008,
            v2=0.0153,
        )
        out = tmp_path / "fixed"
        assert main(["fit", "--config", cfg, "--out", str(out)]) == 0
        payload = json.loads((tmp_path / "fixed.json").read_text())
        assert payload["dispersion"] == {"sigma2": 0.008, "v2": 0.0153}

    def test_generic_solver_path(self, tmp_path):
        cfg = write_config(
            tmp_path / "gen.cfg",
            data=", ".join(bundled_paths()),
            t_max=15,
            covariance="diagonal_scalar",
            init_omega="0.01, 0.01",
        )
        out = tmp_path / "gen"
        assert main(["fit", "--config", cfg, "--out", str(out)]) == 0
        payload = json.loads((tmp_path / "gen.json").read_text())
        # same model as cellwise_two_level here, so the same estimates
        assert payload["dispersion"]["sigma2"] == pytest.approx(0.089272**2, rel=1e-3)

    def test_example48_structure_path(self, tmp_path):
        # per-array noise scales with the shock held off: the fit decouples
        # into two arrays whose noise variances may differ
        cfg = write_config(
            tmp_path / "ex.cfg",
            data=", ".join(bundled_paths()),
            t_max=15,
            covariance="example48",
            sigma2="0.0",
            tau2="0.0",
            v2="estimate",
        )
        out = tmp_path / "ex"
        assert main(["fit", "--config", cfg, "--out", str(out)]) == 0
        payload = json.loads((tmp_path / "ex.json").read_text())
        disp = payload["dispersion"]
        assert set(disp) == {"sigma2", "tau2_1", "tau2_2", "v2_1", "v2_2"}
        assert disp["sigma2"] == 0.0
        # per-array ML noise variance equals the mean squared OLS residual,
        # and the long-tailed array carries the larger cell noise here
        assert disp["v2_1"] == pytest.approx(0.03186, abs=5e-4)
        assert disp["v2_2"] == pytest.approx(0.01470, abs=5e-4)

    def test_reports_are_deterministic(self, bundled_config, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["fit", "--config", bundled_config, "--out", str(out1)])
        main(["fit", "--config", bundled_config, "--out", str(out2)])
        assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


class TestForecastCommand:
    def test_reserve_report(self, bundled_config, tmp_path):
        out = tmp_path / "fc"
        rc = main([
            "forecast", "--config", bundled_config, "--out", str(out),
            "--independence-counterfactual",
        ])
        assert rc == 0
        payload = json.loads((tmp_path / "fc.json").read_text())
        assert payload["future_cells_per_array"] == 105
        assert payload["reserves"][0] == pytest.approx(86118, rel=1e-3)
        assert payload["reserves"][1] == pytest.approx(50640, rel=1e-3)
        assert payload["reserve_total"] == pytest.approx(136758, rel=1e-3)
        assert payload["std_errors"][0] == pytest.approx(4569, rel=1e-2)
        assert payload["reserve_correlation"] == pytest.approx(0.229, abs=0.01)
        assert payload["independence_cov_percent"] == pytest.approx(5.33, abs=0.05)
        text = (tmp_path / "fc.txt").read_text()
        assert "reserve correlation" in text
        assert "independence counterfactual" in text

    def test_zero_future_region(self, tmp_path):
        cfg = write_config(
            tmp_path / "zero.cfg",
            data=", ".join(bundled_paths()),
            t_max=29,
        )
        out = tmp_path / "zero"
        assert main(["forecast", "--config", cfg, "--out", str(out)]) == 0
        payload = json.loads((tmp_path / "zero.json").read_text())
        assert payload["reserve_total"] == 0.0
        assert payload["std_error_total"] == 0.0


class TestSimulateCommand:
    def simulate_config(self, tmp_path, seed=11):
        return write_config(
            tmp_path / "sim.cfg",
            n_arrays=2,
            n_rows=4,
            n_cols=4,
            row_effects_1="100, 102, 104, 106",
            row_effects_2="300, 297, 294, 291",
            col_effects_1="0.2, 0.3, 0.25, 0.1",
            col_effects_2="0.4, 0.3, 0.2, 0.05",
            shock_mean_log=0.15,
            shock_sd=0.1,
            idio_sd=0.15,
            seed=seed,
        )

    def test_simulate_writes_regenerable_csv(self, tmp_path):
        cfg = self.simulate_config(tmp_path)
        out1, out2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
        assert main(["simulate", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        coll = read_claims_csv([out1])
        assert coll.layout.n_arrays == 2
        assert coll.layout.cells_per_array == 16

    def test_seed_flag_overrides(self, tmp_path):
        cfg = self.simulate_config(tmp_path)
        out1, out2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
        main(["simulate", "--config", cfg, "--out", str(out1)])
        main(["simulate", "--config", cfg, "--out", str(out2), "--seed", "99"])
        assert out1.read_bytes() != out2.read_bytes()

    def test_simulate_then_fit_recovers_scale(self, tmp_path):
        cfg = write_config(
            tmp_path / "big.cfg",
            n_arrays=2,
            n_rows=8,
            n_cols=8,
            row_effects_1=", ".join(["1000"] * 8),
            row_effects_2=", ".join(["2000"] * 8),
            col_effects_1=", ".join(["0.1"] * 8),
            col_effects_2=", ".join(["0.2"] * 8),
            shock_mean_log=0.0,
            shock_sd=0.1,
            idio_sd=0.15,
            seed=5,
        )
        data = tmp_path / "sim.csv"
        main(["simulate", "--config", cfg, "--out", str(data)])
        fit_cfg = write_config(tmp_path / "fit.cfg", data=str(data))
        out = tmp_path / "fit"
        assert main(["fit", "--config", fit_cfg, "--out", str(out)]) == 0
        payload = json.loads((tmp_path / "fit.json").read_text())
        assert np.sqrt(payload["dispersion"]["v2"]) == pytest.approx(0.15, abs=0.06)


class TestInspectCommand:
    def test_dimension_listing(self, bundled_config, capsys):
        assert main(["inspect", "--config", bundled_config]) == 0
        out = capsys.readouterr().out
        assert "cells per array |A|:       120" in out
        assert "observations N|A|:         240" in out
        assert "M after reduction:         240 x 58" in out
        assert "xi_shared" in out


class TestErrorPaths:
    def test_missing_data_file_is_config_error(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", data="nowhere.csv")
        assert main(["fit", "--config", cfg]) == 2

    def test_unknown_partition_lists_choices(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "c.cfg", data=", ".join(bundled_paths()), partition="rows"
        )
        assert main(["fit", "--config", cfg]) == 2
        assert "array, cell, row, column, diagonal" in capsys.readouterr().err

    def test_empty_data_file_rejected(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("array,accident,development,value\n")
        cfg = write_config(tmp_path / "c.cfg", data=str(empty))
        assert main(["fit", "--config", cfg]) == 3

    def test_parse_error_names_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("array,accident,development,value\n1,1,1,10\n1,1,x,20\n")
        cfg = write_config(tmp_path / "c.cfg", data=str(bad))
        assert main(["fit", "--config", cfg]) == 3
        assert "bad.csv:3" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("dta = file.csv\n")
        assert main(["fit", "--config", str(cfg)]) == 2

    def test_non_congruent_arrays_rejected(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text(
            "array,accident,development,value\n1,1,1,10\n1,1,2,20\n2,1,1,30\n"
        )
        cfg = write_config(tmp_path / "c.cfg", data=str(f))
        assert main(["fit", "--config", cfg]) == 3

    def test_numerical_failure_exit_code(self, tmp_path):
        # duplicated arrays make the closed form degenerate
        coll = read_claims_csv(bundled_paths())
        vals = np.stack([coll.values[0], coll.values[0]])
        dup = cs.ClaimCollection(coll.layout, vals)
        data = tmp_path / "dup.csv"
        write_claims_csv(data, dup)
        cfg = write_config(tmp_path / "c.cfg", data=str(data), t_max=15)
        assert main(["fit", "--config", cfg]) == 4


def test_claims_csv_roundtrip(tmp_path, bundled):
    path = tmp_path / "out.csv"
    write_claims_csv(path, bundled)
    back = read_claims_csv([path])
    np.testing.assert_array_equal(
        np.nan_to_num(back.values), np.nan_to_num(bundled.values)
    )
