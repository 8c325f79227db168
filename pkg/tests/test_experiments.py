import json
import os

import numpy as np
import pytest

from quadlab.cli import main
from quadlab.experiments import (
    CsvFormatError,
    ExperimentConfig,
    ReportTable,
    emit_report,
    load_csv,
    load_report_csv,
    run_fig1_sweep,
    run_sparse_recovery,
    run_table2_pattern,
    run_tables345,
    verdicts_pass,
    write_csv,
)


class TestCsvIo:
    def test_minimal_dataset(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y\n1.0,2.0\n3.0,4.0\n")
        data = load_csv(str(path), "y")
        assert data.n == 2 and data.d == 1
        assert data.response.tolist() == [2.0, 4.0]

    def test_missing_target_named(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(CsvFormatError, match="'zz'"):
            load_csv(str(path), "zz")

    def test_non_numeric_cell_located(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n3,oops\n")
        with pytest.raises(CsvFormatError, match="row 3"):
            load_csv(str(path), "b")

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n3\n")
        with pytest.raises(CsvFormatError, match="ragged"):
            load_csv(str(path), "b")

    def test_report_round_trip(self, tmp_path, rng):
        rows = rng.standard_normal((4, 3)).tolist()
        table = ReportTable(name="t", columns=["a", "b", "c"], rows=rows,
                            row_labels=["r1", "r2", "r3", "r4"])
        path = tmp_path / "t.csv"
        emit_report(table, str(path), "csv")
        back = load_report_csv(str(path))
        assert back.columns == table.columns
        assert back.row_labels == table.row_labels
        for r1, r2 in zip(back.rows, table.rows):
            assert r1 == r2  # bit-exact

    def test_matrix_round_trip(self, tmp_path, rng):
        m = rng.standard_normal((5, 2))
        path = tmp_path / "m.csv"
        write_csv(str(path), ["u", "v"], m)
        header, back = load_csv(str(path))
        assert header == ["u", "v"]
        assert np.array_equal(back, m)

    def test_json_emit(self, tmp_path):
        table = ReportTable(name="t", columns=["a"], rows=[[1.25]],
                            metadata={"verdicts": {"ok": True}})
        path = tmp_path / "t.json"
        emit_report(table, str(path), "json")
        loaded = json.loads(path.read_text())
        assert loaded["rows"] == [[1.25]]
        assert loaded["metadata"]["verdicts"]["ok"] is True


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig(experiment="tables345")
        assert cfg.sample_sizes == [100, 1000, 10000]
        assert cfg.replications == 20
        assert len(cfg.x_grid) == 25

    def test_unknown_id(self):
        with pytest.raises(ValueError):
            ExperimentConfig(experiment="bogus")

    def test_from_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"experiment": "sparse_recovery", "seed": 5,
                                    "replications": 2, "dimension": 8, "k_star": 2}))
        cfg = ExperimentConfig.from_json(str(path))
        assert cfg.dimension == 8 and cfg.replications == 2


class TestHarness:
    def test_tables345_reduced_reproducible(self):
        cfg = ExperimentConfig(experiment="tables345", seed=7,
                               sample_sizes=[80, 400], replications=3)
        a = run_tables345(cfg)
        b = run_tables345(cfg)
        for t1, t2 in zip(a, b):
            assert t1.rows == t2.rows

    def test_tables345_embeds_metadata(self):
        cfg = ExperimentConfig(experiment="tables345", seed=7,
                               sample_sizes=[60], replications=2)
        t = run_tables345(cfg)[0]
        assert t.metadata["seed"] == 7
        assert "version" in t.metadata
        assert t.metadata["config"]["experiment"] == "tables345"

    def test_zero_noise_interpolates(self):
        # with the noise switched off every fit recovers the line exactly
        from quadlab.regression import Dataset, fit_ols, fit_quantile, fit_se
        rng = np.random.default_rng(3)
        x = rng.standard_normal(50)
        data = Dataset(x[:, None], x.copy())
        for model in (fit_ols(data), fit_se(data), fit_quantile(data, 0.57276)):
            est = np.array([model.intercept, model.coefficients[0]])
            assert np.linalg.norm(est - np.array([0.0, 1.0])) < 1e-7

    def test_table2_pattern_passes(self):
        t = run_table2_pattern(ExperimentConfig(experiment="table2_pattern", seed=99))
        assert t.metadata["verdicts"]["kb_cross_objective_within_1e-6"]
        assert verdicts_pass([t])

    def test_fig1_sweep_small(self):
        cfg = ExperimentConfig(experiment="fig1_sweep", seed=5,
                               sample_sizes=[1500], x_grid=[0.0, 0.01])
        t = run_fig1_sweep(cfg)
        assert t.columns[0] == "x"
        assert len(t.rows) == 2
        assert all(r[-1] in (0.0, 1.0) for r in t.rows)

    def test_sparse_recovery_reduced(self):
        cfg = ExperimentConfig(experiment="sparse_recovery", seed=3,
                               sample_sizes=[60], replications=2,
                               dimension=8, k_star=2)
        t = run_sparse_recovery(cfg)
        assert verdicts_pass([t])
        assert t.row_labels == ["se_n60", "mse_n60"]

    def test_thread_env_matches_sequential(self, monkeypatch):
        cfg = ExperimentConfig(experiment="tables345", seed=11,
                               sample_sizes=[70], replications=4)
        seq = run_tables345(cfg)
        monkeypatch.setenv("QUADLAB_THREADS", "2")
        par = run_tables345(cfg)
        for t1, t2 in zip(seq, par):
            assert t1.rows == t2.rows


class TestCli:
    def test_simulate_fit_eval_pipeline(self, tmp_path):
        reg = tmp_path / "reg.csv"
        assert main(["simulate", "--kind", "regression", "--n", "200", "--seed", "3",
                     "--output", str(reg)]) == 0
        out = tmp_path / "fit.json"
        assert main(["fit", "--method", "quantile", "--alpha", "0.6",
                     "--input", str(reg), "--target", "y", "--output", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["method"] == "quantile"
        assert len(payload["coefficients"]) == 1
        ev = tmp_path / "ev.json"
        assert main(["eval", "--family", "mean_l1", "--input", str(reg),
                     "--column", "y", "--output", str(ev)]) == 0
        corners = json.loads(ev.read_text())
        assert corners["risk"] - corners["deviation"] == pytest.approx(
            corners["statistic"], abs=1e-9)

    def test_portfolio_command(self, tmp_path):
        rets = tmp_path / "r.csv"
        assert main(["simulate", "--kind", "returns", "--n", "300", "--seed", "8",
                     "--output", str(rets)]) == 0
        out = tmp_path / "p.json"
        assert main(["portfolio", "--objective", "cvar", "--alpha", "0.8",
                     "--mu", "0.0012", "--input", str(rets), "--output", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert sum(payload["weights"].values()) == pytest.approx(1.0, abs=1e-7)

    def test_portfolio_sweep_csv(self, tmp_path):
        rets = tmp_path / "r.csv"
        main(["simulate", "--kind", "returns", "--n", "400", "--seed", "8",
              "--output", str(rets)])
        out = tmp_path / "sweep.csv"
        assert main(["portfolio", "--mu", "0.0012", "--input", str(rets),
                     "--sweep", "0:0.004:0.002", "--format", "csv",
                     "--output", str(out)]) == 0
        header, matrix = load_csv(str(out))
        assert header[0] == "x" and matrix.shape[0] == 3

    def test_sparse_command(self, tmp_path, rng):
        x = rng.standard_normal((40, 4))
        y = 2.0 * x[:, 2] + 0.01 * rng.standard_normal(40)
        data = np.column_stack((x, y))
        src = tmp_path / "s.csv"
        write_csv(str(src), ["a", "b", "c", "d", "y"], data)
        out = tmp_path / "sp.json"
        assert main(["sparse", "--error", "se", "--k", "1", "--input", str(src),
                     "--target", "y", "--output", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["support"] == [2]

    def test_experiment_command_exit_code(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"experiment": "table2_pattern", "seed": 99}))
        rc = main(["experiment", "--config", str(cfg), "--output-dir", str(tmp_path)])
        assert rc == 0
        assert (tmp_path / "table2_pattern.csv").exists()
        assert (tmp_path / "table2_pattern.json").exists()

    def test_bad_input_reports_error(self, tmp_path):
        missing = tmp_path / "nope.csv"
        rc = main(["fit", "--method", "ols", "--input", str(missing), "--target", "y"])
        assert rc == 2
