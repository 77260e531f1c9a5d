import csv
import json
import os

import numpy as np
import pytest

from paranneal.cli import main
from paranneal.mog import MogObjectivePrior, draw_benchmark_objective
from paranneal.sampling import make_rng

SCALING_CFG = """\
kind = scaling
seed = 4
replicates = 3
[objective]
dim = 2
components = 2
[sweep]
dim = 2, 3, 4, 5, 6
scale = 2
components = 1
[pa]
n_initial = 15
n_layers = 3
n_new = 3
[apf-1000]
n_particles = 12
n_layers = 3
[apf-500]
n_particles = 6
n_layers = 3
"""

QUADRATIC_CFG = """\
kind = quadratic
replicates = 3
[quadratic]
dim = 4
n_particles = 20
n_layers = 3
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def scaling_cfg(tmp_path):
    return write(tmp_path, "scaling.cfg", SCALING_CFG)


class TestExperimentOutput:
    def test_scaling_table_rows(self, tmp_path, scaling_cfg):
        out = tmp_path / "out"
        assert main(["scaling", "--config", scaling_cfg, "--out", str(out)]) == 0
        rows = read_csv(out / "scaling_dim.csv")
        assert rows[0] == ["grid_value", "method", "mean_I", "std_I", "eval_count", "replicates", "std_defined"]
        assert len(rows) == 1 + 5 * 3
        assert (out / "scaling_dim.csv").read_bytes().endswith(b"\n")
        raw = read_csv(out / "scaling_dim_raw.csv")
        assert len(raw) == 1 + 5 * 3 * 3

    def test_rerun_byte_identical(self, tmp_path, scaling_cfg):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["scaling", "--config", scaling_cfg, "--out", str(a)]) == 0
        assert main(["scaling", "--config", scaling_cfg, "--out", str(b), "--workers", "2"]) == 0
        names = sorted(n for n in os.listdir(a) if n.endswith(".csv"))
        assert names and names == sorted(n for n in os.listdir(b) if n.endswith(".csv"))
        for name in names:
            assert (a / name).read_bytes() == (b / name).read_bytes()
        meta_a, meta_b = (json.loads((d / "metadata.json").read_text()) for d in (a, b))
        for key in ("resolved_config", "master_seed", "version", "plan"):
            assert meta_a[key] == meta_b[key]

    def test_json_matches_csv(self, tmp_path, scaling_cfg):
        c, j = tmp_path / "c", tmp_path / "j"
        main(["scaling", "--config", scaling_cfg, "--out", str(c)])
        main(["scaling", "--config", scaling_cfg, "--out", str(j), "--format", "json"])
        rows = read_csv(c / "scaling_scale.csv")
        data = json.loads((j / "scaling_scale.json").read_text())
        assert data["columns"] == rows[0]
        for csv_row, rec in zip(rows[1:], data["rows"]):
            for col, cell in zip(rows[0], csv_row):
                value = rec[col]
                if isinstance(value, bool):
                    assert cell == str(value).lower()
                elif isinstance(value, float):
                    assert float(cell) == value
                else:
                    assert cell == str(value)

    def test_metadata_written(self, tmp_path, scaling_cfg):
        out = tmp_path / "m"
        main(["scaling", "--config", scaling_cfg, "--out", str(out), "--seed", "77"])
        meta = json.loads((out / "metadata.json").read_text())
        assert meta["master_seed"] == 77 and meta["status"] == "complete"
        assert "seed = 77" in (out / "resolved_config.txt").read_text()
        assert meta["invented_defaults"]

    def test_quadratic_outputs(self, tmp_path):
        out = tmp_path / "q"
        assert main(["quadratic", "--config", write(tmp_path, "q.cfg", QUADRATIC_CFG), "--out", str(out)]) == 0
        for name in ("discard", "retain", "retain-deep"):
            assert len(read_csv(out / f"quadratic_{name}.csv")) == 4
        assert len(read_csv(out / "quadratic_summary.csv")) == 4

    def test_workers_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PA_WORKERS", "2")
        out = tmp_path / "w"
        assert main(["quadratic", "--config", write(tmp_path, "q.cfg", QUADRATIC_CFG), "--out", str(out)]) == 0
        assert json.loads((out / "metadata.json").read_text())["workers"] == 2


class TestErrors:
    def test_config_error_exit_code(self, tmp_path, capsys):
        path = write(tmp_path, "bad.cfg", "kind=scaling\nlambda=1.0\n")
        assert main(["scaling", "--config", path, "--out", str(tmp_path / "x")]) == 2
        assert "lambda must be in (0,1)" in capsys.readouterr().err
        assert not (tmp_path / "x").exists()

    def test_kind_mismatch(self, tmp_path, capsys):
        path = write(tmp_path, "k.cfg", "kind = quadratic\n")
        assert main(["scaling", "--config", path]) == 2
        assert "does not match" in capsys.readouterr().err

    def test_invalid_method_lists_choices(self, capsys):
        with pytest.raises(SystemExit):
            main(["single-run", "--method", "cmaes"])
        err = capsys.readouterr().err
        for method in ("pa", "apf", "apf-retain", "apf-retain-deep"):
            assert method in err

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["scaling", "--config", str(tmp_path / "none.cfg")]) == 2
        assert "none.cfg" in capsys.readouterr().err

    def test_failed_replicate_exit_code(self, tmp_path, monkeypatch, capsys):
        import paranneal.benchmark as bm

        real = bm._quadratic_item

        def flaky(item):
            if item[2] == 1:
                raise FloatingPointError("boom")
            return real(item)

        monkeypatch.setattr(bm, "_quadratic_item", flaky)
        out = tmp_path / "f"
        assert main(["quadratic", "--config", write(tmp_path, "q.cfg", QUADRATIC_CFG), "--out", str(out)]) == 1
        err = capsys.readouterr().err
        assert "replicate=1" in err and "boom" in err
        assert json.loads((out / "metadata.json").read_text())["status"] == "failed"
        assert len(read_csv(out / "quadratic_retain.csv")) == 3


class TestSingleRun:
    def test_quadratic_pa_diagnostics(self, tmp_path, capsys):
        cfg = write(tmp_path, "s.cfg", "kind = single-run\nstart = 1.0\n[pa]\nn_initial = 20\nn_layers = 4\nn_new = 3\n")
        assert main(["single-run", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["eval_count"] == 32
        assert len(record["start"]) == 3
        for key in ("beta", "target", "survival"):
            assert len(record["layers"][key]) == 4
        saved = json.loads((tmp_path / "s" / "run_record.json").read_text())
        assert saved == record

    def test_mog_from_seed_single_component(self, tmp_path, capsys):
        cfg = write(tmp_path, "m.cfg", "kind = single-run\nobjective = mog-from-seed\nobjective_seed = 3\n"
                                       "[objective]\ndim = 2\ncomponents = 1\nscale = 2\n")
        assert main(["single-run", "--config", cfg]) == 0
        record = json.loads(capsys.readouterr().out)
        mog = draw_benchmark_objective(MogObjectivePrior(2, 1, 2.0), make_rng(3))
        assert np.linalg.norm(np.array(record["estimate"]) - mog.means[0]) < 0.25

    @pytest.mark.parametrize("method", ["apf", "apf-retain", "apf-retain-deep"])
    def test_apf_methods(self, method, capsys):
        assert main(["single-run", "--method", method, "--seed", "3"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["method"] == method and record["eval_count"] == 500

    def test_inline_mog(self, tmp_path, capsys):
        cfg = write(tmp_path, "i.cfg", "kind = single-run\nobjective = mog\nstart = 0\n[mog]\nweights = 1\n"
                                       "mean.0 = 1.5, -0.5\ncov.0 = 1, 0; 0, 1\n")
        assert main(["single-run", "--config", cfg]) == 0
        record = json.loads(capsys.readouterr().out)
        np.testing.assert_allclose(record["estimate"], [1.5, -0.5], atol=0.3)
