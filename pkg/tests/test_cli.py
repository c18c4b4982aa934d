import shutil

import numpy as np
import pandas as pd
import pytest

from abcapp import main as cli
from abcapp.handlers import study as study_handler
from abcapp.handlers import verify as verify_handler
from abcapp.services.asymptotics import STUDY_COLUMNS, StudyResult
from abcapp.services.verification import CriterionResult
from abcapp.tools import aggregate_study
from abcapp.tools.aggregate_study import compare
from abcapp.utils.outputs import read_csv, read_header, read_json, write_csv

GAUSSIAN_CONF = (
    "model.name=gaussian\n"
    "model.n=100\n"
    "model.truth=0.3\n"
    "kernel.family=gaussian\n"
    "kernel.q=0.05\n"
    "sampler.N=20000\n"
    "sampler.mode=bernoulli\n"
    "study.datasets=3\n"
)

FIGURE1_CONF = (
    "model.name=gk\n"
    "model.d=7\n"
    "study.kind=figure1\n"
    "study.n_grid=200\n"
    "study.c_grid=1\n"
    "study.datasets=2\n"
    "study.inner_reps=2\n"
    "study.N=3000\n"
    "study.q_max=0.5\n"
    "study.q_min=0.02\n"
    "study.q_points=5\n"
    "study.gold_N=20000\n"
    "study.gold_q=0.01\n"
)


@pytest.fixture
def conf(tmp_path):
    def _write(text, name="run.conf"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write


def _cli(config, out, command, *flags):
    return cli.main([command, "--config", config, "--out", str(out), *flags])


class TestSimulate:
    def test_manifest_and_determinism(self, tmp_path, conf):
        path = conf(GAUSSIAN_CONF)
        assert _cli(path, tmp_path / "a", "simulate") == 0
        assert _cli(path, tmp_path / "b", "simulate") == 0
        manifest = read_json(tmp_path / "a" / "datasets" / "manifest.json")
        assert [d["index"] for d in manifest["datasets"]] == [0, 1, 2]
        assert len({d["seed"] for d in manifest["datasets"]}) == 3
        for d in manifest["datasets"]:
            a = (tmp_path / "a" / "datasets" / d["file"]).read_bytes()
            b = (tmp_path / "b" / "datasets" / d["file"]).read_bytes()
            assert a == b
            assert read_header(tmp_path / "a" / "datasets" / d["file"])["seed"] == str(d["seed"])

    def test_gk_defaults(self, tmp_path, conf):
        assert _cli(conf("study.datasets=1\n"), tmp_path, "simulate") == 0
        manifest = read_json(tmp_path / "datasets" / "manifest.json")
        assert manifest["model"] == "gk" and manifest["theta"] == [3.0, 1.0, 2.0, 0.5]


class TestRun:
    def test_summary_matches_csv(self, tmp_path, conf):
        assert _cli(conf(GAUSSIAN_CONF), tmp_path, "run") == 0
        summary = read_json(tmp_path / "run" / "summary.json")
        raw = read_csv(tmp_path / "run" / "raw.csv")
        adjusted = read_csv(tmp_path / "run" / "adjusted.csv")
        assert 0.0 <= summary["p_acc"] <= 1.0
        assert len(raw) == summary["n_accepted"]
        mean = np.average(raw["theta_1"], weights=raw["weight"])
        assert summary["raw"]["mean"][0] == pytest.approx(mean, rel=1e-12)
        adj_mean = np.average(adjusted["theta_star_1"], weights=adjusted["weight"])
        assert summary["adjusted"]["mean"][0] == pytest.approx(adj_mean, rel=1e-12)
        assert str(summary["_header"]["seed"]) == read_header(tmp_path / "run" / "raw.csv")["seed"]

    def test_no_adjusted_without_regression(self, tmp_path, conf):
        assert _cli(conf(GAUSSIAN_CONF + "regression.enabled=false\n"), tmp_path, "run") == 0
        assert not (tmp_path / "run" / "adjusted.csv").exists()
        assert "adjusted" not in read_json(tmp_path / "run" / "summary.json")

    def test_retained_rejected_draws(self, tmp_path, conf):
        assert _cli(conf(GAUSSIAN_CONF + "sampler.retain_rejected=true\n"), tmp_path, "run") == 0
        raw = read_csv(tmp_path / "run" / "raw.csv")
        assert len(raw) == 20_000 and 0 < raw["accepted"].sum() < 20_000

    def test_zero_acceptance_exit_code(self, tmp_path, conf):
        text = GAUSSIAN_CONF + "kernel.family=uniform\nkernel.epsilon=1e-12\nsampler.mode=threshold\n"
        assert _cli(conf(text), tmp_path, "run") == 3

    def test_config_error_exit_code(self, tmp_path, conf):
        assert _cli(conf("kernel.bandwidth=3\n"), tmp_path, "run") == 2

    @pytest.mark.parametrize(
        "text",
        [
            "model.truth=3,0,2,0.5\n",
            "model.truth=3,1,2\n",
            "model.truth=11,1,2,0.5\n",
            "model.d=600\n",
            "sampler.N=0\n",
            "study.q_min=0.6\n",
            "study.targets=median:0.1\n",
            "proposal.base=gaussian\nproposal.mean=1,2\n",
        ],
    )
    def test_invalid_values_exit_with_config_code(self, tmp_path, conf, text):
        assert _cli(conf(text), tmp_path, "simulate") == 2


class TestStudy:
    def test_figure1_schema_resume_and_report(self, tmp_path, conf):
        path = conf(FIGURE1_CONF)
        assert _cli(path, tmp_path, "study") == 0
        study_dir = tmp_path / "study"
        first = (study_dir / "study.csv").read_bytes()
        df = read_csv(study_dir / "study.csv")
        assert list(df.columns) == STUDY_COLUMNS
        assert len(df) == 1 * 1 * 4 * 2 * 2
        assert set(df["method"]) == {"raw", "adjusted"}

        cells = sorted((study_dir / "cells").glob("cell_*.csv"))
        assert len(cells) == 2
        cells[0].unlink()
        assert _cli(path, tmp_path, "study") == 0
        assert (study_dir / "study.csv").read_bytes() == first

        assert _cli(path, tmp_path, "report") == 0
        tidy = read_csv(study_dir / "figure1_tidy.csv")
        assert set(tidy["statistic"]) == {"median", "q025", "q975"}
        assert compare(study_dir / "study.csv", study_dir / "study_summary.csv") == 0
        assert aggregate_study.main([str(study_dir)]) == 0

    def _mark_cell(self, path):
        """Reescribe la celda con la misma cabecera y seed=-1 en el cuerpo."""
        header = read_header(path)
        df = read_csv(path)
        df["seed"] = -1
        write_csv(df, path, header["config_hash"], int(header["seed"]), extra={"cell": header["cell"]})

    def test_resume_survives_other_out_and_threads(self, tmp_path, conf):
        path = conf(FIGURE1_CONF)
        assert _cli(path, tmp_path / "a", "study") == 0
        cells = sorted((tmp_path / "a" / "study" / "cells").glob("cell_*.csv"))
        self._mark_cell(cells[0])
        shutil.copytree(tmp_path / "a" / "study", tmp_path / "b" / "study")
        assert _cli(path, tmp_path / "b", "study", "--threads", "2") == 0
        df = read_csv(tmp_path / "b" / "study" / "study.csv")
        assert (df["seed"] == -1).sum() == len(read_csv(cells[0]))

    def test_cells_from_another_config_are_recomputed(self, tmp_path, conf):
        old = conf(FIGURE1_CONF)
        assert _cli(old, tmp_path / "a", "study") == 0
        study_dir = tmp_path / "a" / "study"
        old_hash = read_header(study_dir / "study.csv")["config_hash"]
        for cell in study_dir.glob("cells/cell_*.csv"):
            self._mark_cell(cell)

        new = conf(FIGURE1_CONF + "study.N=2500\n", name="new.conf")
        assert _cli(new, tmp_path / "a", "study") == 0
        new_hash = read_header(study_dir / "study.csv")["config_hash"]
        assert new_hash != old_hash
        assert {read_header(c)["config_hash"] for c in study_dir.glob("cells/cell_*.csv")} == {new_hash}
        resumed = read_csv(study_dir / "study.csv")
        assert (resumed["seed"] >= 0).all()

        assert _cli(new, tmp_path / "fresh", "study") == 0
        pd.testing.assert_frame_equal(resumed, read_csv(tmp_path / "fresh" / "study" / "study.csv"))

    def test_regime_uses_configured_gold_settings(self, tmp_path, conf, monkeypatch):
        seen = {}

        def fake(*args, **kwargs):
            seen.update(kwargs)
            return StudyResult(pd.DataFrame({"n": [200], "p_acc": [0.5]}))

        monkeypatch.setattr(study_handler, "regime_sweep", fake)
        text = "study.kind=regime\nstudy.n_grid=200\nstudy.gold_N=30000\nstudy.gold_q=0.02\n"
        assert _cli(conf(text), tmp_path, "study") == 0
        assert (seen["gold_N"], seen["gold_q"]) == (30_000, 0.02)

    def test_regime_kind(self, tmp_path, conf):
        text = (
            "model.name=gaussian\nmodel.truth=0\nstudy.kind=regime\n"
            "study.n_grid=100,1000\nstudy.N=5000\nstudy.eps_gamma=0.4\n"
        )
        assert _cli(conf(text), tmp_path, "study") == 0
        df = read_csv(tmp_path / "study" / "regime.csv")
        assert list(df["n"]) == [100, 1000]
        assert df["p_acc"].between(0, 1).all()

    def test_report_without_study(self, tmp_path, conf):
        assert _cli(conf(""), tmp_path, "report") == 2


class TestVerify:
    def _fake(self, passed):
        return lambda cfg, full=None: [
            CriterionResult("1", "uno", "1.0", "1.0", True, 0.1),
            CriterionResult("2", "dos", "2.0", "1.0", passed, 0.1),
        ]

    def test_pass_writes_report(self, tmp_path, conf, monkeypatch):
        monkeypatch.setattr(verify_handler, "run_verification", self._fake(True))
        assert _cli(conf(""), tmp_path, "verify") == 0
        report = read_csv(tmp_path / "verify.csv")
        assert list(report["criterion"].astype(str)) == ["1", "2"]
        assert {"measured", "expected", "passed"} <= set(report.columns)

    def test_failure_exit_code(self, tmp_path, conf, monkeypatch):
        monkeypatch.setattr(verify_handler, "run_verification", self._fake(False))
        assert _cli(conf(""), tmp_path, "verify") == 4
        assert read_csv(tmp_path / "verify.csv")["passed"].tolist() == [1, 0]


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    out = capsys.readouterr().out
    for name in ("simulate", "run", "study", "verify", "report"):
        assert name in out


def test_pandas_reads_header_free_body(tmp_path, conf):
    assert _cli(conf(GAUSSIAN_CONF), tmp_path, "run") == 0
    text = (tmp_path / "run" / "raw.csv").read_text(encoding="utf-8").splitlines()
    assert text[0].startswith("# abcapp ") and text[1].startswith("# config_hash: ")
    assert isinstance(pd.read_csv(tmp_path / "run" / "raw.csv", comment="#"), pd.DataFrame)


def test_aggregate_tool_speaks_spanish(tmp_path, capsys):
    with pytest.raises(SystemExit):
        aggregate_study.main(["--help"])
    out = capsys.readouterr().out
    assert "Recalcula los cuantiles" in out and "Carpeta con study.csv" in out
    with pytest.raises(SystemExit, match="No se encontró study.csv"):
        aggregate_study.main([str(tmp_path / "vacio")])
