"""End-to-end CLI behavior: subcommands, exit codes, files on disk."""
import json
import pathlib

import pytest
from click.testing import CliRunner

from squeezecount import cli


@pytest.fixture
def runner():
    return CliRunner()


def test_version(runner):
    res = runner.invoke(cli.main, ["--version"])
    assert res.exit_code == 0
    assert "squeezecount" in res.output


def test_presets_listing(runner):
    res = runner.invoke(cli.main, ["presets"])
    assert res.exit_code == 0
    for name in ("fig2", "fig6", "fig9b", "fig10b"):
        assert name in res.output
    assert "coincidence" in res.output


def test_dark_mean_command(runner):
    res = runner.invoke(cli.main, ["dark-mean", "--wavelength", "9.7e-6",
                                   "--temperature", "300"])
    assert res.exit_code == 0
    assert res.output.strip() == "0.00717537189402"


def test_dark_mean_rejects_bad_arguments(runner):
    res = runner.invoke(cli.main, ["dark-mean", "--wavelength", "9.7e-6",
                                   "--temperature", "0"])
    assert res.exit_code == 2
    assert "error:" in res.output


# ---------------------------------------------------------------------------
# sweep

def test_sweep_needs_a_source(runner):
    res = runner.invoke(cli.main, ["sweep"])
    assert res.exit_code == 2
    assert "needs --preset or --config" in res.output


def test_sweep_preset_writes_csv_and_figure(runner, tmp_path):
    out = tmp_path / "fig5.csv"
    res = runner.invoke(cli.main, ["sweep", "--preset", "fig5",
                                   "--output", str(out)])
    assert res.exit_code == 0, res.output
    assert f"wrote {out}" in res.output
    png = out.with_suffix(".png")
    assert png.exists() and png.stat().st_size > 1000
    lines = out.read_text().splitlines()
    assert lines[0].startswith("axis,na_mean")
    assert len(lines) == 1 + 11  # N = 0 .. 10, one engine
    # reruns are byte-identical
    first = out.read_bytes()
    res2 = runner.invoke(cli.main, ["sweep", "--preset", "fig5",
                                    "--output", str(out)])
    assert res2.exit_code == 0
    assert out.read_bytes() == first


def test_sweep_no_plot_skips_the_figure(runner, tmp_path):
    out = tmp_path / "s.csv"
    res = runner.invoke(cli.main, ["sweep", "--preset", "fig5",
                                   "--output", str(out), "--no-plot"])
    assert res.exit_code == 0
    assert out.exists()
    assert not out.with_suffix(".png").exists()
    assert ".png" not in res.output


def test_sweep_json_format(runner, tmp_path):
    out = tmp_path / "s.json"
    res = runner.invoke(cli.main, ["sweep", "--preset", "fig5", "--format", "json",
                                   "--output", str(out), "--no-plot"])
    assert res.exit_code == 0
    payload = json.loads(out.read_text())
    assert payload["metadata"]["config"]["preset"] == "fig5"
    assert len(payload["columns"]["axis"]) == 11


def test_sweep_heatmap_and_steps_layouts(runner, tmp_path):
    for preset in ("fig7", "fig4"):
        out = tmp_path / f"{preset}.csv"
        res = runner.invoke(cli.main, ["sweep", "--preset", preset,
                                       "--output", str(out)])
        assert res.exit_code == 0, res.output
        assert out.with_suffix(".png").stat().st_size > 1000


def test_sweep_from_config_file(runner, tmp_path):
    cfg = tmp_path / "scan.cfg"
    cfg.write_text("axis = N : 0 .. 4\nns = 1\nnalpha = 2\n")
    out = tmp_path / "scan.csv"
    res = runner.invoke(cli.main, ["sweep", "--config", str(cfg),
                                   "--output", str(out), "--no-plot"])
    assert res.exit_code == 0
    assert "5 rows" in res.output


def test_sweep_config_on_top_of_preset(runner, tmp_path):
    cfg = tmp_path / "narrow.cfg"
    cfg.write_text("axis = N : 0 .. 2\n")
    out = tmp_path / "narrow.csv"
    res = runner.invoke(cli.main, ["sweep", "--preset", "fig2", "--config", str(cfg),
                                   "--output", str(out), "--no-plot"])
    assert res.exit_code == 0
    assert "6 rows" in res.output  # 3 N values x 2 probe settings


def test_sweep_bad_config_is_usage_error(runner, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("axis = N : 0 .. 3\nvoltage = 5\n")
    res = runner.invoke(cli.main, ["sweep", "--config", str(cfg)])
    assert res.exit_code == 2
    assert "line 2" in res.output


def test_sweep_missing_config_file(runner, tmp_path):
    res = runner.invoke(cli.main, ["sweep", "--config", str(tmp_path / "nope.cfg")])
    assert res.exit_code == 2
    assert "cannot read config" in res.output


def test_sweep_bad_engine_flag(runner):
    res = runner.invoke(cli.main, ["sweep", "--preset", "fig5",
                                   "--engines", "analytic,magic"])
    assert res.exit_code == 2
    assert "unknown engine" in res.output


def test_sweep_cutoff_ceiling_failure_exits_one(runner, tmp_path):
    cfg = tmp_path / "tight.cfg"
    cfg.write_text("axis = N : [1]\nns = 2\nnalpha = 25\nengines = fock\n"
                   "cutoff_ceiling = 8\n")
    res = runner.invoke(cli.main, ["sweep", "--config", str(cfg), "--no-plot",
                                   "--output", str(tmp_path / "t.csv")])
    assert res.exit_code == 1
    assert "error:" in res.output


# ---------------------------------------------------------------------------
# verify

def test_verify_clean_run_exits_zero(runner, tmp_path):
    out = tmp_path / "report.json"
    res = runner.invoke(cli.main, ["verify", "--output", str(out)])
    assert res.exit_code == 0, res.output
    report = json.loads(out.read_text())
    assert report["pass"] is True
    assert len(report["checks"]) == 9


def test_verify_injected_defect_exits_one(runner):
    res = runner.invoke(cli.main, ["verify", "--inject-squeezer-sign-flip",
                                   "--cutoff-ceiling", "128"])
    assert res.exit_code == 1
    report = json.loads(res.output)
    assert report["pass"] is False
    assert report["sign_flip_injected"] is True


def test_verify_rejects_negative_tolerance(runner):
    res = runner.invoke(cli.main, ["verify", "--tolerance", "-1"])
    assert res.exit_code == 2


# ---------------------------------------------------------------------------
# classify

def test_classify_measured_mean(runner):
    res = runner.invoke(cli.main, ["classify", "--measured-mean", "4957"])
    assert res.exit_code == 0, res.output
    payload = json.loads(res.output)
    assert payload["n_hat"] == 1
    assert payload["required_shots"] == 465
    assert payload["saturated"] is False
    assert payload["shots"] is None
    assert payload["params"]["ns"] == 2.0


def test_classify_scale_aware_under_loss(runner):
    mean = 0.5 * 0.8 * 4957.0
    res = runner.invoke(cli.main, ["classify", "--measured-mean", str(mean),
                                   "--eta1", "0.5", "--eta2", "0.8"])
    payload = json.loads(res.output)
    assert payload["n_hat"] == 1


def test_classify_needs_exactly_one_source(runner, tmp_path):
    res = runner.invoke(cli.main, ["classify"])
    assert res.exit_code == 2
    shots = tmp_path / "s.txt"
    shots.write_text("# squeezecount shots v1\n1 1\n")
    res2 = runner.invoke(cli.main, ["classify", "--measured-mean", "5",
                                    "--shots-file", str(shots)])
    assert res2.exit_code == 2


def test_classify_from_shots_file(runner, tmp_path):
    shots = tmp_path / "shots.txt"
    shots.write_text("# squeezecount shots v1\n# seed: 5\n66 66\n66 66\n")
    res = runner.invoke(cli.main, ["classify", "--shots-file", str(shots)])
    assert res.exit_code == 0, res.output
    payload = json.loads(res.output)
    assert payload["measured_mean"] == pytest.approx(4356.0)
    assert payload["n_hat"] == 0
    assert payload["shots"] == 2


def test_classify_bad_shots_file(runner, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2\n")
    res = runner.invoke(cli.main, ["classify", "--shots-file", str(bad)])
    assert res.exit_code == 2
    assert "cannot load shots" in res.output


def test_classify_rejects_bad_params(runner):
    res = runner.invoke(cli.main, ["classify", "--measured-mean", "5",
                                   "--ns", "-1"])
    assert res.exit_code == 2


def test_classify_single_level_has_no_budget(runner):
    res = runner.invoke(cli.main, ["classify", "--measured-mean", "4300",
                                   "--n-max", "0"])
    assert res.exit_code == 0
    payload = json.loads(res.output)
    assert payload["n_hat"] == 0
    assert payload["required_shots"] is None
