from pathlib import Path

import pytest
from click.testing import CliRunner

from emberlab.cli import load_config_file, main, parse_grid
from emberlab.errors import ConfigError

TINY_ARGS = ["--grid", "8x8", "--steps", "4", "--seed", "3"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cliws")
    config = root / "sweep.cfg"
    config.write_text("patterns=strip_south,outward\n"
                      "speeds=1.0,4.0\n"
                      "directions=230.0,310.0\n"
                      "# comment line\n")
    runner = CliRunner()
    result = runner.invoke(main, ["generate", "--config", str(config),
                                  "--out", str(root / "data")] + TINY_ARGS)
    assert result.exit_code == 0, result.output
    result = runner.invoke(main, ["train", "--config", str(config),
                                  "--data", str(root / "data"),
                                  "--out", str(root / "ck"),
                                  "--epochs", "1"] + TINY_ARGS)
    assert result.exit_code == 0, result.output
    return root, config, runner


class TestHelpers:
    def test_parse_grid(self):
        assert parse_grid("16x24") == (16, 24)
        with pytest.raises(ConfigError):
            parse_grid("16by24")

    def test_config_file(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("a=1\n\n# note\nb = x\n")
        assert load_config_file(str(path)) == {"a": "1", "b": "x"}
        path.write_text("broken\n")
        with pytest.raises(ConfigError):
            load_config_file(str(path))


class TestVerbs:
    def test_generate_output(self, workspace):
        root, _, _ = workspace
        assert (root / "data" / "manifest.txt").is_file()
        assert (root / "data" / "runs").is_dir()

    def test_train_checkpoint(self, workspace):
        root, _, _ = workspace
        assert (root / "ck" / "bundle.txt").is_file()
        assert (root / "ck" / "train_log.kv").is_file()

    def test_evaluate(self, workspace):
        root, config, runner = workspace
        result = runner.invoke(main, ["evaluate", "--data", str(root / "data"),
                                      "--checkpoint", str(root / "ck"),
                                      "--out", str(root / "eval")])
        assert result.exit_code == 0, result.output
        assert "match_ignition" in result.output
        kv = (root / "eval" / "metrics.kv").read_text()
        assert "mean.mse=" in kv
        assert "baseline.match_wind.mse=" in kv

    def test_baseline(self, workspace):
        root, _, runner = workspace
        result = runner.invoke(main, ["baseline", "--data", str(root / "data"),
                                      "--out", str(root / "bl")])
        assert result.exit_code == 0, result.output
        assert "baseline.match_ignition.mse=" in \
            (root / "bl" / "baseline.kv").read_text()

    def test_ablate(self, workspace):
        root, _, runner = workspace
        result = runner.invoke(main, ["ablate", "--data", str(root / "data"),
                                      "--out", str(root / "abl"),
                                      "--epochs", "1"])
        assert result.exit_code == 0, result.output
        kv = (root / "abl" / "ablation.kv").read_text()
        for label in ("none", "FT", "B", "U", "FM"):
            assert f"ablation.{label}.mse=" in kv

    def test_missing_out_fails_cleanly(self, workspace):
        _, _, runner = workspace
        result = runner.invoke(main, ["generate"])
        assert result.exit_code != 0
        assert "required" in result.output

    def test_unknown_data_dir_fails_cleanly(self, workspace):
        root, _, runner = workspace
        result = runner.invoke(main, ["evaluate", "--data",
                                      str(root / "nope"),
                                      "--checkpoint", str(root / "ck"),
                                      "--out", str(root / "e2")])
        assert result.exit_code != 0
