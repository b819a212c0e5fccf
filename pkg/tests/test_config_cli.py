"""Config parsing, presets, CSV outputs and the command-line driver."""

import os

import numpy as np
import pytest

from llbar.cli import main
from llbar.config import (ConfigError, dump_config, get_preset, parse_config,
                          presets, with_overrides)
from llbar.diagnostics import CSV_COLUMNS
from llbar.experiment import read_csv, run_experiment

MINIMAL = """
[domain]
dim = 1
lengths = 1.0
points = 32

[basis]
cutoff = 8

[model]
lambda_r = 1.0
lambda_e = 0.5
gamma = 1.0

[noise]
k = 4
c_g = 0.2
c_h = 0.3

[scheme]
scheme = exponential_euler
dt = 1e-3
t_final = 0.02

[ensemble]
paths = 2
seed = 7

[initial]
kind = constant
value = 0.3, 0.0, 0.1
"""


class TestParsing:
    def test_minimal_config(self):
        cfg = parse_config(MINIMAL)
        assert cfg.dim == 1 and cfg.K == 4 and cfg.paths == 2
        assert cfg.ic_kind == "constant" and cfg.ic_value == (0.3, 0.0, 0.1)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key 'dtt'"):
            parse_config(MINIMAL.replace("dt = 1e-3", "dtt = 1e-3"))

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match=r"unknown section \[extra\]"):
            parse_config(MINIMAL + "\n[extra]\nfoo = 1\n")

    def test_missing_section_rejected(self):
        text = MINIMAL.replace("[ensemble]\npaths = 2\nseed = 7\n", "")
        with pytest.raises(ConfigError, match="missing required section"):
            parse_config(text)

    def test_bad_value_reported(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL.replace("dt = 1e-3", "dt = banana"))

    def test_invalid_resolution_caught_at_parse(self):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL.replace("kind = constant", "kind = warp"))

    def test_preset_round_trip(self):
        for name, cfg in presets().items():
            again = parse_config(dump_config(cfg))
            assert again == cfg, name

    def test_config_hash_stable_and_sensitive(self):
        a = parse_config(MINIMAL)
        b = parse_config(MINIMAL)
        assert a.config_hash() == b.config_hash()
        c = parse_config(MINIMAL.replace("seed = 7", "seed = 8"))
        assert a.config_hash() != c.config_hash()


class TestPresets:
    def test_known_names(self):
        names = set(presets())
        assert {"below-curie", "above-curie-decay", "llb-limit",
                "invariant-measure", "deterministic-dissipation",
                "zero-fixed-point"} <= names

    def test_unknown_preset_lists_available(self):
        with pytest.raises(ConfigError, match="available:"):
            get_preset("no-such-preset")

    def test_decay_preset_hypotheses(self):
        cfg = get_preset("above-curie-decay")
        assert cfg.kappa1 == -1.0
        assert cfg.c_g == 0.0
        assert cfg.nu is None and cfg.L_matrix is None
        meta = cfg.to_meta()
        # multiplicative amplitude solved so the guaranteed rate is 0.8
        assert abs(meta["mu"] - 0.8) < 1e-10
        assert meta["sigma_g2"] == 0.0

    def test_llb_preset(self):
        cfg = get_preset("llb-limit")
        assert cfg.dim == 1
        assert cfg.llb_epsilons == (1e-1, 1e-2, 1e-3)
        assert cfg.kappa1 == -1.0
        assert all(eps < cfg.lambda_r for eps in cfg.llb_epsilons)

    def test_meta_carries_derived_constants(self):
        meta = get_preset("below-curie").to_meta()
        for key in ("beta0", "lambda0", "sigma_g2", "sigma_h2", "mu", "mode_ordering"):
            assert key in meta

    def test_overrides(self):
        cfg = with_overrides(get_preset("below-curie"), paths=3, seed=99, out_dir="/tmp/x")
        assert cfg.paths == 3 and cfg.seed == 99 and cfg.out_dir == "/tmp/x"


class TestRunOutputs:
    def test_zero_preset_writes_zero_trajectory(self, tmp_path):
        cfg = with_overrides(get_preset("zero-fixed-point"), paths=1)
        out = run_experiment(cfg, tmp_path)
        header, columns, data = read_csv(tmp_path / "trajectory_000.csv")
        assert tuple(columns) == CSV_COLUMNS
        assert header["config_hash"] == cfg.config_hash()
        assert "noise_checksum" in header
        for key in ("beta0", "sigma_g2", "sigma_h2", "mu"):
            assert key in header["meta"]
        assert np.all(data[:, 1:] == 0.0)
        assert (tmp_path / "ensemble.csv").exists()

    def test_byte_identical_reruns(self, tmp_path):
        cfg = parse_config(MINIMAL)
        run_experiment(cfg, tmp_path / "a")
        run_experiment(cfg, tmp_path / "b")
        for name in ("trajectory_000.csv", "trajectory_001.csv", "ensemble.csv"):
            wa = (tmp_path / "a" / name).read_bytes()
            wb = (tmp_path / "b" / name).read_bytes()
            assert wa == wb, name

    def test_worker_pool_matches_serial(self, tmp_path):
        cfg = parse_config(MINIMAL)
        run_experiment(cfg, tmp_path / "serial", workers=1)
        run_experiment(cfg, tmp_path / "pool", workers=2)
        for name in ("trajectory_000.csv", "trajectory_001.csv", "ensemble.csv"):
            assert (tmp_path / "serial" / name).read_bytes() == \
                (tmp_path / "pool" / name).read_bytes()

    def test_float_round_trip(self, tmp_path):
        cfg = parse_config(MINIMAL)
        outcome = run_experiment(cfg, tmp_path)
        _, _, data = read_csv(tmp_path / "trajectory_000.csv")
        assert np.array_equal(data, outcome["results"][0][0])


class TestCli:
    def test_selftest_exit_zero(self, capsys):
        assert main(["selftest", "--fields", "2"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_presets_listing(self, capsys):
        assert main(["presets"]) == 0
        assert "above-curie-decay" in capsys.readouterr().out

    def test_presets_show_round_trips(self, capsys):
        assert main(["presets", "--show", "below-curie"]) == 0
        text = capsys.readouterr().out
        assert parse_config(text) == get_preset("below-curie")

    def test_info(self, capsys):
        assert main(["info"]) == 0
        assert "llbar" in capsys.readouterr().out

    def test_run_with_config_file(self, tmp_path, capsys):
        cfgfile = tmp_path / "exp.cfg"
        cfgfile.write_text(MINIMAL)
        out = tmp_path / "out"
        assert main(["run", str(cfgfile), "--out", str(out)]) == 0
        assert (out / "trajectory_001.csv").exists()

    def test_run_preset_with_overrides(self, tmp_path):
        out = tmp_path / "zero"
        assert main(["run", "preset:zero-fixed-point", "--paths", "1",
                     "--out", str(out)]) == 0
        assert (out / "trajectory_000.csv").exists()

    def test_missing_config_file_is_config_error(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.cfg")]) == 2

    def test_bad_config_exit_code(self, tmp_path):
        cfgfile = tmp_path / "bad.cfg"
        cfgfile.write_text(MINIMAL.replace("dt = 1e-3", "dt = banana"))
        assert main(["run", str(cfgfile)]) == 2

    def test_unknown_preset_exit_code(self):
        assert main(["run", "preset:nope"]) == 2

    def test_decay_test_rejects_wrong_regime(self, tmp_path):
        # below-curie violates the dissipative hypotheses -> config error
        assert main(["decay-test", "preset:below-curie", "--out", str(tmp_path)]) == 2

    def test_blow_up_exit_code(self, tmp_path):
        cfgfile = tmp_path / "explode.cfg"
        cfgfile.write_text(MINIMAL
                           .replace("dt = 1e-3", "dt = 0.5")
                           .replace("t_final = 0.02", "t_final = 5.0")
                           .replace("value = 0.3, 0.0, 0.1", "value = 80.0, 0.0, 0.0"))
        assert main(["run", str(cfgfile), "--out", str(tmp_path / "o")]) == 3

    def test_out_dir_from_environment(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("LLBAR_OUT", str(tmp_path / "root"))
        assert main(["run", "preset:zero-fixed-point", "--paths", "1"]) == 0
        assert (tmp_path / "root" / "zero-fixed-point" / "trajectory_000.csv").exists()
