import pytest

from fpsynth.config import (
    apply_overrides,
    build_experiment_config,
    parse_flat_config,
    resolve_config,
)
from fpsynth.errors import ConfigError, ParseError


class TestParser:
    def test_basic_parse(self):
        flat = parse_flat_config("a.b = 3\n# comment\nc = hello  # trailing\n\n")
        assert flat == {"a.b": "3", "c": "hello"}

    def test_missing_equals(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_flat_config("a = 1\nnonsense\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_flat_config("seed = 1\nseed = 2\n")


class TestSchema:
    def test_defaults(self):
        cfg = build_experiment_config({})
        assert cfg.source == "synthetic"
        assert cfg.unseen_fraction == 0.5
        assert cfg.diffusion.T == 200
        assert cfg.localizer.k == 5

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="frobnicate.level"):
            build_experiment_config({"frobnicate.level": "11"})

    def test_bad_value_named(self):
        with pytest.raises(ConfigError, match="diffusion.T"):
            build_experiment_config({"diffusion.T": "many"})

    def test_nested_assembly(self):
        cfg = build_experiment_config(
            {
                "split.strategy": "grid",
                "split.k_neighbors": "2",
                "diffusion.hidden": "32,16,32",
                "diffusion.sigma_w": "auto",
                "norm.detect_floor": "0.2",
                "augmenter.kind": "interpolator",
            }
        )
        assert cfg.split_strategy == "grid"
        assert cfg.density.k_neighbors == 2
        assert cfg.diffusion.hidden == (32, 16, 32)
        assert cfg.diffusion.sigma_w is None
        assert cfg.norm.detect_floor == 0.2
        assert cfg.augmenter == "interpolator"

    def test_validation_catches_bad_combos(self):
        with pytest.raises(ConfigError):
            build_experiment_config({"data.source": "file"})  # missing path
        with pytest.raises(ConfigError):
            build_experiment_config({"split.unseen_fraction": "1.0"})
        with pytest.raises(ConfigError):
            build_experiment_config({"localizer.variant": "oracle"})


class TestOverrides:
    def test_apply(self):
        flat = apply_overrides({"seed": "1"}, ["seed=2", "diffusion.T = 50"])
        assert flat["seed"] == "2"
        assert flat["diffusion.T"] == "50"

    def test_malformed(self):
        with pytest.raises(ConfigError):
            apply_overrides({}, ["seed"])

    def test_resolve_with_seed_flag(self, tiny_config_file):
        cfg = resolve_config(tiny_config_file, ["synth.ap_count=4"], seed=77)
        assert cfg.seed == 77
        assert cfg.synth.ap_count == 4
        assert cfg.synth.grid_nx == 5  # from file
