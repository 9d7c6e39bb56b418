import copy
import json

import pytest

from petrec.cli import EXIT_CONFIG, EXIT_OK, EXIT_PREREQ, EXIT_RUNTIME, main
from petrec.config import (
    DESK_DEFAULTS,
    config_hash,
    load_config,
    validate_config,
)
from petrec.errors import ConfigError


def _cfg(**overrides):
    cfg = copy.deepcopy(DESK_DEFAULTS)
    for path, value in overrides.items():
        node = cfg
        parts = path.split(".")
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value
    return cfg


class TestValidation:
    def test_defaults_are_valid(self):
        validate_config(_cfg())

    def test_profiles_are_valid(self):
        for profile in ("desk", "paper-shape"):
            load_config(None, profile)

    @pytest.mark.parametrize(
        "path,value",
        [
            ("phantom.n_regions", 1),
            ("phantom.n_regions", 300),
            ("phantom.dims", [32, 64]),
            ("phantom.uptake_range", [2.0, 0.5]),
            ("dose.dose_fraction", 0.0),
            ("dose.dose_fraction", 1.5),
            ("folds.k", 2),
            ("folds.folds_to_run", []),
            ("folds.folds_to_run", [5]),
            ("generator.input_slices", 2),
            ("generator.patch_size", 7),
            ("sdam.kernel_size", 4),
            ("training.transgan.epochs", 0),
            ("seed", "not-a-number"),
        ],
    )
    def test_bad_value_names_json_path(self, path, value):
        with pytest.raises(ConfigError) as exc:
            validate_config(_cfg(**{path: value}))
        assert path.split(".")[0] in str(exc.value)

    def test_embed_dim_head_divisibility(self):
        with pytest.raises(ConfigError, match="embed_dim"):
            validate_config(_cfg(**{"generator.embed_dim": 65}))

    def test_k_larger_than_cohort(self):
        with pytest.raises(ConfigError, match="folds.k"):
            validate_config(_cfg(**{"phantom.n_subjects": 3, "folds.k": 5}))

    def test_missing_perceptual_weights_file(self):
        with pytest.raises(ConfigError, match="vgg16_weights"):
            validate_config(_cfg(**{"perceptual.vgg16_weights": "/no/such/file.pt"}))


class TestLoadConfig:
    def test_unknown_profile(self):
        with pytest.raises(ConfigError, match="profile"):
            load_config(None, "cluster")

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/no/such/config.json")

    def test_invalid_json(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError, match="JSON"):
            load_config(str(bad))

    def test_non_object_root(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="object"):
            load_config(str(bad))

    def test_user_overrides_merge_deeply(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"phantom": {"n_subjects": 7}}))
        cfg = load_config(str(path))
        assert cfg["phantom"]["n_subjects"] == 7
        assert cfg["phantom"]["dims"] == DESK_DEFAULTS["phantom"]["dims"]

    def test_seed_override_wins(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"seed": 5}))
        assert load_config(str(path), seed_override=99)["seed"] == 99

    def test_paper_shape_profile_dims(self):
        cfg = load_config(None, "paper-shape")
        assert cfg["phantom"]["dims"] == [16, 256, 256]
        assert cfg["folds"]["k"] == 10


class TestConfigHash:
    def test_stable_under_key_order(self):
        cfg = _cfg()
        shuffled = json.loads(json.dumps(cfg))
        assert config_hash(cfg) == config_hash(shuffled)

    def test_sensitive_to_values(self):
        assert config_hash(_cfg()) != config_hash(_cfg(seed=4321))


@pytest.fixture()
def tiny_config_file(tmp_path):
    cfg = {
        "output_dir": str(tmp_path / "run"),
        "phantom": {"dims": [4, 32, 32], "n_subjects": 3},
        "folds": {"folds_to_run": [0]},
        "training": {
            "transgan": {"epochs": 1},
            "sdam": {"epochs": 1},
        },
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestCLI:
    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"folds": {"k": 1}}))
        assert main(["info", "--config", str(bad)]) == EXIT_CONFIG

    def test_missing_prerequisite_exit_code(self, tiny_config_file):
        code = main(["train", "--phase", "transgan", "--config", str(tiny_config_file)])
        assert code == EXIT_PREREQ

    def test_generate_refuses_overwrite_then_forces(self, tiny_config_file, capsys):
        args = ["generate-data", "--config", str(tiny_config_file)]
        assert main(args) == EXIT_OK
        assert main(args) == EXIT_RUNTIME
        assert "--force" in capsys.readouterr().err
        assert main(args + ["--force"]) == EXIT_OK

    def test_regenerated_data_is_bit_identical(self, tiny_config_file, tmp_path):
        args = ["generate-data", "--config", str(tiny_config_file)]
        assert main(args) == EXIT_OK
        first = (tmp_path / "run/data/subj000/fpet.pvol").read_bytes()
        assert main(args + ["--force"]) == EXIT_OK
        assert (tmp_path / "run/data/subj000/fpet.pvol").read_bytes() == first

    def test_petrec_seed_env_override(self, tiny_config_file, tmp_path, monkeypatch):
        monkeypatch.setenv("PETREC_SEED", "777")
        assert main(["generate-data", "--config", str(tiny_config_file)]) == EXIT_OK
        manifest = json.loads((tmp_path / "run/data/data_manifest.json").read_text())
        assert manifest["subjects"]["subj000"]["phantom_seed"] == 777

    def test_petrec_seed_must_be_integer(self, tiny_config_file, monkeypatch):
        monkeypatch.setenv("PETREC_SEED", "lots")
        code = main(["generate-data", "--config", str(tiny_config_file)])
        assert code == EXIT_CONFIG

    def test_info_reports_parameter_counts(self, tiny_config_file, capsys):
        assert main(["info", "--config", str(tiny_config_file)]) == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        counts = out["parameter_counts"]
        assert counts["generator"] > 0
        assert counts["perceptual_encoders"] == 0  # frozen weights
        assert counts["total_trainable"] == (
            counts["generator"] + counts["discriminator"] + counts["sdam"]
        )
