"""TOML + environment configuration loading."""

import pytest

from depthseg.config import AppConfig, load_config
from depthseg.errors import ConfigError


def test_defaults_load_without_file():
    config = load_config(environ={})
    assert config.model.preset == "toy"
    assert config.model.use_depth is True
    assert config.train.lr == 1e-4
    assert config.loss.lam_mask == 20.0


def test_toml_sections_apply(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        "[train]\nlr = 3e-4\nbatch_size = 2\n"
        "[model]\npreset = 'toy'\nuse_depth = false\n"
        "[data]\nheight = 96\nwidth = 96\nsize_range = [10, 40]\n"
    )
    config = load_config(path, environ={})
    assert config.train.lr == 3e-4
    assert config.train.batch_size == 2
    assert config.model.use_depth is False
    assert config.data.height == 96
    assert config.data.size_range == (10, 40)


def test_loss_section_feeds_train_weights(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[loss]\nlam_mask = 10.0\nlam_aux = 0.0\n")
    config = load_config(path, environ={})
    assert config.loss.lam_mask == 10.0
    assert config.train.weights is config.loss
    assert config.train.weights.lam_aux == 0.0


def test_env_overrides_beat_toml(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[train]\nlr = 3e-4\n")
    env = {"DEPTHSEG_TRAIN__LR": "5e-4", "DEPTHSEG_SERVE__PORT": "9001"}
    config = load_config(path, environ=env)
    assert config.train.lr == 5e-4
    assert config.serve.port == 9001


def test_env_bool_coercion():
    config = load_config(environ={"DEPTHSEG_MODEL__USE_DEPTH": "false"})
    assert config.model.use_depth is False


def test_unknown_keys_are_collected(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[train]\nlr = 1e-3\nbogus = 1\n[nope]\nx = 2\n")
    with pytest.raises(ConfigError) as err:
        load_config(path, environ={})
    message = str(err.value)
    assert "train.bogus" in message
    assert "nope" in message


def test_validation_collects_multiple_problems():
    config = AppConfig()
    config.serve.port = 0
    config.eval.clicks = (3, 1)
    with pytest.raises(ConfigError) as err:
        config.validate()
    message = str(err.value)
    assert "port" in message
    assert "clicks" in message


def test_model_section_architecture_overrides(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[model]\nwidths = [8, 16, 32, 64]\ndepths = [1, 1, 1, 1]\nembed_dim = 32\n")
    config = load_config(path, environ={})
    enc = config.model.encoder_config()
    assert enc.widths == (8, 16, 32, 64)
    assert enc.embed_dim == 32


def test_frozen_data_section_is_rebuilt():
    config = load_config(environ={"DEPTHSEG_DATA__HEIGHT": "80", "DEPTHSEG_DATA__WIDTH": "80"})
    assert config.data.height == 80
    # frozen dataclass: replace() must have produced a fresh instance
    assert config.data is not AppConfig().data
