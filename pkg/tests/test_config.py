import pytest

from app.config import RunConfig, load_run_config, parse_layouts, settings
from app.models.channel_model import CellConfig
from app.models.learner_model import ModelKind
from app.utils.exceptions import ConfigError


def _cfg_file(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_defaults_reproduce_benchmark_cell():
    cfg = load_run_config()
    assert cfg.cell_config() == CellConfig()
    assert cfg.overrides() == {}
    assert cfg.split_spec().train_fraction == 0.65
    assert cfg.split_spec(external=True).train_fraction == 0.3


def test_settings_defaults():
    assert settings.workers >= 1
    assert isinstance(settings.default_seed, int)


def test_override_file(tmp_path):
    cfg = load_run_config(_cfg_file(tmp_path, "# smaller cells\nn_points=50\n"))
    assert cfg.cell_config().n_points == 50
    assert cfg.overrides() == {"n_points": "50"}


def test_unknown_key_names_file_and_key(tmp_path):
    path = _cfg_file(tmp_path, "n_pointz=50\n")
    with pytest.raises(ConfigError) as info:
        load_run_config(path)
    assert str(path) in info.value.detail
    assert "'n_pointz'" in info.value.detail
    assert "unknown key" in info.value.detail
    assert info.value.exit_code == 2


def test_bad_value_names_key(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_run_config(_cfg_file(tmp_path, "sigma_c=-1\n"))
    assert "'sigma_c'" in info.value.detail


def test_unparsable_layouts(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_run_config(_cfg_file(tmp_path, "layouts=fifty\n"))
    assert "'layouts'" in info.value.detail


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_run_config(tmp_path / "nope.cfg")
    assert "not found" in info.value.detail


def test_disabled_mmwave_band_is_accepted(tmp_path):
    cfg = load_run_config(_cfg_file(tmp_path, "p_tx_m=-inf\n"))
    assert cfg.cell_config().p_tx_m == float("-inf")


def test_hash_follows_values():
    base = RunConfig()
    assert base.config_hash() == RunConfig().config_hash()
    assert RunConfig(n_points=50).config_hash() != base.config_hash()
    assert len(base.config_hash()) == 64


def test_acceptance_search_space():
    space = RunConfig().search_space(ModelKind.nn, acceptance=True)
    assert space.layouts == ((50, 50),)
    assert space.alphas == (0.1,)
    full = RunConfig().search_space(ModelKind.nn)
    assert len(full.layouts) > 1
    assert full.gamma_grid[0] == 0.0 and full.gamma_grid[-1] == 1.0
    assert len(full.gamma_grid) == 21


def test_group_counts_must_fill_group(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_run_config(_cfg_file(tmp_path, "group_size=50\ngroup_train=10\n"))
    assert "group_size" in info.value.detail


def test_parse_layouts():
    assert parse_layouts("50;50,50") == ((50,), (50, 50))
    assert parse_layouts("3") == ((3,),)


def test_grids_record_the_search(tiny_config):
    cfg = load_run_config(tiny_config)
    assert cfg.grids()["layouts"] == "3"
    assert cfg.grids(acceptance=True)["alphas"] == "0.1"
    assert cfg.train_config(seed=4).max_epochs == 5
