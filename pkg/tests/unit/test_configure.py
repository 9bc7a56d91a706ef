from granulum import ValidationError
from granulum.configure import (
    EvaluateConfig,
    FitConfig,
    GenConfig,
    ScoreConfig,
    config_to_dict,
    load_config,
    presets_directory,
)
from omegaconf import OmegaConf
import pytest


def test_defaults():
    score = load_config(ScoreConfig)
    assert score.damping == 0.85 and score.levels == 3
    assert isinstance(score.fit, FitConfig)
    evaluate = load_config(EvaluateConfig)
    assert evaluate.k_groups == [3, 4, 6, 8, 10, 12, 14]
    assert evaluate.dampings[0] == 0.05 and evaluate.dampings[-1] == 0.95


def test_merge_order(tmp_path):
    path = tmp_path / "score.yaml"
    path.write_text("damping: 0.5\nfit:\n  tolerance: 0.001\n", encoding="utf-8")
    base = OmegaConf.create({"damping": 0.6, "levels": 2})
    config = load_config(ScoreConfig, path, ["fit.max_iterations=7"], base=base)
    assert config.damping == 0.5
    assert config.levels == 2
    assert config.fit.tolerance == 0.001 and config.fit.max_iterations == 7


def test_invalid_values(tmp_path):
    with pytest.raises(ValidationError):
        load_config(ScoreConfig, overrides=["damping=high"])
    with pytest.raises(ValidationError):
        load_config(ScoreConfig, overrides=["unknown_key=1"])
    with pytest.raises(ValidationError, match="not found"):
        load_config(ScoreConfig, tmp_path / "missing.yaml")
    with pytest.raises(ValidationError, match="n_users"):
        load_config(GenConfig, overrides=["seed=1"])


@pytest.mark.parametrize("preset", ["smoke", "binary", "full_scale", "ego"])
def test_generate_presets_load(preset):
    config = load_config(GenConfig, presets_directory / "generate" / f"{preset}.yaml")
    assert config.seed == 1
    assert len(config.item_names()) > 0


def test_config_to_dict():
    content = config_to_dict(GenConfig(seed=3, n_users=10))
    assert content["seed"] == 3
    assert content["graph"]["mode"] == "preferential"
    assert content["byte_ranges"][0] == [10, 80]
