from ampg.configs.config import ExperimentConfig, ALGORITHMS
from ampg.configs.manual_fixture import ManualSampledPGConfig, ManualOracleConfig
from ampg.configs.random_mpg import RandomMPGConfig
from ampg.generators import GeneratorSpec
from ampg.meta import write_game, write_json
from ampg.tests.test_cases import *
import pytest


def test_defaults_and_overrides():
    """Class attributes are defaults; keyword arguments override them per instance."""
    config = ExperimentConfig(algorithm="npg", seeds=[3, 4])
    assert config.algorithm == "npg"
    assert config.get_seeds() == [3, 4]
    assert config.num_iterations == ExperimentConfig.num_iterations
    assert ExperimentConfig.seeds == [0]
    with pytest.raises(ValueError):
        ExperimentConfig(steps=10)


def test_copy():
    """copy keeps the subclass and applies overrides."""
    config = ManualOracleConfig().copy(num_iterations=5)
    assert isinstance(config, ManualOracleConfig)
    assert config.num_iterations == 5
    assert config.name == "manual_oracle_npg"


@pytest.mark.parametrize("overrides", [
    {"algorithm": "sgd"},
    {"seeds": []},
    {"eval_period": 0},
    {"num_iterations": -1},
    {"game": {"fixture": "manual", "file": "g.json"}},
    {"game": {"fixture": "three_state"}},
    {"game": {"file": "missing.json"}},
    {"rate": {"rule": "fastest"}},
    {"rate": {"rule": "manual"}},
    {"algorithm": "sampled_pg", "estimator": {"K": 10, "N1": 3, "N2": 2}},
    {"algorithm": "sampled_proxq", "estimator": {"B": 5, "N1": 10}},
])
def test_validate_errors(overrides):
    """Invalid fields are rejected by validate."""
    with pytest.raises(ValueError):
        ExperimentConfig(**overrides).validate()


def test_presets_validate():
    """Every preset is a valid experiment."""
    for config in (ManualSampledPGConfig(), ManualOracleConfig(), RandomMPGConfig()):
        assert config.validate() is config
        assert config.algorithm in ALGORITHMS


def test_from_json(tmp_path):
    """Configs load from JSON; invalid files carry their path."""
    path = str(tmp_path / "config.json")
    ExperimentConfig(name="loaded", algorithm="proxq", num_iterations=7).to_json(path)
    config = ExperimentConfig.from_json(path)
    assert config.name == "loaded"
    assert config.get_num_iterations() == 7

    write_json({"algorithm": "sgd"}, path)
    with pytest.raises(ValueError) as exc:
        ExperimentConfig.from_json(path)
    assert "Path:" in str(exc.value)


def test_load_game(tmp_path, manual_game):
    """Games come from fixtures, files or generator specs."""
    assert ExperimentConfig().load_game().get_game_id() == manual_game.get_game_id()

    path = str(tmp_path / "game.json")
    write_game(manual_game, path)
    assert ExperimentConfig(game={"file": path}).load_game().get_game_id() == manual_game.get_game_id()

    generator = GeneratorSpec(3, (2, 2), seed=2).to_dict()
    game = ExperimentConfig(game={"generator": generator, "condition": "1"}).load_game()
    assert game.get_potential() is not None
    assert ExperimentConfig(game={"generator": generator}).load_game().get_num_states() == 3


def test_get_rate_manual(manual_game):
    """Manual rates support constants, explicit schedules and halving schedules."""
    rate = ExperimentConfig(rate={"rule": "manual", "beta": "0.25"}).get_rate(manual_game)
    assert rate.get_rule() == "manual"
    assert rate(100) == 0.25

    rate = ExperimentConfig(rate={"rule": "manual", "schedule": [[0, "0.5"], [10, "0.1"]]}).get_rate(manual_game)
    assert rate(9) == 0.5
    assert rate(10) == 0.1

    rate = ManualSampledPGConfig().get_rate(manual_game)
    assert rate(0) == 0.5
    assert rate(20) == 0.25
    assert rate(10**6) == 1e-4


def test_get_rate_default(manual_game, manual_constants):
    """The default rule is the theorem rate of the algorithm."""
    rate = ExperimentConfig(algorithm="proxq").get_rate(manual_game, constants=manual_constants)
    assert rate.get_rule() == "proxq_theorem3"
    rate = ExperimentConfig(algorithm="npg", rate={"rule": "pg_theorem1"}).get_rate(manual_game)
    assert rate.get_rule() == "pg_theorem1"
    assert rate(0) == pytest.approx(1.0 / MANUAL_L_PHI)


def test_estimator_params():
    """Estimator fields are converted to integers and floats."""
    params = ManualSampledPGConfig().get_estimator_params()
    assert (params.K, params.N1, params.N2, params.alpha) == (1000, 1000, 50, 0.01)
    assert params.B is None
    assert params.gradient_length() == 51000


def test_with_modes():
    """Mode variants of the random preset get descriptive names."""
    config = RandomMPGConfig().with_modes(lvr_mode="small", rg_mode="large")
    assert config.name == "random_mpg-small-lvr-large"
    assert config.game["generator"]["lvr_mode"] == "small"
    assert RandomMPGConfig.game["generator"]["lvr_mode"] == "large"
    assert config.validate() is config
