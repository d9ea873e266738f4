import os
import copy
from ampg.meta import read_json, read_game, parse_float, write_json
from ampg.generators import GeneratorSpec, generate, make_potential_game, manual_fixture
from ampg.oracle import estimate_constants
from ampg.algorithms import ORACLE_ALGORITHMS, DEFAULT_RULES, RATE_RULES, LearningRateRule, StepSchedule
from ampg.sampling import EstimatorParams

ALGORITHMS = ORACLE_ALGORITHMS + ("sampled_pg", "sampled_proxq")
FIXTURES = {"manual": manual_fixture}


class ExperimentConfig:
    """
    One experiment: a game source, an algorithm with its step-size rule,
    a run length, estimator parameters, seeds and an output directory.

    Class attributes are the defaults; subclasses override them as presets
    and instances override them per experiment.
    """
    name = "experiment"
    game = {"fixture": "manual"}
    algorithm = "pg"
    num_iterations = 1000
    eval_period = 10
    rate = {"rule": "default"}
    estimator = {}
    seeds = [0]
    output_dir = "ampg_output"
    reference = False
    num_processes = 4
    policy_sample_budget = 64
    enumeration_budget = 4096

    FIELDS = ("name", "game", "algorithm", "num_iterations", "eval_period", "rate", "estimator", "seeds",
              "output_dir", "reference", "num_processes", "policy_sample_budget", "enumeration_budget")

    def __init__(self, **overrides):
        for key, value in overrides.items():
            if key not in self.FIELDS:
                raise ValueError(f"Unknown experiment config field '{key}'. Expected one of {self.FIELDS}.")
            setattr(self, key, copy.deepcopy(value))

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name}, algorithm={self.algorithm}, T={self.num_iterations}, seeds={self.seeds})"

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        data = read_json(path)
        try:
            config = cls.from_dict(data)
            config.validate()
        except ValueError as exc:
            raise type(exc)(f"{exc} Path: {path}") from exc
        return config

    def to_dict(self):
        return {key: copy.deepcopy(getattr(self, key)) for key in self.FIELDS}

    def to_json(self, path):
        write_json(self.to_dict(), path)

    def copy(self, **overrides):
        data = self.to_dict()
        data.update(overrides)
        return type(self)(**data)

    def get_num_iterations(self):
        return int(self.num_iterations)

    def get_eval_period(self):
        return int(self.eval_period)

    def get_seeds(self):
        return [int(seed) for seed in self.seeds]

    def get_output_path(self):
        return os.path.join(self.output_dir, self.name)

    def validate(self):
        """
        :raises ValueError: If a field is out of range, a referenced file is
            missing, or the estimator parameters do not suit the algorithm.
        """
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"Unknown algorithm '{self.algorithm}'. Expected one of {ALGORITHMS}.")
        if len(self.seeds) == 0:
            raise ValueError("The seed list must not be empty.")
        if self.get_num_iterations() < 0 or self.get_eval_period() < 1:
            raise ValueError(f"Invalid run length {self.num_iterations} or evaluation period {self.eval_period}.")

        sources = [key for key in ("file", "generator", "fixture") if key in self.game]
        if len(sources) != 1:
            raise ValueError(f"Game source must name exactly one of 'file', 'generator', 'fixture', got {sorted(self.game)}.")
        if "file" in self.game and not os.path.isfile(self.game["file"]):
            raise ValueError(f"Game file '{self.game['file']}' does not exist.")
        if "fixture" in self.game and self.game["fixture"] not in FIXTURES:
            raise ValueError(f"Unknown fixture '{self.game['fixture']}'. Expected one of {sorted(FIXTURES)}.")

        rule = self.rate.get("rule", "default")
        if rule != "default" and rule not in RATE_RULES:
            raise ValueError(f"Unknown rate rule '{rule}'. Expected one of {RATE_RULES}.")
        if rule == "manual" and not any(key in self.rate for key in ("beta", "schedule", "decaying")):
            raise ValueError("A manual rate needs 'beta', 'schedule' or 'decaying'.")

        if self.algorithm == "sampled_pg":
            self.get_estimator_params().validate_gradient()
        elif self.algorithm == "sampled_proxq":
            self.get_estimator_params().validate_q()
        return self

    def load_game(self):
        """Builds or reads the game named by the ``game`` field."""
        if "file" in self.game:
            return read_game(self.game["file"])
        if "fixture" in self.game:
            return FIXTURES[self.game["fixture"]]()
        spec = GeneratorSpec.from_dict(self.game["generator"])
        condition = self.game.get("condition")
        return generate(spec) if condition is None else make_potential_game(spec, condition)

    def get_estimator_params(self):
        values = {}
        for key in ("K", "N1", "N2", "B"):
            if key in self.estimator:
                values[key] = int(self.estimator[key])
        if "alpha" in self.estimator:
            values["alpha"] = parse_float(self.estimator["alpha"])
        return EstimatorParams(**values)

    def get_rate(self, game, constants=None):
        """
        Step-size rule for this experiment.

        Theorem rules (and ``default``, the theorem rule of the algorithm)
        estimate the game's constants unless ``constants`` is given.

        :rtype: ampg.algorithms.LearningRateRule
        """
        rule = self.rate.get("rule", "default")
        if rule == "manual":
            if "schedule" in self.rate:
                schedule = StepSchedule([(int(start), parse_float(beta)) for start, beta in self.rate["schedule"]])
            elif "decaying" in self.rate:
                schedule = StepSchedule.decaying(**{key: parse_float(value) if key != "period" else int(value)
                                                    for key, value in self.rate["decaying"].items()})
            else:
                schedule = StepSchedule.constant(parse_float(self.rate["beta"]))
            return LearningRateRule("manual", schedule=schedule)
        if rule == "default":
            rule = DEFAULT_RULES[self.algorithm]
        if constants is None:
            constants = estimate_constants(game, policy_sample_budget=int(self.policy_sample_budget),
                                           enumeration_budget=int(self.enumeration_budget))
        return LearningRateRule(rule, constants=constants)
