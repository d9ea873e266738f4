from ampg.configs.config import ExperimentConfig


class RandomMPGConfig(ExperimentConfig):
    """
    Oracle runs on a 100-state cooperative game with three agents of 4, 3
    and 2 actions. Constants are sampled, not enumerated, at this size.
    """
    name = "random_mpg"
    game = {"generator": {
        "num_states": 100,
        "action_counts": [4, 3, 2],
        "lvr_mode": "large",
        "rg_mode": "small_uniform",
        "rare_fraction": "0.5",
        "structure": "cooperative",
        "seed": 0
    }}
    algorithm = "npg"
    num_iterations = 2000
    eval_period = 20
    seeds = [0, 1, 2, 3, 4, 5, 6]
    policy_sample_budget = 32

    def with_modes(self, lvr_mode=None, rg_mode=None):
        """Copy of this config with different least-visited-rate or reward-gap modes."""
        generator = dict(self.game["generator"])
        if lvr_mode is not None:
            generator["lvr_mode"] = lvr_mode
        if rg_mode is not None:
            generator["rg_mode"] = rg_mode
        name = f"{self.name}-{generator['lvr_mode']}-lvr-{generator['rg_mode']}"
        return self.copy(game={"generator": generator}, name=name)
