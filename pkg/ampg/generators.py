#!/usr/bin/env python
"""
generators.py

Random potential games with controllable least-visited rate and reward gap,
the hand-designed two-state fixture, and structured potential games.

Last Header Update: 10/18/26
"""
import numpy as np
import logging
from ampg.game import MarkovGame, JointPolicy, StructureTag, induced_state_chain
from ampg.oracle import stationary_distribution
from ampg.meta import read_json, write_json
from ampg.errors import ErgodicityError, GenerationError, InfeasibleSpecError

logger = logging.getLogger(__name__)

LVR_RANGES = {"small": 0.01, "medium": 0.1, "large": 1.0}
RG_MODES = ("small_uniform", "small_near_tie", "large")
GENERATOR_STRUCTURES = ("cooperative", "action_independent", "state_potential")
POTENTIAL_CONDITIONS = ("1", "2-cooperative")
NEAR_TIE_GAP = 0.001
LARGE_GAP_BEST = (0.4, 1.0)
LARGE_GAP_REST = (0.0, 0.6)
MAX_REDRAWS = 10


class GeneratorSpec:
    """
    Parameters of a random game.

    ``lvr_mode`` picks the range ``[0, high]`` used to redraw transition
    probabilities into the rarely visited states; ``rg_mode`` picks the
    reward recipe; ``rare_fraction`` is the share of rarely visited states.
    """

    def __init__(self, num_states, action_counts, lvr_mode="large", rg_mode="small_uniform", rare_fraction=0.5,
                 structure="cooperative", seed=0, name=None):
        self.num_states = num_states
        self.action_counts = tuple(action_counts)
        self.lvr_mode = lvr_mode
        self.rg_mode = rg_mode
        self.rare_fraction = rare_fraction
        self.structure = structure
        self.seed = seed
        self.name = name

    def __repr__(self):
        return (f"GeneratorSpec(S={self.num_states}, A={self.action_counts}, lvr={self.lvr_mode}, rg={self.rg_mode}, "
                f"structure={self.structure}, seed={self.seed})")

    def get_num_agents(self):
        return len(self.action_counts)

    def get_num_joint_actions(self):
        return int(np.prod(self.action_counts))

    def validate(self):
        """
        :raises InfeasibleSpecError: On impossible shapes or unknown modes.
        """
        if int(self.num_states) != self.num_states or self.num_states < 1:
            raise InfeasibleSpecError(f"Number of states must be a positive integer, got {self.num_states}.")
        if len(self.action_counts) == 0 or any(int(n) != n or n < 1 for n in self.action_counts):
            raise InfeasibleSpecError(f"Action counts must be positive integers, got {self.action_counts}.")
        if self.lvr_mode not in LVR_RANGES:
            raise InfeasibleSpecError(f"Unknown lvr_mode '{self.lvr_mode}'. Expected one of {sorted(LVR_RANGES)}.")
        if self.rg_mode not in RG_MODES:
            raise InfeasibleSpecError(f"Unknown rg_mode '{self.rg_mode}'. Expected one of {RG_MODES}.")
        if self.structure not in GENERATOR_STRUCTURES:
            raise InfeasibleSpecError(f"Unknown structure '{self.structure}'. Expected one of {GENERATOR_STRUCTURES}.")
        if not 0.0 <= self.rare_fraction <= 1.0:
            raise InfeasibleSpecError(f"rare_fraction must lie in [0, 1], got {self.rare_fraction}.")
        if self.rg_mode == "small_near_tie" and self.get_num_joint_actions() < 2:
            raise InfeasibleSpecError("A near-tie reward needs at least two joint actions.")
        return self

    def to_dict(self):
        data = {
            "num_states": self.num_states,
            "action_counts": list(self.action_counts),
            "lvr_mode": self.lvr_mode,
            "rg_mode": self.rg_mode,
            "rare_fraction": self.rare_fraction,
            "structure": self.structure,
            "seed": self.seed,
        }
        if self.name is not None:
            data["name"] = self.name
        return data

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                int(data["num_states"]),
                [int(n) for n in data["action_counts"]],
                lvr_mode=data.get("lvr_mode", "large"),
                rg_mode=data.get("rg_mode", "small_uniform"),
                rare_fraction=float(data.get("rare_fraction", 0.5)),
                structure=data.get("structure", "cooperative"),
                seed=int(data.get("seed", 0)),
                name=data.get("name")
            )
        except KeyError as exc:
            raise InfeasibleSpecError(f"Generator spec is missing field {exc}.") from exc

    @classmethod
    def from_json(cls, path):
        data = read_json(path)
        try:
            return cls.from_dict(data)
        except (InfeasibleSpecError, ValueError) as exc:
            raise type(exc)(f"{exc} Path: {path}") from exc

    def to_json(self, path):
        write_json(self.to_dict(), path)


def _make_rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def _draw_transition_rows(rng, num_states, num_rows, lvr_mode, rare_fraction):
    """
    Unif[0,1] rows, then every probability into the rare states redrawn
    from the ``lvr_mode`` range, then row normalization.
    """
    rows = rng.uniform(0.0, 1.0, size=(num_states, num_rows, num_states))
    num_rare = int(np.floor(num_states * rare_fraction))
    rare = np.sort(rng.choice(num_states, size=num_rare, replace=False))
    if num_rare > 0:
        rows[:, :, rare] = rng.uniform(0.0, LVR_RANGES[lvr_mode], size=(num_states, num_rows, num_rare))
    return rows / rows.sum(axis=-1, keepdims=True), rare


def _draw_transition(rng, spec, action_independent):
    shape = (spec.num_states,) + spec.action_counts + (spec.num_states,)
    if action_independent:
        rows, rare = _draw_transition_rows(rng, spec.num_states, 1, spec.lvr_mode, spec.rare_fraction)
        transition = np.broadcast_to(rows, (spec.num_states, spec.get_num_joint_actions(), spec.num_states))
        return np.array(transition).reshape(shape), rare
    rows, rare = _draw_transition_rows(rng, spec.num_states, spec.get_num_joint_actions(), spec.lvr_mode,
                                       spec.rare_fraction)
    return rows.reshape(shape), rare


def _draw_rewards(rng, spec):
    """One ``(S, J)`` reward table per the ``rg_mode`` recipe."""
    num_states = spec.num_states
    num_joint = spec.get_num_joint_actions()

    if spec.rg_mode == "large":
        rewards = rng.uniform(*LARGE_GAP_REST, size=(num_states, num_joint))
        chosen = rng.integers(num_joint, size=num_states)
        rewards[np.arange(num_states), chosen] = rng.uniform(*LARGE_GAP_BEST, size=num_states)
        return rewards

    rewards = rng.uniform(0.0, 1.0, size=(num_states, num_joint))
    if spec.rg_mode == "small_uniform":
        return rewards

    for state in range(num_states):
        row = rewards[state]
        best = int(np.argmax(row))
        if row[best] < NEAR_TIE_GAP:
            row[best] = rng.uniform(NEAR_TIE_GAP, 1.0)
        offset = int(rng.integers(num_joint - 1))
        runner_up = offset if offset < best else offset + 1
        top = row[best]
        row[runner_up] = top - NEAR_TIE_GAP
        # nothing else may sit strictly between the runner-up and the best
        crowded = (row > top - NEAR_TIE_GAP) & (row < top)
        crowded[[best, runner_up]] = False
        if np.any(crowded):
            row[crowded] = rng.uniform(0.0, top - NEAR_TIE_GAP, size=int(crowded.sum()))
    return rewards


def _is_uniform_ergodic(game):
    try:
        stationary_distribution(induced_state_chain(game, JointPolicy.uniform(game.get_num_states(), game.get_action_counts())))
    except ErgodicityError:
        return False
    return True


def _build_with_redraws(spec, build):
    """
    Calls ``build(rng)`` until the uniform-policy chain is ergodic.

    :raises GenerationError: When the initial draw and all ``MAX_REDRAWS`` redraws fail.
    """
    rng = _make_rng(spec.seed)
    for attempt in range(MAX_REDRAWS + 1):
        game = build(rng)
        if _is_uniform_ergodic(game):
            logger.debug(f"Generated game {game.get_game_id()} from {spec} (attempt {attempt + 1}).")
            return game
        logger.debug(f"Redrawing {spec}: uniform-policy chain is not ergodic (attempt {attempt + 1}).")
    raise GenerationError(f"No ergodic game for {spec} in {MAX_REDRAWS + 1} draws (1 initial + {MAX_REDRAWS} redraws).")


def generate(spec):
    """
    Builds a random game from ``spec``.

    Transitions are drawn row by row from Unif[0,1], the probabilities
    into a seeded ``floor(S * rare_fraction)`` subset of states are redrawn
    from the ``lvr_mode`` range, and rows are normalized. Rewards follow
    ``rg_mode`` and are shared by all agents (``cooperative`` and
    ``action_independent``) or shifted by one agent-specific constant
    (``state_potential``).

    :param spec: Generator parameters.
    :type spec: GeneratorSpec
    :rtype: ampg.game.MarkovGame
    :raises InfeasibleSpecError: For an invalid spec.
    :raises GenerationError: When no ergodic game is found.
    """
    spec.validate()
    num_agents = spec.get_num_agents()
    reward_shape = (spec.num_states,) + spec.action_counts

    def build(rng):
        action_independent = spec.structure == "action_independent"
        transition, _ = _draw_transition(rng, spec, action_independent)
        table = _draw_rewards(rng, spec).reshape(reward_shape)

        if spec.structure == "state_potential":
            offsets = rng.uniform(0.0, 1.0, size=num_agents)
            low = table.min() + offsets.min()
            scale = table.max() + offsets.max() - low
            potential = (table - low) / scale
            rewards = np.stack([(table + offsets[i] - low) / scale for i in range(num_agents)])
            return MarkovGame(transition, rewards, StructureTag.STATE_POTENTIAL, potential=potential, name=spec.name)

        structure = StructureTag.COOPERATIVE
        if action_independent:
            structure |= StructureTag.ACTION_INDEPENDENT_TRANSITIONS
        return MarkovGame(transition, np.stack([table] * num_agents), structure, name=spec.name)

    return _build_with_redraws(spec, build)


def make_potential_game(spec, condition="1"):
    """
    Builds a game that is a potential game by construction.

    - ``'1'``: action-independent transitions and rewards
      ``r_i = phi(s,a) + u_i(s,a_-i)``. ``phi`` follows ``rg_mode``, each
      ``u_i`` is Unif[0,1] and ignores agent ``i``'s action. One affine map
      sends every ``phi + u_i`` into [0,1]; ``phi`` is stored after the same
      map. With one agent ``u`` is zero and the rewards equal the stored
      potential.
    - ``'2-cooperative'``: the cooperative game ``r_i = phi`` with
      action-dependent transitions, identical to :func:`generate` with
      ``structure='cooperative'``.

    :param spec: Generator parameters; ``spec.structure`` is ignored.
    :type spec: GeneratorSpec
    :param condition: Sufficient condition to satisfy.
    :type condition: str
    :rtype: ampg.game.MarkovGame
    """
    condition = str(condition)
    if condition not in POTENTIAL_CONDITIONS:
        raise InfeasibleSpecError(f"Unknown potential condition '{condition}'. Expected one of {POTENTIAL_CONDITIONS}.")
    if condition == "2-cooperative":
        cooperative = GeneratorSpec(spec.num_states, spec.action_counts, spec.lvr_mode, spec.rg_mode,
                                    spec.rare_fraction, "cooperative", spec.seed, spec.name)
        return generate(cooperative)

    spec.validate()
    num_agents = spec.get_num_agents()
    reward_shape = (spec.num_states,) + spec.action_counts

    def build(rng):
        transition, _ = _draw_transition(rng, spec, action_independent=True)
        phi = _draw_rewards(rng, spec).reshape(reward_shape)
        unilateral = []
        for agent in range(num_agents):
            if num_agents == 1:
                unilateral.append(np.zeros(reward_shape))
                continue
            shape = list(reward_shape)
            shape[agent + 1] = 1
            unilateral.append(np.broadcast_to(rng.uniform(0.0, 1.0, size=shape), reward_shape))
        raw = [phi + u for u in unilateral]
        low = min(r.min() for r in raw)
        scale = max(r.max() for r in raw) - low
        if scale == 0:
            scale = 1.0
        rewards = np.stack([(phi + u - low) / scale for u in unilateral])
        potential = (phi - low) / scale
        return MarkovGame(transition, rewards, StructureTag.ACTION_INDEPENDENT_TRANSITIONS, potential=potential,
                          name=spec.name)

    return _build_with_redraws(spec, build)


def manual_fixture():
    """
    The two-state, two-agent, two-action cooperative fixture.

    ``P = [[0.9, 0.1], [0.3, 0.7]]`` for every joint action. Reward tables
    list agent 1's action by column and agent 2's action by row, so
    ``r(s, a1, a2) = R_s[a2, a1]``.

    :rtype: ampg.game.MarkovGame
    """
    rows = np.array([[0.9, 0.1], [0.3, 0.7]])
    transition = np.broadcast_to(rows[:, np.newaxis, np.newaxis, :], (2, 2, 2, 2)).copy()
    tables = np.array([
        [[1.0, 0.2], [0.8, 0.2]],
        [[0.2, 1.0], [0.1, 0.6]],
    ])
    reward = np.transpose(tables, (0, 2, 1))
    return MarkovGame(
        transition,
        np.stack([reward, reward]),
        StructureTag.COOPERATIVE | StructureTag.ACTION_INDEPENDENT_TRANSITIONS,
        name="manual"
    )
