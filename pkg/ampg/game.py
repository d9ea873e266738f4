#!/usr/bin/env python
"""
game.py

Last Header Update: 10/18/26
"""
import numpy as np
import hashlib
import logging
import enum

logger = logging.getLogger(__name__)

PROBABILITY_TOLERANCE = 1e-12


class StructureTag(enum.Flag):
    """
    Which sufficient potential-game condition a game satisfies by construction.

    Tags combine, e.g. the manual fixture is
    ``COOPERATIVE | ACTION_INDEPENDENT_TRANSITIONS``.
    """
    GENERAL = 0
    COOPERATIVE = enum.auto()
    ACTION_INDEPENDENT_TRANSITIONS = enum.auto()
    STATE_POTENTIAL = enum.auto()


STRUCTURE_NAMES = {
    "general": StructureTag.GENERAL,
    "cooperative": StructureTag.COOPERATIVE,
    "action_independent_transitions": StructureTag.ACTION_INDEPENDENT_TRANSITIONS,
    "action_independent": StructureTag.ACTION_INDEPENDENT_TRANSITIONS,
    "state_potential": StructureTag.STATE_POTENTIAL,
}


def parse_structure(value):
    """
    Converts a tag, a tag name or a list of tag names into a ``StructureTag``.

    :param value: ``StructureTag``, name string, or iterable of names.
    :returns: Combined structure tag.
    :rtype: StructureTag
    :raises ValueError: If a name is not recognized.
    """
    if value is None:
        return StructureTag.GENERAL
    if isinstance(value, StructureTag):
        return value
    if isinstance(value, str):
        value = [value]
    tag = StructureTag.GENERAL
    for name in value:
        if name not in STRUCTURE_NAMES:
            raise ValueError(f"Unknown structure tag '{name}'. Expected one of {sorted(STRUCTURE_NAMES)}.")
        tag |= STRUCTURE_NAMES[name]
    return tag


def structure_names(tag):
    """Returns the canonical lowercase names of the flags set in ``tag`` (``['general']`` if none)."""
    names = [member.name.lower() for member in StructureTag if member.value != 0 and member in tag]
    return names if len(names) > 0 else ["general"]


def _frozen(array):
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


class MarkovGame:
    """
    Tabular average-reward Markov game ``(S, {A_i}, P, {r_i})``.

    Tensors use the index order ``(state, a_1, ..., a_N, next_state)`` for
    ``P`` and ``(agent, state, a_1, ..., a_N)`` for rewards. Joint actions
    flatten row-major, i.e. lexicographically in ``(a_1, ..., a_N)``.
    Instances are immutable; modifier methods return new games.
    """

    def __init__(self, transition, rewards, structure=StructureTag.GENERAL, potential=None,
                 check=True, renormalize=False, name=None):
        """
        :param transition: Tensor of shape ``(S, A_1, ..., A_N, S)``.
        :type transition: array_like
        :param rewards: Tensor of shape ``(N, S, A_1, ..., A_N)`` or a list of
            ``N`` per-agent tensors of shape ``(S, A_1, ..., A_N)``.
        :type rewards: array_like or list
        :param structure: Structure tag(s) the game satisfies by construction.
        :type structure: StructureTag or str or list[str]
        :param potential: Optional stored state-action potential ``φ`` of shape ``(S, A_1, ..., A_N)``.
        :type potential: array_like or None
        :param check: Raise ``ValueError`` when :func:`validate_game` reports violations.
        :type check: bool
        :param renormalize: Divide every transition row by its sum before checking.
        :type renormalize: bool
        :param name: Optional human label, carried into logs and files.
        :type name: str or None
        :raises ValueError: On shape mismatch, or on invariant violations when ``check`` is set.
        """
        transition = np.array(transition, dtype=np.float64, copy=True)
        rewards = np.array(rewards, dtype=np.float64, copy=True)

        if transition.ndim < 3:
            raise ValueError(f"Transition tensor must have at least 3 dimensions (state, action..., next state), got shape {transition.shape}.")
        num_states = transition.shape[0]
        action_counts = tuple(int(n) for n in transition.shape[1:-1])
        if transition.shape[-1] != num_states:
            raise ValueError(f"Transition tensor maps {num_states} states to {transition.shape[-1]} next states.")
        if rewards.shape != (len(action_counts), num_states) + action_counts:
            raise ValueError(f"Reward tensor shape {rewards.shape} does not match expected {(len(action_counts), num_states) + action_counts}.")
        if potential is not None:
            potential = np.array(potential, dtype=np.float64, copy=True)
            if potential.shape != (num_states,) + action_counts:
                raise ValueError(f"Potential shape {potential.shape} does not match expected {(num_states,) + action_counts}.")

        if renormalize:
            transition = transition / transition.sum(axis=-1, keepdims=True)

        self.__transition = _frozen(transition)
        self.__rewards = _frozen(rewards)
        self.__potential = None if potential is None else _frozen(potential)
        self.__structure = parse_structure(structure)
        self.__name = name
        self.__game_id = None

        if check:
            report = validate_game(self)
            if len(report) > 0:
                summary = "; ".join(format_violation(v) for v in report[:10])
                raise ValueError(f"Invalid game ({len(report)} violations): {summary}")

    def __repr__(self):
        return (f"MarkovGame(S={self.get_num_states()}, actions={self.get_action_counts()}, "
                f"structure={self.get_structure_names()}, id={self.get_game_id()})")

    def get_num_states(self):
        return self.__transition.shape[0]

    def get_action_counts(self):
        return tuple(int(n) for n in self.__transition.shape[1:-1])

    def get_num_agents(self):
        return len(self.get_action_counts())

    def get_max_actions(self):
        return max(self.get_action_counts())

    def get_num_joint_actions(self):
        return int(np.prod(self.get_action_counts()))

    def get_transition(self):
        """Returns the read-only transition tensor ``(S, A_1, ..., A_N, S)``."""
        return self.__transition

    def get_flat_transition(self):
        """Returns the transition tensor reshaped to ``(S, J, S)`` with lexicographic joint actions."""
        num_states = self.get_num_states()
        return self.__transition.reshape(num_states, self.get_num_joint_actions(), num_states)

    def get_rewards(self, agent=None):
        """
        Returns the reward tensor of one agent, or all agents stacked.

        :param agent: Agent index, or ``None`` for the ``(N, S, A_1, ..., A_N)`` stack.
        :type agent: int or None
        :rtype: numpy.ndarray
        """
        if agent is None:
            return self.__rewards
        check_agent_index(self, agent)
        return self.__rewards[agent]

    def get_flat_rewards(self):
        """Returns rewards reshaped to ``(N, S, J)``."""
        return self.__rewards.reshape(self.get_num_agents(), self.get_num_states(), self.get_num_joint_actions())

    def get_structure(self):
        return self.__structure

    def get_structure_names(self):
        return structure_names(self.__structure)

    def has_structure(self, tag):
        return tag in self.__structure and tag != StructureTag.GENERAL

    def is_potential_certified(self):
        """``True`` when some constructive potential is known for this game."""
        return self.__structure != StructureTag.GENERAL

    def get_potential(self):
        return self.__potential

    def get_name(self):
        return self.__name

    def get_game_id(self):
        """Short content hash of the tensors and tags; stable across processes."""
        if self.__game_id is None:
            digest = hashlib.sha256()
            digest.update(repr((self.get_num_states(), self.get_action_counts())).encode())
            digest.update(np.ascontiguousarray(self.__transition, dtype="<f8").tobytes())
            digest.update(np.ascontiguousarray(self.__rewards, dtype="<f8").tobytes())
            digest.update(",".join(self.get_structure_names()).encode())
            if self.__potential is not None:
                digest.update(np.ascontiguousarray(self.__potential, dtype="<f8").tobytes())
            self.__game_id = digest.hexdigest()[:16]
        return self.__game_id

    def copy(self, transition=None, rewards=None, structure=None, potential=None, check=True, name=None):
        """
        Returns a new game with any of the given parts replaced.

        :returns: New ``MarkovGame``.
        :rtype: MarkovGame
        """
        return MarkovGame(
            transition=self.__transition if transition is None else transition,
            rewards=self.__rewards if rewards is None else rewards,
            structure=self.__structure if structure is None else structure,
            potential=self.__potential if potential is None else potential,
            check=check,
            name=self.__name if name is None else name
        )


def format_violation(violation):
    return f"{violation['invariant']} at {violation['index']} (magnitude {violation['magnitude']:.3g})"


def validate_game(game):
    """
    Checks every ``MarkovGame`` invariant and reports each violation.

    Each entry is a dictionary with keys ``'invariant'``, ``'index'`` (tensor
    index tuple) and ``'magnitude'`` (size of the violation, e.g. row-sum
    deficit or reward excess). An empty list means the game is valid.

    :param game: Game to validate (may have been built with ``check=False``).
    :type game: MarkovGame
    :returns: List of violation dictionaries.
    :rtype: list[dict]
    """
    report = []
    transition = game.get_transition()
    rewards = game.get_rewards()

    for index in zip(*np.nonzero(transition < 0)):
        report.append({"invariant": "transition_nonnegative", "index": tuple(int(k) for k in index),
                       "magnitude": float(-transition[index])})

    row_sums = transition.sum(axis=-1)
    for index in zip(*np.nonzero(np.abs(row_sums - 1.0) > PROBABILITY_TOLERANCE)):
        report.append({"invariant": "transition_row_sum", "index": tuple(int(k) for k in index),
                       "magnitude": float(abs(1.0 - row_sums[index]))})

    for index in zip(*np.nonzero(rewards > 1.0)):
        report.append({"invariant": "reward_range", "index": tuple(int(k) for k in index),
                       "magnitude": float(rewards[index] - 1.0)})
    for index in zip(*np.nonzero(rewards < 0.0)):
        report.append({"invariant": "reward_range", "index": tuple(int(k) for k in index),
                       "magnitude": float(-rewards[index])})

    if game.has_structure(StructureTag.COOPERATIVE):
        for agent in range(1, game.get_num_agents()):
            if not np.array_equal(rewards[agent], rewards[0]):
                report.append({"invariant": "cooperative_rewards", "index": (agent,),
                               "magnitude": float(np.max(np.abs(rewards[agent] - rewards[0])))})

    if game.has_structure(StructureTag.ACTION_INDEPENDENT_TRANSITIONS):
        flat = game.get_flat_transition()
        deviation = np.abs(flat - flat[:, :1, :]).max(axis=(1, 2))
        for state in np.nonzero(deviation > 0)[0]:
            report.append({"invariant": "action_independent_transitions", "index": (int(state),),
                           "magnitude": float(deviation[state])})

    if len(report) > 0:
        logger.debug(f"Game {game.get_game_id()} failed validation with {len(report)} violations.")
    return report


def check_agent_index(game, agent):
    """Raises ``IndexError`` unless ``0 <= agent < N``."""
    if not 0 <= agent < game.get_num_agents():
        raise IndexError(f"Agent index {agent} out of range for a game with {game.get_num_agents()} agents.")


def _policy_digest(matrix):
    return hashlib.sha256(np.ascontiguousarray(matrix, dtype="<f8").tobytes()).hexdigest()[:16]


class JointPolicy:
    """
    Product policy: one ``S x A_i`` row-stochastic matrix per agent.

    Immutable; :meth:`replace` returns a new joint policy.
    """

    def __init__(self, matrices, check=True):
        """
        :param matrices: Per-agent policy matrices ``pi_i[s, a_i]``.
        :type matrices: list[array_like]
        :param check: Validate nonnegativity and row sums (tolerance 1e-12).
        :type check: bool
        :raises ValueError: On empty input, inconsistent state counts or invalid rows.
        """
        if len(matrices) == 0:
            raise ValueError("A joint policy needs at least one agent.")
        self.__matrices = tuple(_frozen(m) for m in matrices)
        num_states = self.__matrices[0].shape[0]
        for agent, matrix in enumerate(self.__matrices):
            if matrix.ndim != 2 or matrix.shape[0] != num_states:
                raise ValueError(f"Policy of agent {agent} has shape {matrix.shape}, expected ({num_states}, A_{agent}).")
            if check:
                if np.any(matrix < 0):
                    raise ValueError(f"Policy of agent {agent} has negative entries (min {matrix.min()}).")
                deficit = np.max(np.abs(matrix.sum(axis=1) - 1.0))
                if deficit > PROBABILITY_TOLERANCE:
                    raise ValueError(f"Policy rows of agent {agent} do not sum to 1 (max deviation {deficit}).")

    @classmethod
    def uniform(cls, num_states, action_counts):
        """Every agent plays uniformly at random in every state."""
        return cls([np.full((num_states, n), 1.0 / n) for n in action_counts])

    @classmethod
    def deterministic(cls, actions, action_counts):
        """
        Point-mass policy from per-agent action index arrays.

        :param actions: For each agent, a length-``S`` sequence of chosen actions.
        :param action_counts: Action counts ``A_1..A_N``.
        """
        matrices = []
        for agent_actions, n in zip(actions, action_counts):
            agent_actions = np.asarray(agent_actions, dtype=int)
            matrix = np.zeros((len(agent_actions), n))
            matrix[np.arange(len(agent_actions)), agent_actions] = 1.0
            matrices.append(matrix)
        return cls(matrices)

    @classmethod
    def dirichlet(cls, rng, num_states, action_counts, concentration=1.0):
        """Random interior policy with Dirichlet rows."""
        return cls([rng.dirichlet(np.full(n, concentration), size=num_states) for n in action_counts])

    def __len__(self):
        return len(self.__matrices)

    def __iter__(self):
        return iter(self.__matrices)

    def __getitem__(self, agent):
        return self.__matrices[agent]

    def __eq__(self, other):
        if not isinstance(other, JointPolicy) or len(other) != len(self):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self, other))

    def __repr__(self):
        return f"JointPolicy(S={self.get_num_states()}, actions={self.get_action_counts()}, hash={self.get_hash()})"

    def get_num_states(self):
        return self.__matrices[0].shape[0]

    def get_action_counts(self):
        return tuple(m.shape[1] for m in self.__matrices)

    def get_agent_policy(self, agent):
        return self.__matrices[agent]

    def as_list(self):
        """Writable copies of the per-agent matrices."""
        return [np.array(m) for m in self.__matrices]

    def replace(self, agent, matrix, check=True):
        """Returns a new joint policy with agent ``agent``'s matrix swapped."""
        matrices = list(self.__matrices)
        matrices[agent] = matrix
        return JointPolicy(matrices, check=check)

    def is_truncated(self, alpha):
        """Membership in the ``alpha``-truncated class: every entry ``>= alpha / A_i``."""
        return all(bool(np.all(m >= alpha / m.shape[1])) for m in self.__matrices)

    def is_interior(self):
        return all(bool(np.all(m > 0)) for m in self.__matrices)

    def get_hash(self, agent=None):
        """
        Content hash of the whole joint policy, or of one agent's matrix.

        :param agent: Agent index or ``None`` for the joint hash.
        :rtype: str
        """
        if agent is not None:
            return _policy_digest(self.__matrices[agent])
        digest = hashlib.sha256()
        for matrix in self.__matrices:
            digest.update(np.ascontiguousarray(matrix, dtype="<f8").tobytes())
        return digest.hexdigest()[:16]

    def check_compatible(self, game):
        """Raises ``ValueError`` if the policy shapes do not match ``game``."""
        if self.get_num_states() != game.get_num_states() or self.get_action_counts() != game.get_action_counts():
            raise ValueError(
                f"Policy shape (S={self.get_num_states()}, actions={self.get_action_counts()}) does not match "
                f"game shape (S={game.get_num_states()}, actions={game.get_action_counts()})."
            )


def policy_distance(policy, other):
    """
    ``||pi - pi'||_{1,inf}``: largest per-state l1 distance between the joint
    action distributions of two policies.
    """
    diff = joint_action_probabilities(policy) - joint_action_probabilities(other)
    return float(np.abs(diff.reshape(diff.shape[0], -1)).sum(axis=1).max())


def l1_distance(policy, other):
    """Average over agents of the entrywise l1 distance between policy matrices."""
    return float(np.mean([np.abs(a - b).sum() for a, b in zip(policy, other)]))


def _weights(policy, skip=None):
    """Product of per-agent action probabilities, shape ``(S, A_1, ..., A_N)``; agent ``skip`` contributes 1."""
    num_agents = len(policy)
    weights = np.ones((policy.get_num_states(),) + (1,) * num_agents)
    for agent, matrix in enumerate(policy):
        if agent == skip:
            continue
        shape = [matrix.shape[0]] + [1] * num_agents
        shape[1 + agent] = matrix.shape[1]
        weights = weights * matrix.reshape(shape)
    return weights


def joint_action_probabilities(policy):
    """
    Joint action distribution ``pi(a|s) = prod_i pi_i(a_i|s)``.

    :returns: Array of shape ``(S, A_1, ..., A_N)``.
    """
    return _weights(policy)


def expect_joint(tensor, policy):
    """
    Averages a ``(S, A_1, ..., A_N, *trailing)`` tensor over the joint policy.

    :returns: Array of shape ``(S, *trailing)``.
    """
    num_agents = len(policy)
    weights = joint_action_probabilities(policy)
    trailing = tensor.ndim - 1 - num_agents
    weighted = tensor * weights.reshape(weights.shape + (1,) * trailing)
    return weighted.sum(axis=tuple(range(1, 1 + num_agents)))


def marginalize(tensor, policy, agent):
    """
    Averages a ``(S, A_1, ..., A_N, *trailing)`` tensor over every agent except ``agent``.

    :returns: Array of shape ``(S, A_agent, *trailing)``.
    """
    num_agents = len(policy)
    weights = _weights(policy, skip=agent)
    trailing = tensor.ndim - 1 - num_agents
    weighted = tensor * weights.reshape(weights.shape + (1,) * trailing)
    axes = tuple(1 + k for k in range(num_agents) if k != agent)
    if len(axes) == 0:
        return weighted
    return weighted.sum(axis=axes)


class InducedChain:
    """
    Markov chain induced by a joint policy.

    Holds the state chain ``P_pi`` (S x S), optionally the state-action chain,
    and, once completed with its stationary distribution, the infinite-step
    matrix whose rows all equal ``nu``.
    """

    def __init__(self, state_matrix, state_action_matrix=None, stationary=None):
        self.__state_matrix = _frozen(state_matrix)
        self.__state_action_matrix = None if state_action_matrix is None else _frozen(state_action_matrix)
        self.__stationary = None if stationary is None else _frozen(stationary)

        for label, matrix in (("state", self.__state_matrix), ("state-action", self.__state_action_matrix)):
            if matrix is None:
                continue
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ValueError(f"Induced {label} matrix must be square, got {matrix.shape}.")
            deficit = np.max(np.abs(matrix.sum(axis=1) - 1.0))
            if np.any(matrix < 0) or deficit > PROBABILITY_TOLERANCE:
                raise ValueError(f"Induced {label} matrix is not row-stochastic (max row deviation {deficit}).")

    def get_state_matrix(self):
        return self.__state_matrix

    def get_state_action_matrix(self):
        return self.__state_action_matrix

    def get_num_states(self):
        return self.__state_matrix.shape[0]

    def get_stationary(self):
        """Stationary distribution, or ``None`` when the chain has not been completed."""
        return self.__stationary

    def is_complete(self):
        return self.__stationary is not None

    def get_infinite_matrix(self):
        """
        ``P^{pi,inf}``: every row equals the stationary distribution.

        :raises ValueError: If the chain has not been completed.
        """
        if self.__stationary is None:
            raise ValueError("Chain has no stationary distribution yet; use ampg.oracle.complete_chain first.")
        return np.tile(self.__stationary, (self.get_num_states(), 1))

    def with_stationary(self, stationary):
        return InducedChain(self.__state_matrix, self.__state_action_matrix, stationary)


def induced_state_chain(game, policy):
    """
    Builds the state chain ``P_pi(s'|s) = sum_a pi(a|s) P(s'|s,a)``.

    :param game: Game providing ``P``.
    :type game: MarkovGame
    :param policy: Joint policy of matching shape.
    :type policy: JointPolicy
    :returns: Chain holding ``P_pi`` only.
    :rtype: InducedChain
    :raises ValueError: On shape mismatch.
    """
    policy.check_compatible(game)
    return InducedChain(expect_joint(game.get_transition(), policy))


def induced_state_action_chain(game, policy, agent=None):
    """
    Builds the state-action chain over joint actions, or over one agent's actions.

    Joint: ``P((s,a),(s',a')) = P(s'|s,a) pi(a'|s')`` with joint actions in
    lexicographic order. Per agent ``j``: ``Pbar^{pi_-j}(s'|s,a_j) pi_j(a_j'|s')``.
    Rows index ``s * A + a``.

    :rtype: InducedChain
    """
    policy.check_compatible(game)
    num_states = game.get_num_states()
    if agent is None:
        kernel = game.get_flat_transition()
        next_action = joint_action_probabilities(policy).reshape(num_states, -1)
    else:
        check_agent_index(game, agent)
        kernel = marginal_transition(game, policy, agent)
        next_action = policy[agent]
    num_actions = next_action.shape[1]
    matrix = kernel[:, :, :, np.newaxis] * next_action[np.newaxis, np.newaxis, :, :]
    matrix = matrix.reshape(num_states * num_actions, num_states * num_actions)
    return InducedChain(expect_joint(game.get_transition(), policy), state_action_matrix=matrix)


def marginal_reward(game, policy, agent):
    """
    Marginalized rewards for every reward agent ``i`` relative to acting agent ``agent``.

    :returns: Tuple ``(r_pi, r_minus)`` with ``r_pi[i, s] = E_{a~pi}[r_i(s,a)]``
        and ``r_minus[i, s, a_j] = sum_{a_-j} pi_-j(a_-j|s) r_i(s, a_j, a_-j)``.
    :rtype: tuple[numpy.ndarray, numpy.ndarray]
    :raises IndexError: If ``agent`` is out of range.
    """
    check_agent_index(game, agent)
    policy.check_compatible(game)
    rewards = game.get_rewards()
    r_pi = np.stack([expect_joint(r, policy) for r in rewards])
    r_minus = np.stack([marginalize(r, policy, agent) for r in rewards])
    return r_pi, r_minus


def marginal_transition(game, policy, agent):
    """
    ``Pbar^{pi_-j}(s'|s, a_j)``: transitions seen by agent ``agent`` when the others play ``policy``.

    :returns: Array of shape ``(S, A_j, S)``.
    :raises IndexError: If ``agent`` is out of range.
    """
    check_agent_index(game, agent)
    policy.check_compatible(game)
    return marginalize(game.get_transition(), policy, agent)
