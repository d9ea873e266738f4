#!/usr/bin/env python
"""
oracle.py

Last Header Update: 10/18/26
"""
import numpy as np
import itertools
import threading
import logging
from collections import OrderedDict
from ampg.game import (
    InducedChain,
    JointPolicy,
    StructureTag,
    induced_state_chain,
    expect_joint,
    marginalize,
    marginal_reward,
    marginal_transition,
    check_agent_index
)
from ampg.errors import ErgodicityError, SingularSystemError, NoConvergenceError, UnsupportedStructureError
from ampg.utils import LOG_LEVEL_TRACE

logger = logging.getLogger(__name__)

BEST_RESPONSE_TOLERANCE = 1e-10
BEST_RESPONSE_MAX_ITERS = 10**6
ARGMAX_TOLERANCE = 1e-10
STATIONARY_FLOOR = 1e-14
POISSON_TOLERANCE = 1e-9
MAX_CONDITION_NUMBER = 1e12

EXACT = "exact"
SAMPLED_LOWER_BOUND = "sampled_lower_bound"
ANALYTIC_UPPER_BOUND = "analytic_upper_bound"
PROVENANCES = (EXACT, SAMPLED_LOWER_BOUND, ANALYTIC_UPPER_BOUND)


def stationary_distribution(chain):
    """
    Solves ``nu P = nu``, ``sum(nu) = 1`` as one dense augmented system.

    The ``(S+1) x S`` system stacks ``P^T - I`` on a row of ones. A unique
    solution needs rank ``S``; a lower rank means more than one recurrent
    class.

    :param chain: Induced chain or a raw row-stochastic matrix.
    :type chain: ampg.game.InducedChain or numpy.ndarray
    :returns: Stationary distribution of length ``S``.
    :rtype: numpy.ndarray
    :raises ErgodicityError: If the system is rank deficient or any entry is ``<= 1e-14``.
    """
    matrix = chain.get_state_matrix() if isinstance(chain, InducedChain) else np.asarray(chain, dtype=np.float64)
    num_states = matrix.shape[0]
    system = np.vstack([matrix.T - np.eye(num_states), np.ones((1, num_states))])
    rhs = np.zeros(num_states + 1)
    rhs[-1] = 1.0

    rank = np.linalg.matrix_rank(system)
    if rank < num_states:
        raise ErgodicityError(f"Stationary system has rank {rank} < {num_states}; the induced chain is not irreducible.")

    nu, _, _, _ = np.linalg.lstsq(system, rhs, rcond=None)
    nu = nu / nu.sum()
    if np.any(nu <= STATIONARY_FLOOR):
        raise ErgodicityError(f"Stationary distribution has a state with mass {nu.min():.3e}.")
    return nu


def power_iteration(matrix, tol=1e-13, max_iters=10**6, initial=None):
    """
    Stationary distribution by repeated left multiplication.

    Slower than :func:`stationary_distribution`; kept as an independent check.

    :raises NoConvergenceError: If successive iterates still differ by more than ``tol``.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    nu = np.full(matrix.shape[0], 1.0 / matrix.shape[0]) if initial is None else np.asarray(initial, dtype=np.float64)
    for _ in range(max_iters):
        updated = nu @ matrix
        if np.max(np.abs(updated - nu)) < tol:
            return updated / updated.sum()
        nu = updated
    raise NoConvergenceError(f"Power iteration did not converge within {max_iters} iterations.")


def complete_chain(chain):
    """Returns ``chain`` with its stationary distribution (and so ``P^{pi,inf}``) attached."""
    if chain.is_complete():
        return chain
    return chain.with_stationary(stationary_distribution(chain))


def fundamental_inverse(state_matrix, nu):
    """
    ``(I - P + P^inf)^{-1}`` for an ergodic chain.

    :raises SingularSystemError: If the matrix is singular or its condition number exceeds 1e12.
    """
    num_states = state_matrix.shape[0]
    fundamental = np.eye(num_states) - state_matrix + np.tile(nu, (num_states, 1))
    condition = np.linalg.cond(fundamental)
    if not np.isfinite(condition) or condition > MAX_CONDITION_NUMBER:
        raise SingularSystemError(f"Fundamental matrix is ill-conditioned (cond={condition:.3e}).")
    try:
        return np.linalg.inv(fundamental)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"Fundamental matrix is singular: {exc}") from exc


def _gain(state_rewards, nu):
    return float(np.dot(state_rewards, nu))


class OracleReport:
    """
    Exact quantities of one ``(game, policy)`` pair.

    Holds the stationary distribution, gains ``rho_i``, differential values
    ``V_i`` (normalized so ``<nu, V_i> = 0``), joint Q-functions ``Q_i`` and
    every marginalized ``Qbar_{j;i}``. Gradients and advantages derive from
    these on request.
    """

    def __init__(self, game, policy):
        """
        :param game: Game to evaluate.
        :type game: ampg.game.MarkovGame
        :param policy: Joint policy of matching shape.
        :type policy: ampg.game.JointPolicy
        :raises ErgodicityError: If the induced chain is not ergodic.
        :raises SingularSystemError: If the Poisson system cannot be solved reliably.
        """
        self.__game = game
        self.__policy = policy
        chain = complete_chain(induced_state_chain(game, policy))
        self.__chain = chain
        nu = chain.get_stationary()
        state_matrix = chain.get_state_matrix()
        num_agents = game.get_num_agents()

        rewards = game.get_rewards()
        r_pi = np.stack([expect_joint(r, policy) for r in rewards])
        self.__gains = np.array([_gain(r_pi[i], nu) for i in range(num_agents)])

        self.__fundamental_inverse = fundamental_inverse(state_matrix, nu)
        centering = np.eye(len(nu)) - chain.get_infinite_matrix()
        values = (self.__fundamental_inverse @ (centering @ r_pi.T)).T

        residual = np.max(np.abs(values - (r_pi - self.__gains[:, np.newaxis] + values @ state_matrix.T)))
        if not np.isfinite(residual) or residual > POISSON_TOLERANCE * max(1.0, np.max(np.abs(values))):
            raise SingularSystemError(f"Poisson equation residual {residual:.3e} exceeds tolerance.")
        self.__values = values

        transition = game.get_transition()
        self.__q_values = np.stack([
            rewards[i] - self.__gains[i] + np.tensordot(transition, values[i], axes=([-1], [0]))
            for i in range(num_agents)
        ])
        self.__marginal_q = [
            [marginalize(self.__q_values[i], policy, j) for i in range(num_agents)]
            for j in range(num_agents)
        ]

    def get_game(self):
        return self.__game

    def get_policy(self):
        return self.__policy

    def get_chain(self):
        return self.__chain

    def get_stationary(self):
        return self.__chain.get_stationary()

    def get_gains(self):
        return self.__gains.copy()

    def get_gain(self, agent):
        return float(self.__gains[agent])

    def get_values(self, agent):
        return self.__values[agent].copy()

    def get_q(self, agent):
        """Joint-action Q-function of agent ``agent``, shape ``(S, A_1, ..., A_N)``."""
        return self.__q_values[agent].copy()

    def get_fundamental_inverse(self):
        return self.__fundamental_inverse.copy()

    def get_marginal_q(self, acting, reward_agent=None):
        """``Qbar_{j;i}`` with ``j = acting`` and ``i = reward_agent`` (defaults to ``j``); shape ``(S, A_j)``."""
        reward_agent = acting if reward_agent is None else reward_agent
        return self.__marginal_q[acting][reward_agent].copy()

    def get_advantage(self, acting, reward_agent=None):
        reward_agent = acting if reward_agent is None else reward_agent
        return self.get_marginal_q(acting, reward_agent) - self.__values[reward_agent][:, np.newaxis]

    def get_gradient(self, acting, reward_agent=None):
        """``d rho_i / d pi_j (a_j|s) = Qbar_{j;i}(s, a_j) nu(s)``."""
        return self.get_marginal_q(acting, reward_agent) * self.get_stationary()[:, np.newaxis]

    def to_dict(self):
        """Plain arrays for serialization."""
        num_agents = self.__game.get_num_agents()
        return {
            "game_id": self.__game.get_game_id(),
            "policy_hash": self.__policy.get_hash(),
            "stationary": self.get_stationary(),
            "gains": self.__gains,
            "values": self.__values,
            "q_values": [self.__q_values[i] for i in range(num_agents)],
            "marginal_q": [[self.__marginal_q[j][i] for i in range(num_agents)] for j in range(num_agents)],
        }


class OracleCache:
    """
    Bounded LRU cache of ``OracleReport`` keyed by ``(game id, policy hash)``.

    Safe to share between threads.
    """

    def __init__(self, max_size=256):
        self.__max_size = max_size
        self.__reports = OrderedDict()
        self.__lock = threading.Lock()
        self.__hits = 0
        self.__misses = 0

    def __len__(self):
        return len(self.__reports)

    def get_hit_count(self):
        return self.__hits

    def get_miss_count(self):
        return self.__misses

    def evaluate(self, game, policy):
        key = (game.get_game_id(), policy.get_hash())
        with self.__lock:
            if key in self.__reports:
                self.__hits += 1
                self.__reports.move_to_end(key)
                return self.__reports[key]
        report = OracleReport(game, policy)
        with self.__lock:
            self.__misses += 1
            self.__reports[key] = report
            while len(self.__reports) > self.__max_size:
                self.__reports.popitem(last=False)
        return report


def evaluate_policy(game, policy, cache=None):
    """
    Builds (or fetches) the ``OracleReport`` of ``(game, policy)``.

    :param cache: Optional shared ``OracleCache``.
    :type cache: OracleCache or None
    :rtype: OracleReport
    """
    if cache is not None:
        return cache.evaluate(game, policy)
    return OracleReport(game, policy)


def average_reward(game, policy, agent):
    """
    Gain ``rho_i = <nu^pi, r_i^pi>``.

    :raises ErgodicityError: If the induced chain is not ergodic.
    """
    check_agent_index(game, agent)
    nu = stationary_distribution(induced_state_chain(game, policy))
    return _gain(expect_joint(game.get_rewards(agent), policy), nu)


def average_rewards(game, policy):
    """Gains of every agent as an array of length ``N``."""
    nu = stationary_distribution(induced_state_chain(game, policy))
    return np.array([_gain(expect_joint(r, policy), nu) for r in game.get_rewards()])


def differential_values(game, policy, agent):
    """
    Differential value and Q-function of agent ``agent``.

    ``V = (I - P + P^inf)^{-1} (I - P^inf) r^pi`` so that ``<nu, V> = 0``, and
    ``Q(s,a) = r(s,a) - rho + <P(.|s,a), V>``.

    :returns: ``(V, Q)`` with shapes ``(S,)`` and ``(S, A_1, ..., A_N)``.
    :raises SingularSystemError: If the fundamental matrix solve fails.
    """
    check_agent_index(game, agent)
    report = OracleReport(game, policy)
    return report.get_values(agent), report.get_q(agent)


def marginal_q(game, policy, acting, reward_agent):
    """
    ``(Qbar_{j;i}, Abar_{j;i})``, both of shape ``(S, A_j)``.

    :raises IndexError: If an agent index is out of range.
    """
    check_agent_index(game, acting)
    check_agent_index(game, reward_agent)
    report = OracleReport(game, policy)
    return report.get_marginal_q(acting, reward_agent), report.get_advantage(acting, reward_agent)


def policy_gradient(game, policy, acting, objective):
    """``d rho_objective / d pi_acting``, shape ``(S, A_acting)``."""
    check_agent_index(game, acting)
    check_agent_index(game, objective)
    return OracleReport(game, policy).get_gradient(acting, objective)


def relative_value_iteration(kernel, reward, tolerance=BEST_RESPONSE_TOLERANCE, max_iters=BEST_RESPONSE_MAX_ITERS,
                             reference_state=0):
    """
    Relative value iteration for a single-agent average-reward MDP.

    Iterates ``h <- T h - (T h)(reference_state)`` until the span of
    ``T h - h`` falls below ``tolerance``.

    :param kernel: Transition tensor ``(S, A, S)``.
    :param reward: Reward matrix ``(S, A)``.
    :returns: ``(greedy_actions, bias, gain_estimate, iterations)``; ties go to the lowest action index.
    :raises NoConvergenceError: After ``max_iters`` iterations.
    """
    bias = np.zeros(kernel.shape[0])
    for iteration in range(1, max_iters + 1):
        q = reward + kernel @ bias
        backup = q.max(axis=1)
        difference = backup - bias
        if difference.max() - difference.min() < tolerance:
            gain = 0.5 * (difference.max() + difference.min())
            return np.argmax(q, axis=1), bias, gain, iteration
        bias = backup - backup[reference_state]
    raise NoConvergenceError(
        f"Relative value iteration did not reach span {tolerance} within {max_iters} iterations "
        f"(periodic chain or tolerance too tight)."
    )


def best_response(game, policy, agent, tolerance=BEST_RESPONSE_TOLERANCE, max_iters=BEST_RESPONSE_MAX_ITERS):
    """
    Deterministic best response of ``agent`` against the other agents' policies.

    Solves the single-agent MDP ``(Pbar^{pi_-i}, r_i^{pi_-i})`` by relative
    value iteration, then evaluates the greedy policy exactly.

    :param game: Game.
    :type game: ampg.game.MarkovGame
    :param policy: Joint policy; ``policy[agent]`` is ignored.
    :type policy: ampg.game.JointPolicy
    :param agent: Responding agent.
    :type agent: int
    :returns: ``(response, gain)`` with ``response`` a point-mass ``(S, A_i)`` matrix.
    :rtype: tuple[numpy.ndarray, float]
    :raises NoConvergenceError: If relative value iteration hits ``max_iters``.
    :raises ErgodicityError: If the response policy induces a non-ergodic chain.
    """
    kernel = marginal_transition(game, policy, agent)
    _, r_minus = marginal_reward(game, policy, agent)
    actions, _, _, iterations = relative_value_iteration(kernel, r_minus[agent], tolerance, max_iters)

    response = np.zeros((game.get_num_states(), game.get_action_counts()[agent]))
    response[np.arange(game.get_num_states()), actions] = 1.0
    gain = average_reward(game, policy.replace(agent, response), agent)
    logger.log(LOG_LEVEL_TRACE, f"Best response of agent {agent}: actions {actions.tolist()}, gain {gain} after {iterations} RVI iterations.")
    return response, gain


def nash_gap(game, policy, tolerance=BEST_RESPONSE_TOLERANCE, max_iters=BEST_RESPONSE_MAX_ITERS):
    """
    ``max_i (max_p rho_i^{p, pi_-i} - rho_i^pi)``.

    :returns: ``(gap, per_agent_gaps)``.
    :rtype: tuple[float, numpy.ndarray]
    """
    gains = average_rewards(game, policy)
    gaps = np.array([
        best_response(game, policy, agent, tolerance, max_iters)[1] - gains[agent]
        for agent in range(game.get_num_agents())
    ])
    return float(gaps.max()), gaps


def potential_value(game, policy):
    """
    Potential ``Phi(pi)`` of a potential-certified game.

    Cooperative games use ``rho_1``; games with a stored state-action
    potential ``phi`` use ``<nu^pi, phibar^pi>``.

    :raises UnsupportedStructureError: If no potential is certified.
    """
    if game.has_structure(StructureTag.COOPERATIVE):
        return average_reward(game, policy, 0)
    if game.has_structure(StructureTag.ACTION_INDEPENDENT_TRANSITIONS) or game.has_structure(StructureTag.STATE_POTENTIAL):
        if game.get_potential() is None:
            raise UnsupportedStructureError(f"Game {game.get_game_id()} is tagged {game.get_structure_names()} but stores no potential.")
        nu = stationary_distribution(induced_state_chain(game, policy))
        return _gain(expect_joint(game.get_potential(), policy), nu)
    raise UnsupportedStructureError(f"Game {game.get_game_id()} has no certified potential (structure {game.get_structure_names()}).")


def potential_gradient(game, policy, report=None):
    """
    Per-agent blocks of ``grad Phi``: ``Qbar_j nu`` for every agent ``j``.

    :raises UnsupportedStructureError: If no potential is certified.
    """
    if not game.is_potential_certified():
        raise UnsupportedStructureError(f"Game {game.get_game_id()} has no certified potential.")
    report = OracleReport(game, policy) if report is None else report
    return [report.get_gradient(j) for j in range(game.get_num_agents())]


def exploration_factor(game, policy, report=None):
    """
    ``c = min_i min_s`` of the mass ``pi_i(.|s)`` puts on the argmax set of ``Qbar_i(s,.)``.

    The argmax set uses an absolute tie tolerance of 1e-10.
    """
    report = OracleReport(game, policy) if report is None else report
    factor = 1.0
    for agent in range(game.get_num_agents()):
        q = report.get_marginal_q(agent)
        greedy = q >= q.max(axis=1, keepdims=True) - ARGMAX_TOLERANCE
        factor = min(factor, float((policy[agent] * greedy).sum(axis=1).min()))
    return factor


CONSTANT_NAMES = ("gamma", "kappa_0", "c_p", "varrho", "kappa", "kappa_1", "kappa_q", "d", "l", "l_phi", "c_phi")


def _weakest(*provenances):
    for provenance in (SAMPLED_LOWER_BOUND, ANALYTIC_UPPER_BOUND):
        if provenance in provenances:
            return provenance
    return EXACT


class GameConstants:
    """
    Structural constants of a game, each with a provenance flag.

    Primary constants (``gamma``, ``kappa_0``, ``kappa``, ``kappa_1``, ``d``,
    ``c_phi``) come from policy probes; ``c_p``, ``varrho``, ``kappa_q``,
    ``l`` and ``l_phi`` follow from closed forms.
    """

    def __init__(self, values, provenance, num_states, num_agents, max_actions, num_probes=0, enumerated=False):
        missing = [name for name in CONSTANT_NAMES if name not in values]
        if len(missing) > 0:
            raise ValueError(f"Missing constants: {missing}")
        for name in CONSTANT_NAMES:
            if provenance[name] not in PROVENANCES:
                raise ValueError(f"Unknown provenance '{provenance[name]}' for {name}.")
        self.__values = {name: float(values[name]) for name in CONSTANT_NAMES}
        self.__provenance = {name: provenance[name] for name in CONSTANT_NAMES}
        self.__num_states = num_states
        self.__num_agents = num_agents
        self.__max_actions = max_actions
        self.__num_probes = num_probes
        self.__enumerated = enumerated

    @classmethod
    def from_primary(cls, gamma, kappa_0, kappa, kappa_1, d, c_phi, num_states, num_agents, max_actions,
                     provenance=EXACT, num_probes=0, enumerated=False):
        """
        Completes the derived constants from the primary ones.

        :param provenance: One flag for all primary constants, or a dict per primary name.
        :type provenance: str or dict
        :rtype: GameConstants
        """
        primary = {"gamma": gamma, "kappa_0": kappa_0, "kappa": kappa, "kappa_1": kappa_1, "d": d, "c_phi": c_phi}
        if isinstance(provenance, str):
            provenance = {name: provenance for name in primary}
        else:
            provenance = dict(provenance)

        S, N, A = num_states, num_agents, max_actions
        values = dict(primary)
        values["c_p"] = min(np.sqrt(S / (1.0 - gamma)), 1.0 / (1.0 - gamma))
        values["varrho"] = 1.0 - 1.0 / kappa_0
        values["kappa_q"] = kappa + 2 * kappa_1 + S * kappa_1 * (kappa + kappa_1) + S * kappa * kappa_1**2
        values["l"] = kappa_0**2 * S**1.5 * A + kappa_0 * np.sqrt(S) * A
        values["l_phi"] = N * (kappa_0**2 * S**1.5 * A + kappa_0 * (S * A + 2 * A) + A)

        provenance["c_p"] = provenance["gamma"]
        provenance["varrho"] = provenance["kappa_0"]
        provenance["kappa_q"] = _weakest(provenance["kappa"], provenance["kappa_1"])
        provenance["l"] = provenance["kappa_0"]
        provenance["l_phi"] = provenance["kappa_0"]
        return cls(values, provenance, S, N, A, num_probes, enumerated)

    def __getitem__(self, name):
        return self.__values[name]

    def __contains__(self, name):
        return name in self.__values

    def __repr__(self):
        body = ", ".join(f"{name}={self.__values[name]:.6g}" for name in CONSTANT_NAMES)
        return f"GameConstants({body})"

    def get(self, name):
        return self.__values[name]

    def get_provenance(self, name=None):
        """Provenance of one constant, or a copy of the whole flag map."""
        if name is None:
            return dict(self.__provenance)
        return self.__provenance[name]

    def is_exact(self, names=None):
        names = CONSTANT_NAMES if names is None else names
        return all(self.__provenance[name] == EXACT for name in names)

    def get_num_states(self):
        return self.__num_states

    def get_num_agents(self):
        return self.__num_agents

    def get_max_actions(self):
        return self.__max_actions

    def get_num_probes(self):
        return self.__num_probes

    def is_enumerated(self):
        return self.__enumerated

    def to_dict(self):
        return {
            "values": dict(self.__values),
            "provenance": dict(self.__provenance),
            "num_states": self.__num_states,
            "num_agents": self.__num_agents,
            "max_actions": self.__max_actions,
            "num_probes": self.__num_probes,
            "enumerated": self.__enumerated,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            {name: float(value) for name, value in data["values"].items()},
            data["provenance"],
            int(data["num_states"]),
            int(data["num_agents"]),
            int(data["max_actions"]),
            int(data.get("num_probes", 0)),
            bool(data.get("enumerated", False)),
        )


def count_deterministic_policies(game):
    return int(np.prod([float(n) ** game.get_num_states() for n in game.get_action_counts()]))


def deterministic_policies(game):
    """Yields every deterministic joint policy in lexicographic order."""
    num_states = game.get_num_states()
    action_counts = game.get_action_counts()
    per_agent = [itertools.product(range(n), repeat=num_states) for n in action_counts]
    for assignment in itertools.product(*[list(p) for p in per_agent]):
        yield JointPolicy.deterministic(assignment, action_counts)


def second_eigenvalue_modulus(matrix):
    """Second largest eigenvalue modulus of a stochastic matrix (0 for a single state)."""
    if matrix.shape[0] == 1:
        return 0.0
    moduli = np.sort(np.abs(np.linalg.eigvals(matrix)))[::-1]
    return float(moduli[1])


def estimate_constants(game, policy_sample_budget=64, enumeration_budget=4096, extra_policies=None, seed=0,
                       search_kappa=True):
    """
    Estimates the structural constants over a set of probe policies.

    Probes are all deterministic joint policies when there are at most
    ``enumeration_budget`` of them, otherwise ``policy_sample_budget``
    Dirichlet-sampled stochastic policies; ``extra_policies`` (e.g. iterates
    of a sampled run) are always added. Values are exact only under full
    enumeration of a game with action-independent transitions.

    :param game: Game to probe.
    :type game: ampg.game.MarkovGame
    :param policy_sample_budget: Number of random probes when enumeration is too large.
    :type policy_sample_budget: int
    :param enumeration_budget: Largest deterministic policy count to enumerate.
    :type enumeration_budget: int
    :param extra_policies: Additional probe policies.
    :type extra_policies: list[ampg.game.JointPolicy] or None
    :param seed: Seed for sampled probes.
    :type seed: int
    :param search_kappa: Search ``kappa`` over probes; otherwise bound it by ``C_p kappa_0``.
    :type search_kappa: bool
    :rtype: GameConstants
    :raises ErgodicityError: If any probe policy induces a non-ergodic chain.
    """
    num_states = game.get_num_states()
    num_agents = game.get_num_agents()
    enumerated = count_deterministic_policies(game) <= enumeration_budget

    if enumerated:
        probes = list(deterministic_policies(game))
    else:
        rng = np.random.Generator(np.random.Philox(seed))
        probes = [JointPolicy.dirichlet(rng, num_states, game.get_action_counts()) for _ in range(policy_sample_budget)]
    if extra_policies is not None:
        probes.extend(extra_policies)
    logger.debug(f"Estimating constants of game {game.get_game_id()} over {len(probes)} probe policies (enumerated={enumerated}).")

    nu_min = np.full(num_states, np.inf)
    nu_max = np.zeros(num_states)
    kappa_0 = 1.0
    kappa = 0.0
    kappa_1 = 0.0
    gains = []
    for policy in probes:
        report = OracleReport(game, policy)
        nu = report.get_stationary()
        nu_min = np.minimum(nu_min, nu)
        nu_max = np.maximum(nu_max, nu)
        modulus = second_eigenvalue_modulus(report.get_chain().get_state_matrix())
        if modulus >= 1.0:
            raise ErgodicityError(f"Probe policy {policy.get_hash()} induces a periodic chain (|lambda_2| = {modulus}).")
        kappa_0 = max(kappa_0, 1.0 / (1.0 - modulus))
        kappa_1 = max(kappa_1, float(np.linalg.norm(report.get_fundamental_inverse(), ord=np.inf)))
        if search_kappa:
            for j in range(num_agents):
                for i in range(num_agents):
                    q = report.get_marginal_q(j, i)
                    kappa = max(kappa, 0.5 * float(q.max() - q.min()))
        gains.append(report.get_gain(0))

    exact = enumerated and game.has_structure(StructureTag.ACTION_INDEPENDENT_TRANSITIONS)
    base = EXACT if exact else SAMPLED_LOWER_BOUND
    provenance = {"gamma": base, "kappa_0": base, "kappa": base, "kappa_1": base, "d": base}

    gamma = 1.0 - float(nu_min.min())
    d = float(np.max(nu_max / nu_min))

    if game.has_structure(StructureTag.COOPERATIVE):
        c_phi = min(1.0, max(gains) - min(gains))
        provenance["c_phi"] = base
    else:
        c_phi = float(num_agents)
        provenance["c_phi"] = ANALYTIC_UPPER_BOUND

    if not search_kappa:
        c_p = min(np.sqrt(num_states / (1.0 - gamma)), 1.0 / (1.0 - gamma))
        kappa = c_p * kappa_0
        provenance["kappa"] = ANALYTIC_UPPER_BOUND

    constants = GameConstants.from_primary(
        gamma, kappa_0, kappa, kappa_1, d, c_phi,
        num_states, num_agents, game.get_max_actions(),
        provenance=provenance, num_probes=len(probes), enumerated=enumerated
    )
    logger.info(f"Constants of game {game.get_game_id()}: {constants}")
    return constants
