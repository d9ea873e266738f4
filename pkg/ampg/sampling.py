#!/usr/bin/env python
"""
sampling.py

Seeded trajectory simulation, the sample-based estimators and the
sample-based learning loops. Learning only ever sees trajectories; the
oracle is used to measure iterates.

Last Header Update: 10/18/26
"""
import numpy as np
import bisect
import logging
import warnings
from ampg.game import JointPolicy, l1_distance
from ampg.oracle import OracleCache, evaluate_policy
from ampg.algorithms import RunTrace, LearningRateRule, as_schedule, evaluate_iterate, project_policy
from ampg.datastore import AMPGDataStore
from ampg.errors import LengthError, ZeroSupportError, ErgodicityError
from ampg.utils import get_version, LOG_LEVEL_TRACE

logger = logging.getLogger(__name__)
logging.captureWarnings(True)

ENVIRONMENT_CHANNEL = 0


class RandomStreams:
    """
    Counter-based random streams derived from one master seed.

    Every ``(iteration, channel)`` pair owns an independent ``Philox``
    generator spawned through ``SeedSequence``. Channel 0 drives the
    environment (initial state and transitions); channel ``i + 1`` drives
    agent ``i``'s action draws.
    """

    def __init__(self, master_seed):
        self.__seed = int(master_seed)

    def get_seed(self):
        return self.__seed

    def generator(self, iteration, channel):
        sequence = np.random.SeedSequence(self.__seed, spawn_key=(int(iteration), int(channel)))
        return np.random.Generator(np.random.Philox(sequence))

    def environment(self, iteration):
        return self.generator(iteration, ENVIRONMENT_CHANNEL)

    def agent(self, iteration, agent):
        return self.generator(iteration, agent + 1)

    def lineage(self):
        return f"philox:{self.__seed}/(iteration,channel)"


class Trajectory:
    """
    One simulated ``(state, joint action, rewards)`` sequence.

    States are ``(L,)``, actions and rewards ``(L, N)``. The generating seed,
    iteration and policy hashes (joint and per agent) travel with it.
    """

    def __init__(self, states, actions, rewards, seed=None, iteration=0, policy_hashes=None):
        self.__states = np.asarray(states, dtype=np.int64)
        self.__actions = np.asarray(actions, dtype=np.int64)
        self.__rewards = np.asarray(rewards, dtype=np.float64)
        if self.__actions.ndim != 2 or self.__actions.shape[0] != len(self.__states) or self.__rewards.shape != self.__actions.shape:
            raise ValueError(f"Inconsistent trajectory shapes: states {self.__states.shape}, actions {self.__actions.shape}, rewards {self.__rewards.shape}.")
        self.__seed = seed
        self.__iteration = iteration
        self.__policy_hashes = {} if policy_hashes is None else dict(policy_hashes)

    def __len__(self):
        return len(self.__states)

    def get_states(self):
        return self.__states

    def get_actions(self, agent=None):
        return self.__actions if agent is None else self.__actions[:, agent]

    def get_rewards(self, agent=None):
        return self.__rewards if agent is None else self.__rewards[:, agent]

    def get_num_agents(self):
        return self.__actions.shape[1]

    def get_seed(self):
        return self.__seed

    def get_iteration(self):
        return self.__iteration

    def get_policy_hash(self, agent=None):
        """Hash of the generating joint policy (``agent=None``) or of one agent's matrix; ``None`` if unknown."""
        return self.__policy_hashes.get("joint" if agent is None else agent)

    def __record_dtype(self):
        num_agents = self.get_num_agents()
        return np.dtype([("state", "<u4"), ("actions", "<u4", (num_agents,)), ("rewards", "<f8", (num_agents,))])

    def save_binary(self, path):
        """
        Raw dump for replay: per step a little-endian ``u32`` state, ``N``
        ``u32`` actions and ``N`` ``f64`` rewards.
        """
        records = np.empty(len(self), dtype=self.__record_dtype())
        records["state"] = self.__states
        records["actions"] = self.__actions
        records["rewards"] = self.__rewards
        try:
            records.tofile(path)
        except OSError as exc:
            raise type(exc)(f"{exc} Path: {path}") from exc

    @classmethod
    def load_binary(cls, path, num_agents, seed=None):
        dtype = np.dtype([("state", "<u4"), ("actions", "<u4", (num_agents,)), ("rewards", "<f8", (num_agents,))])
        try:
            records = np.fromfile(path, dtype=dtype)
        except OSError as exc:
            raise type(exc)(f"{exc} Path: {path}") from exc
        return cls(records["state"], records["actions"], records["rewards"], seed=seed)

    def to_netcdf(self, path):
        """Writes the trajectory as a netCDF archive with little-endian variables."""
        with AMPGDataStore(path, "w", format="NETCDF4") as ds:
            ds.createDimension("step", len(self))
            ds.createDimension("agent", self.get_num_agents())
            ds.createVariable("state", "u4", ("step",), endian="little")[:] = self.__states
            ds.createVariable("action", "u4", ("step", "agent"), endian="little")[:] = self.__actions
            ds.createVariable("reward", "f8", ("step", "agent"), endian="little")[:] = self.__rewards
            ds.setncattr("ampg_version", get_version())
            ds.setncattr("iteration", int(self.__iteration))
            if self.__seed is not None:
                ds.setncattr("seed", int(self.__seed))
            for key, value in self.__policy_hashes.items():
                ds.setncattr(f"policy_hash_{key}", value)

    @classmethod
    def from_netcdf(cls, path):
        with AMPGDataStore(path, "r") as ds:
            attrs = {key: ds.getncattr(key) for key in ds.ncattrs()}
            hashes = {}
            for key, value in attrs.items():
                if key.startswith("policy_hash_"):
                    label = key[len("policy_hash_"):]
                    hashes["joint" if label == "joint" else int(label)] = value
            return cls(
                np.array(ds["state"][:]),
                np.array(ds["action"][:]),
                np.array(ds["reward"][:]),
                seed=int(attrs["seed"]) if "seed" in attrs else None,
                iteration=int(attrs.get("iteration", 0)),
                policy_hashes=hashes
            )


class EstimatorParams:
    """
    Sample-size parameters.

    Gradient estimator: ``K`` episodes of length ``N2`` after an even burn-in
    ``N1``. Q estimator: trajectory length ``B`` and rollout length ``N1``.
    ``alpha`` is the policy-class floor.
    """

    def __init__(self, K=None, N1=None, N2=None, B=None, alpha=None):
        self.K = K
        self.N1 = N1
        self.N2 = N2
        self.B = B
        self.alpha = alpha

    def __repr__(self):
        return f"EstimatorParams(K={self.K}, N1={self.N1}, N2={self.N2}, B={self.B}, alpha={self.alpha})"

    def _check_alpha(self):
        if self.alpha is not None and not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}.")

    def validate_gradient(self):
        for name in ("K", "N1", "N2"):
            value = getattr(self, name)
            if value is None or int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}.")
        if self.N1 % 2 != 0:
            raise ValueError(f"N1 must be even, got {self.N1}.")
        self._check_alpha()
        return self

    def validate_q(self):
        for name in ("B", "N1"):
            value = getattr(self, name)
            if value is None or int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}.")
        if self.B <= self.N1:
            raise ValueError(f"B ({self.B}) must exceed N1 ({self.N1}).")
        self._check_alpha()
        return self

    def gradient_length(self):
        return self.N1 + self.K * self.N2

    def to_dict(self):
        return {key: value for key, value in (("K", self.K), ("N1", self.N1), ("N2", self.N2), ("B", self.B), ("alpha", self.alpha))
                if value is not None}


def _inverse_cdf_tables(game, policy, initial_distribution):
    num_states = game.get_num_states()
    initial = np.full(num_states, 1.0 / num_states) if initial_distribution is None else np.asarray(initial_distribution, dtype=np.float64)
    if initial.shape != (num_states,):
        raise ValueError(f"Initial distribution has shape {initial.shape}, expected ({num_states},).")
    return (
        np.cumsum(initial),
        [np.cumsum(policy[i], axis=1) for i in range(len(policy))],
        np.cumsum(game.get_flat_transition(), axis=2),
    )


def _joint_strides(action_counts):
    strides = np.ones(len(action_counts), dtype=np.int64)
    for i in range(len(action_counts) - 2, -1, -1):
        strides[i] = strides[i + 1] * action_counts[i + 1]
    return strides


def _policy_hashes(policy):
    hashes = {"joint": policy.get_hash()}
    hashes.update({agent: policy.get_hash(agent) for agent in range(len(policy))})
    return hashes


def simulate(game, policy, length, streams, iteration=0, initial_distribution=None):
    """
    Simulates one trajectory with all agents acting independently and synchronously.

    The initial state uses the first environment draw, the transition out of
    step ``t`` uses draw ``t + 1``; agent ``i``'s action at step ``t`` uses
    draw ``t`` of its own stream. Inverse-CDF sampling throughout.

    :param game: Game to simulate.
    :type game: ampg.game.MarkovGame
    :param policy: Behaviour policy.
    :type policy: ampg.game.JointPolicy
    :param length: Number of steps.
    :type length: int
    :param streams: Random streams (or an int master seed).
    :type streams: RandomStreams or int
    :param iteration: Outer iteration index selecting the streams.
    :type iteration: int
    :param initial_distribution: Law of ``s^0``; uniform by default.
    :type initial_distribution: array_like or None
    :rtype: Trajectory
    """
    if length < 1:
        raise ValueError(f"Trajectory length must be positive, got {length}.")
    policy.check_compatible(game)
    streams = streams if isinstance(streams, RandomStreams) else RandomStreams(streams)
    num_agents = game.get_num_agents()
    action_counts = game.get_action_counts()
    num_states = game.get_num_states()

    initial_cdf, agent_cdfs, transition_cdf = _inverse_cdf_tables(game, policy, initial_distribution)
    agent_cdfs = [cdf.tolist() for cdf in agent_cdfs]
    transition_cdf = transition_cdf.tolist()
    strides = _joint_strides(action_counts).tolist()
    environment_draws = streams.environment(iteration).random(length).tolist()
    agent_draws = [streams.agent(iteration, i).random(length).tolist() for i in range(num_agents)]

    states = [0] * length
    joints = [0] * length
    actions = [[0] * num_agents for _ in range(length)]
    state = min(bisect.bisect_right(initial_cdf.tolist(), environment_draws[0]), num_states - 1)
    for t in range(length):
        states[t] = state
        joint = 0
        row = actions[t]
        for i in range(num_agents):
            action = min(bisect.bisect_right(agent_cdfs[i][state], agent_draws[i][t]), action_counts[i] - 1)
            row[i] = action
            joint += action * strides[i]
        joints[t] = joint
        if t + 1 < length:
            state = min(bisect.bisect_right(transition_cdf[state][joint], environment_draws[t + 1]), num_states - 1)

    states = np.array(states, dtype=np.int64)
    joints = np.array(joints, dtype=np.int64)
    rewards = game.get_flat_rewards()[:, states, joints].T
    return Trajectory(states, np.array(actions, dtype=np.int64), rewards, seed=streams.get_seed(),
                      iteration=iteration, policy_hashes=_policy_hashes(policy))


def simulate_many(game, policy, length, seeds, iteration=0, initial_distribution=None):
    """
    Simulates one trajectory per seed, vectorized across seeds.

    Produces exactly the trajectories :func:`simulate` would for each seed.

    :param seeds: Master seeds.
    :type seeds: list[int]
    :rtype: list[Trajectory]
    """
    if length < 1:
        raise ValueError(f"Trajectory length must be positive, got {length}.")
    policy.check_compatible(game)
    streams = [RandomStreams(seed) for seed in seeds]
    num_agents = game.get_num_agents()
    action_counts = game.get_action_counts()
    num_states = game.get_num_states()
    batch = np.arange(len(seeds))

    initial_cdf, agent_cdfs, transition_cdf = _inverse_cdf_tables(game, policy, initial_distribution)
    strides = _joint_strides(action_counts)
    environment_draws = np.stack([s.environment(iteration).random(length) for s in streams])
    agent_draws = [np.stack([s.agent(iteration, i).random(length) for s in streams]) for i in range(num_agents)]

    states = np.zeros((len(seeds), length), dtype=np.int64)
    joints = np.zeros((len(seeds), length), dtype=np.int64)
    actions = np.zeros((len(seeds), length, num_agents), dtype=np.int64)
    state = np.minimum((initial_cdf[np.newaxis, :] <= environment_draws[:, :1]).sum(axis=1), num_states - 1)
    for t in range(length):
        states[:, t] = state
        joint = np.zeros(len(seeds), dtype=np.int64)
        for i in range(num_agents):
            action = (agent_cdfs[i][state] <= agent_draws[i][:, t:t + 1]).sum(axis=1)
            action = np.minimum(action, action_counts[i] - 1)
            actions[:, t, i] = action
            joint += action * strides[i]
        joints[:, t] = joint
        if t + 1 < length:
            rows = transition_cdf[state, joint]
            state = np.minimum((rows <= environment_draws[:, t + 1:t + 2]).sum(axis=1), num_states - 1)

    flat_rewards = game.get_flat_rewards()
    hashes = _policy_hashes(policy)
    return [
        Trajectory(states[b], actions[b], flat_rewards[:, states[b], joints[b]].T, seed=streams[b].get_seed(),
                   iteration=iteration, policy_hashes=hashes)
        for b in batch
    ]


def estimate_rho(trajectory, n1, agent):
    """
    Burn-in average reward: mean of ``r_i`` over steps ``N1/2 .. N1-1``.

    :raises ValueError: If ``N1`` is not a positive even integer.
    :raises LengthError: If the trajectory is shorter than ``N1``.
    """
    if n1 < 2 or n1 % 2 != 0:
        raise ValueError(f"N1 must be a positive even integer, got {n1}.")
    if len(trajectory) < n1:
        raise LengthError(f"Trajectory of length {len(trajectory)} is shorter than N1={n1}.")
    return float(np.mean(trajectory.get_rewards(agent)[n1 // 2:n1]))


def _warn_on_policy_mismatch(trajectory, matrix, agent):
    expected = trajectory.get_policy_hash(agent)
    if expected is None:
        return
    supplied = JointPolicy([matrix], check=False).get_hash(0)
    if supplied != expected:
        message = f"Policy of agent {agent} ({supplied}) did not generate this trajectory ({expected})."
        logger.warning(message)
        warnings.warn(message, RuntimeWarning, stacklevel=3)


def estimate_gradient(trajectory, policy_matrix, params, agent, rho_hat=None):
    """
    Single-trajectory score-function gradient estimate for one agent.

    After the burn-in ``N1`` the trajectory splits into ``K`` contiguous
    episodes of length ``N2`` starting at ``t_k = N1 + k N2``. Each episode
    contributes ``R(k) / pi_i(a^{t_k}|s^{t_k})`` at ``(s^{t_k}, a^{t_k})``
    where ``R(k)`` sums ``r - rho_hat`` over the episode; the result is
    averaged over ``K``.

    :param trajectory: Trajectory generated by the joint policy containing ``policy_matrix``.
    :type trajectory: Trajectory
    :param policy_matrix: Agent's ``(S, A_i)`` policy; a hash mismatch with the trajectory warns.
    :type policy_matrix: numpy.ndarray
    :param params: Uses ``K``, ``N1``, ``N2``.
    :type params: EstimatorParams
    :param agent: Agent index.
    :type agent: int
    :param rho_hat: Override for the burn-in gain estimate.
    :type rho_hat: float or None
    :returns: Estimate of shape ``(S, A_i)``.
    :rtype: numpy.ndarray
    :raises LengthError: If the trajectory is shorter than ``N1 + K N2``.
    :raises ZeroSupportError: If an episode starts with a zero-probability action.
    """
    params.validate_gradient()
    required = params.gradient_length()
    if len(trajectory) < required:
        raise LengthError(f"Trajectory of length {len(trajectory)} is shorter than N1 + K*N2 = {required}.")
    _warn_on_policy_mismatch(trajectory, policy_matrix, agent)

    rho = estimate_rho(trajectory, params.N1, agent) if rho_hat is None else rho_hat
    centered = trajectory.get_rewards(agent)[params.N1:required] - rho
    returns = centered.reshape(params.K, params.N2).sum(axis=1)
    starts = params.N1 + params.N2 * np.arange(params.K)
    states = trajectory.get_states()[starts]
    actions = trajectory.get_actions(agent)[starts]
    probabilities = policy_matrix[states, actions]
    if np.any(probabilities == 0):
        raise ZeroSupportError(f"Agent {agent} took an action its policy assigns probability 0.")

    gradient = np.zeros(policy_matrix.shape)
    np.add.at(gradient, (states, actions), returns / probabilities)
    return gradient / params.K


def estimate_q(trajectory, state, policy_matrix, B, n1, agent, return_visits=False):
    """
    Marginal Q estimate of one agent at one state (target ``Qbar_i(s,.) + N1 rho_i``).

    Scans ``tau = 0, 1, ...`` while ``tau <= B - N1``. A visit to ``state``
    records ``y = R / pi_i(a^tau|s)`` on the taken action, with ``R`` the
    sum of the next ``N1`` rewards, and jumps ``tau`` by ``2 N1``. Returns the
    mean of the ``y`` vectors, or zeros when ``state`` is never visited.

    :param return_visits: Also return the list of visit times.
    :type return_visits: bool
    :returns: Length-``A_i`` estimate (and visit times).
    :raises LengthError: If ``B`` exceeds the trajectory length or ``B <= N1``.
    :raises ZeroSupportError: If a visited action has zero probability.
    """
    if B > len(trajectory):
        raise LengthError(f"B={B} exceeds the trajectory length {len(trajectory)}.")
    if B <= n1:
        raise LengthError(f"B={B} must exceed N1={n1}.")
    rewards = trajectory.get_rewards(agent)
    actions = trajectory.get_actions(agent)
    candidates = np.flatnonzero(trajectory.get_states()[:B - n1 + 1] == state)

    totals = np.zeros(policy_matrix.shape[1])
    visits = []
    next_allowed = 0
    for tau in candidates:
        if tau < next_allowed:
            continue
        action = actions[tau]
        probability = policy_matrix[state, action]
        if probability == 0:
            raise ZeroSupportError(f"Agent {agent} took action {action} in state {state} with probability 0.")
        totals[action] += rewards[tau:tau + n1].sum() / probability
        visits.append(int(tau))
        next_allowed = tau + 2 * n1

    estimate = totals / len(visits) if len(visits) > 0 else totals
    if return_visits:
        return estimate, visits
    return estimate


def gradient_error_bound(constants, params):
    """
    Upper bound on ``E ||g_hat - grad||_2^2`` for the single-trajectory gradient estimator.

    Sums the episode-variance term, the episode-correlation term, the
    burn-in bias term and the truncation term.

    :param constants: Structural constants (uses ``c_p``, ``varrho`` and ``A_max``).
    :type constants: ampg.oracle.GameConstants
    :param params: Uses ``K``, ``N1``, ``N2``, ``alpha``.
    :type params: EstimatorParams
    :rtype: float
    """
    a_max = constants.get_max_actions()
    c_p = constants["c_p"]
    rho = constants["varrho"]
    K, N1, N2, alpha = params.K, params.N1, params.N2, params.alpha
    variance = (1.0 / alpha + 1.0) * 2.0 * a_max * N2**2 / K
    correlation = (4.0 * c_p * a_max / (1.0 - rho**N2) * (np.sqrt(2.0 / alpha) + np.sqrt(2.0))
                   * N2**2 / K * rho**N2)
    burn_in = 16.0 * a_max * c_p**2 / (1.0 - rho) ** 2 * N2**2 / N1**2 * rho**N1
    truncation = 2.0 * a_max * c_p**2 / (1.0 - rho) ** 2 * rho ** (2 * N2)
    return float(variance + correlation + burn_in + truncation)


def _rule_name(schedule):
    return schedule.get_rule() if isinstance(schedule, LearningRateRule) else "manual"


def _record(trace, game, policy, t, beta, cache, reference, keep_policies):
    report = evaluate_policy(game, policy, cache)
    phi, gap, c_t = evaluate_iterate(game, policy, report)
    extra = {} if reference is None else {"l1_distance": l1_distance(policy, reference)}
    trace.add_record(t, phi, gap, c_t, beta, policy=policy if keep_policies else None, **extra)


def run_sampled_pg(game, num_iterations, rate, K, N1, N2, alpha, seed, eval_period=10, reference=None,
                   initial_distribution=None, keep_policies=False):
    """
    Independent projected policy gradient with single-trajectory gradient estimates.

    Each outer iteration simulates one fresh ``N1 + K N2`` trajectory under
    the current joint policy; every agent estimates its own gradient from
    the shared states and its own actions and rewards, then projects onto
    the ``alpha``-truncated class. Oracle measurements are taken at
    evaluation points only.

    :param rate: Step size, ``StepSchedule`` or ``LearningRateRule``.
    :param reference: Optional reference policy; records ``l1_distance`` to it.
    :type reference: ampg.game.JointPolicy or None
    :rtype: ampg.algorithms.RunTrace
    """
    params = EstimatorParams(K=K, N1=N1, N2=N2, alpha=alpha).validate_gradient()
    return _run_sampled("sampled_pg", game, num_iterations, rate, params, seed, eval_period, reference,
                        initial_distribution, keep_policies)


def run_sampled_proxq(game, num_iterations, rate, B, N1, alpha, seed, eval_period=10, reference=None,
                      initial_distribution=None, keep_policies=False):
    """
    Independent proximal-Q ascent with per-state Q estimates from one ``B``-step trajectory.

    The estimates target ``Qbar + N1 rho``; the constant shift leaves the
    projection unchanged.

    :rtype: ampg.algorithms.RunTrace
    """
    params = EstimatorParams(B=B, N1=N1, alpha=alpha).validate_q()
    return _run_sampled("sampled_proxq", game, num_iterations, rate, params, seed, eval_period, reference,
                        initial_distribution, keep_policies)


def _run_sampled(algorithm, game, num_iterations, rate, params, seed, eval_period, reference,
                 initial_distribution, keep_policies):
    if num_iterations < 0 or eval_period < 1:
        raise ValueError(f"Invalid run length {num_iterations} or evaluation period {eval_period}.")
    schedule = as_schedule(rate)
    streams = RandomStreams(seed)
    cache = OracleCache(max_size=8)
    provenance = schedule.get_provenance() if isinstance(schedule, LearningRateRule) else None
    trace = RunTrace(algorithm, seed=seed, game_id=game.get_game_id(), rate_rule=_rule_name(schedule),
                     provenance=provenance, params=params.to_dict(), seed_lineage=streams.lineage())
    policy = JointPolicy.uniform(game.get_num_states(), game.get_action_counts())
    num_states = game.get_num_states()
    logger.debug(f"Running {algorithm} on game {game.get_game_id()} with {params}, seed {seed}.")

    try:
        for t in range(num_iterations + 1):
            beta = schedule(t)
            if t % eval_period == 0 or t == num_iterations:
                _record(trace, game, policy, t, beta, cache, reference, keep_policies)
            if t == num_iterations:
                break
            if algorithm == "sampled_pg":
                trajectory = simulate(game, policy, params.gradient_length(), streams, t, initial_distribution)
                steps = [estimate_gradient(trajectory, policy[i], params, i) for i in range(len(policy))]
            else:
                trajectory = simulate(game, policy, params.B, streams, t, initial_distribution)
                steps = [
                    np.stack([estimate_q(trajectory, s, policy[i], params.B, params.N1, i) for s in range(num_states)])
                    for i in range(len(policy))
                ]
            logger.log(LOG_LEVEL_TRACE, f"[{algorithm} seed={seed}] iteration {t}: trajectory of {len(trajectory)} steps.")
            if beta == 0:
                continue
            policy = project_policy([policy[i] + beta * steps[i] for i in range(len(policy))], params.alpha)
        trace.set_status("completed")
    except ErgodicityError as exc:
        logger.warning(f"Run {algorithm} (seed {seed}) aborted: {exc}", exc_info=True)
        trace.set_status(f"aborted: {exc}")
    return trace
