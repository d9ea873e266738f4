#!/usr/bin/env python
"""
algorithms.py

Last Header Update: 10/18/26
"""
import numpy as np
import bisect
import csv
import logging
from ampg.game import JointPolicy
from ampg.oracle import (
    OracleCache,
    evaluate_policy,
    nash_gap,
    potential_value,
    exploration_factor,
    BEST_RESPONSE_TOLERANCE
)
from ampg.meta import format_float
from ampg.errors import ErgodicityError, InfeasibleError, ZeroSupportError
from ampg.utils import LOG_LEVEL_TRACE

logger = logging.getLogger(__name__)

ORACLE_ALGORITHMS = ("pg", "proxq", "npg")
RATE_RULES = ("pg_theorem1", "proxq_theorem3", "npg_theorem4", "manual")
DEFAULT_RULES = {"pg": "pg_theorem1", "proxq": "proxq_theorem3", "npg": "npg_theorem4",
                 "sampled_pg": "pg_theorem1", "sampled_proxq": "proxq_theorem3"}
TRACE_COLUMNS = ("t", "phi", "nash_gap", "c_t", "beta", "algorithm", "seed")
ESTIMATOR_COLUMNS = ("K", "N1", "N2", "B", "alpha")
FEASIBILITY_SLACK = 1e-15


def project_rows(matrix, lower_bound=0.0):
    """
    Euclidean projection of every row onto ``{p : sum(p) = 1, p >= lower_bound}``.

    Sort-and-threshold algorithm applied to ``row - lower_bound`` with
    simplex mass ``1 - n * lower_bound``.

    :param matrix: Array of shape ``(rows, n)``.
    :type matrix: numpy.ndarray
    :param lower_bound: Entry floor ``l >= 0``.
    :type lower_bound: float
    :returns: Projected rows.
    :rtype: numpy.ndarray
    :raises InfeasibleError: If ``l * n > 1``.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    num_rows, n = matrix.shape
    if lower_bound < 0:
        raise ValueError(f"Lower bound must be nonnegative, got {lower_bound}.")
    mass = 1.0 - n * lower_bound
    if mass < -FEASIBILITY_SLACK:
        raise InfeasibleError(f"Floor {lower_bound} over {n} entries exceeds the unit simplex.")
    if mass <= FEASIBILITY_SLACK:
        return np.full((num_rows, n), 1.0 / n)

    shifted = matrix - lower_bound
    ordered = np.sort(shifted, axis=1)[:, ::-1]
    cumulative = np.cumsum(ordered, axis=1) - mass
    index = np.arange(1, n + 1)
    support = np.count_nonzero(ordered - cumulative / index > 0, axis=1)
    theta = cumulative[np.arange(num_rows), support - 1] / support
    return np.maximum(shifted - theta[:, np.newaxis], 0.0) + lower_bound


def project_simplex(v, lower_bound=0.0):
    """
    Closest point to ``v`` (in l2) with entries ``>= lower_bound`` summing to 1.

    :raises InfeasibleError: If ``lower_bound * len(v) > 1``.
    """
    return project_rows(np.asarray(v, dtype=np.float64)[np.newaxis, :], lower_bound)[0]


def project_policy(matrices, alpha=0.0):
    """
    Projects per-agent matrices onto the ``alpha``-truncated policy class.

    The joint projection factorizes over agents and states; each row of agent
    ``i`` is floored at ``alpha / A_i``.

    :rtype: ampg.game.JointPolicy
    """
    return JointPolicy([project_rows(m, alpha / m.shape[1]) for m in matrices])


def pg_step(game, policy, beta, report=None, cache=None):
    """
    One synchronous projected policy gradient step.

    Every agent moves along its own gradient ``Qbar_i nu`` computed at the
    same pre-step policy, then projects each row onto the simplex.

    :rtype: ampg.game.JointPolicy
    """
    if beta == 0:
        return policy
    report = evaluate_policy(game, policy, cache) if report is None else report
    return project_policy([policy[i] + beta * report.get_gradient(i) for i in range(len(policy))])


def proxq_step(game, policy, beta, report=None, cache=None):
    """
    One synchronous proximal-Q step: ``Proj(pi_i(.|s) + beta Qbar_i(s,.))`` per state.

    :rtype: ampg.game.JointPolicy
    """
    if beta == 0:
        return policy
    report = evaluate_policy(game, policy, cache) if report is None else report
    return project_policy([policy[i] + beta * report.get_marginal_q(i) for i in range(len(policy))])


def npg_step(game, policy, beta, report=None, cache=None, use_advantage=True):
    """
    One synchronous natural policy gradient step in closed form.

    ``pi_i+(a|s) = pi_i(a|s) exp(beta Abar_i(s,a)) / Z_i(s)``. Exponents are
    shifted by their row maximum before exponentiation; ``Z`` is returned
    unshifted.

    :param use_advantage: Use ``Abar`` (default) or ``Qbar``; both give the same policy.
    :type use_advantage: bool
    :returns: ``(new_policy, normalizers)`` with one length-``S`` array ``Z_i`` per agent.
    :raises ZeroSupportError: If any policy entry is zero.
    """
    if not policy.is_interior():
        raise ZeroSupportError("Natural policy gradient needs every action probability to be positive.")
    if beta == 0:
        return policy, [np.ones(policy.get_num_states()) for _ in range(len(policy))]
    report = evaluate_policy(game, policy, cache) if report is None else report

    matrices = []
    normalizers = []
    for agent in range(len(policy)):
        scores = report.get_advantage(agent) if use_advantage else report.get_marginal_q(agent)
        scores = beta * scores
        shift = scores.max(axis=1, keepdims=True)
        weights = policy[agent] * np.exp(scores - shift)
        total = weights.sum(axis=1)
        matrices.append(weights / total[:, np.newaxis])
        normalizers.append(total * np.exp(shift[:, 0]))
    return JointPolicy(matrices), normalizers


class StepSchedule:
    """
    Piecewise-constant step sizes: ``[(start_iteration, beta), ...]``.

    The first entry must start at iteration 0.
    """

    def __init__(self, table):
        table = sorted((int(start), float(beta)) for start, beta in table)
        if len(table) == 0 or table[0][0] != 0:
            raise ValueError("A step schedule must define the step size at iteration 0.")
        if any(beta < 0 for _, beta in table):
            raise ValueError("Step sizes must be nonnegative.")
        self.__starts = [start for start, _ in table]
        self.__betas = [beta for _, beta in table]

    @classmethod
    def constant(cls, beta):
        return cls([(0, beta)])

    @classmethod
    def decaying(cls, initial=0.5, final=1e-4, period=20, factor=0.5):
        """Multiplies the step by ``factor`` every ``period`` iterations until it reaches ``final``."""
        table = []
        beta = initial
        start = 0
        while beta > final:
            table.append((start, beta))
            beta *= factor
            start += period
        table.append((start, final))
        return cls(table)

    def __call__(self, iteration):
        return self.__betas[bisect.bisect_right(self.__starts, iteration) - 1]

    def __len__(self):
        return len(self.__starts)

    def to_list(self):
        return [[start, beta] for start, beta in zip(self.__starts, self.__betas)]


def theorem_rate(rule, constants):
    """
    Step size prescribed by a convergence theorem.

    - ``pg_theorem1``: ``1 / L_Phi``.
    - ``proxq_theorem3``: ``max{(1-Gamma)/((N-1)(kappa_Q + S kappa^2) A_max), (1-Gamma)/(2 L_Phi)}``.
    - ``npg_theorem4``: ``min{max{(1-Gamma)/((N-1)(kappa_Q + S kappa^2)), (1-Gamma)/L_Phi}, 1/(2 kappa)}``.

    With a single agent the ``(N-1)`` terms impose no constraint and are dropped.

    :param rule: Rule id.
    :type rule: str
    :param constants: Structural constants.
    :type constants: ampg.oracle.GameConstants
    :rtype: float
    """
    gamma = constants["gamma"]
    num_agents = constants.get_num_agents()
    num_states = constants.get_num_states()
    max_actions = constants.get_max_actions()
    coupling = constants["kappa_q"] + num_states * constants["kappa"] ** 2

    if rule == "pg_theorem1":
        return 1.0 / constants["l_phi"]
    if rule == "proxq_theorem3":
        candidates = [(1.0 - gamma) / (2.0 * constants["l_phi"])]
        if num_agents > 1:
            candidates.append((1.0 - gamma) / ((num_agents - 1) * coupling * max_actions))
        return max(candidates)
    if rule == "npg_theorem4":
        candidates = [(1.0 - gamma) / constants["l_phi"]]
        if num_agents > 1:
            candidates.append((1.0 - gamma) / ((num_agents - 1) * coupling))
        beta = max(candidates)
        if constants["kappa"] > 0:
            beta = min(beta, 1.0 / (2.0 * constants["kappa"]))
        return beta
    raise ValueError(f"Unknown theorem rate rule '{rule}'. Expected one of {RATE_RULES[:-1]}.")


class LearningRateRule:
    """
    A step-size rule plus the constants it consumed.

    ``manual`` rules carry a user step size (or schedule); theorem rules
    compute theirs from ``GameConstants``.
    """

    def __init__(self, rule, beta=None, constants=None, schedule=None):
        if rule not in RATE_RULES:
            raise ValueError(f"Unknown rate rule '{rule}'. Expected one of {RATE_RULES}.")
        if rule == "manual":
            if schedule is None and beta is None:
                raise ValueError("A manual rate rule needs 'beta' or 'schedule'.")
            if schedule is None:
                schedule = StepSchedule.constant(beta)
            provenance = None
        else:
            if constants is None:
                raise ValueError(f"Rate rule '{rule}' needs GameConstants.")
            schedule = StepSchedule.constant(theorem_rate(rule, constants))
            provenance = constants.get_provenance()
        self.__rule = rule
        self.__schedule = schedule
        self.__provenance = provenance

    @classmethod
    def for_algorithm(cls, algorithm, constants):
        """Theorem rule matching ``algorithm``."""
        return cls(DEFAULT_RULES[algorithm], constants=constants)

    def __call__(self, iteration):
        return self.__schedule(iteration)

    def __repr__(self):
        return f"LearningRateRule({self.__rule}, beta(0)={self(0):.6g})"

    def get_rule(self):
        return self.__rule

    def get_beta(self, iteration=0):
        return self.__schedule(iteration)

    def get_schedule(self):
        return self.__schedule

    def get_provenance(self):
        """Constant provenance map used by a theorem rule (``None`` for manual rules)."""
        return None if self.__provenance is None else dict(self.__provenance)


def as_schedule(rate):
    """Accepts a float, ``StepSchedule`` or ``LearningRateRule`` and returns a callable ``t -> beta``."""
    if isinstance(rate, (StepSchedule, LearningRateRule)):
        return rate
    return StepSchedule.constant(float(rate))


def regret_bounds(constants, beta, num_iterations, exploration=None):
    """
    Evaluates the Nash-regret bounds of the three oracle algorithms.

    Projected gradient: ``32 D^2 L_Phi C_Phi S / T`` (Nash-Regret*, valid at
    ``beta = 1 / L_Phi``). Proximal-Q:
    ``sqrt(D) (kappa sqrt(A_max) + 2 / beta) sqrt(2 beta C_Phi / T)``
    (first-power Nash-Regret). Natural gradient:
    ``3 C_Phi / (c beta (1 - Gamma) T)`` (Nash-Regret*, only with a positive
    exploration factor ``c``). Reporting only.

    :returns: Mapping from algorithm id to bound value.
    :rtype: dict
    """
    c_phi = constants["c_phi"]
    bounds = {
        "pg": 32.0 * constants["d"] ** 2 * constants["l_phi"] * c_phi * constants.get_num_states() / num_iterations,
        "proxq": (np.sqrt(constants["d"]) * (constants["kappa"] * np.sqrt(constants.get_max_actions()) + 2.0 / beta)
                  * np.sqrt(2.0 * beta * c_phi) / np.sqrt(num_iterations)),
    }
    if exploration is not None and exploration > 0:
        bounds["npg"] = 3.0 * c_phi / (exploration * beta * (1.0 - constants["gamma"]) * num_iterations)
    return bounds


class RunTrace:
    """
    Per-iteration metrics of one run plus regret aggregates.

    Records are dictionaries with keys ``t``, ``phi``, ``nash_gap``, ``c_t``,
    ``beta`` and, when recorded, ``l1_distance``.
    """

    def __init__(self, algorithm, seed=None, game_id=None, rate_rule=None, provenance=None, params=None,
                 seed_lineage=None):
        self.__algorithm = algorithm
        self.__seed = seed
        self.__game_id = game_id
        self.__rate_rule = rate_rule
        self.__provenance = provenance
        self.__params = {} if params is None else dict(params)
        self.__seed_lineage = seed_lineage
        self.__records = []
        self.__policies = {}
        self.__status = "running"

    def __len__(self):
        return len(self.__records)

    def __getitem__(self, index):
        return self.__records[index]

    def __iter__(self):
        return iter(self.__records)

    def add_record(self, t, phi, gap, c_t, beta, policy=None, **extra):
        record = {"t": int(t), "phi": float(phi), "nash_gap": float(gap), "c_t": float(c_t), "beta": float(beta)}
        record.update({key: float(value) for key, value in extra.items()})
        self.__records.append(record)
        if policy is not None:
            self.__policies[int(t)] = policy
        logger.log(LOG_LEVEL_TRACE, f"[{self.__algorithm} seed={self.__seed}] {record}")

    def get_algorithm(self):
        return self.__algorithm

    def get_seed(self):
        return self.__seed

    def get_game_id(self):
        return self.__game_id

    def get_rate_rule(self):
        return self.__rate_rule

    def get_provenance(self):
        return self.__provenance

    def get_params(self):
        return dict(self.__params)

    def get_seed_lineage(self):
        return self.__seed_lineage

    def get_status(self):
        return self.__status

    def set_status(self, status):
        self.__status = status

    def get_policies(self):
        """Policy snapshots keyed by iteration (only when the run kept them)."""
        return dict(self.__policies)

    def get_column(self, name):
        return np.array([record.get(name, np.nan) for record in self.__records])

    def _horizon(self, num_iterations):
        if num_iterations is not None:
            return num_iterations
        last = self.__records[-1]["t"] if len(self.__records) > 0 else 0
        return max(last, 1)

    def _gaps_before(self, num_iterations):
        num_iterations = self._horizon(num_iterations)
        gaps = np.array([max(r["nash_gap"], 0.0) for r in self.__records if r["t"] < num_iterations])
        return gaps

    def is_regret_exact(self, num_iterations=None):
        """True when every iteration ``t < T`` has a recorded gap (runs with ``eval_period=1``)."""
        num_iterations = self._horizon(num_iterations)
        recorded = {r["t"] for r in self.__records if r["t"] < num_iterations}
        return len(recorded) == num_iterations

    def nash_regret(self, num_iterations=None):
        """
        Mean of recorded Nash gaps over iterations ``t < T`` (clipped at 0).

        Only the recorded iterates enter the mean, so with ``eval_period > 1``
        this is a subsampled estimate; see :meth:`is_regret_exact`.
        """
        gaps = self._gaps_before(num_iterations)
        return float(gaps.mean()) if len(gaps) > 0 else 0.0

    def nash_regret_star(self, num_iterations=None):
        """Mean of squared recorded Nash gaps over iterations ``t < T`` (subsampled like :meth:`nash_regret`)."""
        gaps = self._gaps_before(num_iterations)
        return float((gaps**2).mean()) if len(gaps) > 0 else 0.0

    def get_columns(self):
        columns = list(TRACE_COLUMNS)
        if len(self.__params) > 0:
            columns.extend(ESTIMATOR_COLUMNS)
        if any("l1_distance" in r for r in self.__records):
            columns.append("l1_distance")
        return columns

    def write_csv(self, path):
        """
        Writes one row per recorded iterate; floats use 17 significant digits.

        :raises OSError: With the path appended.
        """
        columns = self.get_columns()
        try:
            with open(path, "w", newline="") as handle:
                writer = csv.writer(handle)
                writer.writerow(columns)
                for record in self.__records:
                    row = []
                    for column in columns:
                        if column == "algorithm":
                            row.append(self.__algorithm)
                        elif column == "seed":
                            row.append("" if self.__seed is None else self.__seed)
                        elif column == "t":
                            row.append(record["t"])
                        elif column in ESTIMATOR_COLUMNS:
                            value = self.__params.get(column)
                            row.append("" if value is None else value)
                        else:
                            row.append(format_float(record.get(column, np.nan)))
                    writer.writerow(row)
        except OSError as exc:
            raise type(exc)(f"{exc} Path: {path}") from exc

    @classmethod
    def read_csv(cls, path):
        """Reads a trace written by :meth:`write_csv` (records and identifiers only)."""
        try:
            with open(path, "r", newline="") as handle:
                rows = list(csv.DictReader(handle))
        except OSError as exc:
            raise type(exc)(f"{exc} Path: {path}") from exc
        algorithm = rows[0]["algorithm"] if len(rows) > 0 else None
        seed = rows[0]["seed"] if len(rows) > 0 and rows[0]["seed"] != "" else None
        params = {}
        if len(rows) > 0:
            params = {key: rows[0][key] for key in ESTIMATOR_COLUMNS if key in rows[0] and rows[0][key] != ""}
        trace = cls(algorithm, seed=None if seed is None else int(seed), params=params)
        for row in rows:
            extra = {}
            if row.get("l1_distance") not in (None, ""):
                extra["l1_distance"] = float(row["l1_distance"])
            trace.add_record(int(row["t"]), float(row["phi"]), float(row["nash_gap"]), float(row["c_t"]),
                             float(row["beta"]), **extra)
        trace.set_status("loaded")
        return trace

    def summary(self):
        """Aggregates for the experiment summary."""
        return {
            "algorithm": self.__algorithm,
            "seed": self.__seed,
            "game_id": self.__game_id,
            "status": self.__status,
            "rate_rule": self.__rate_rule,
            "provenance": self.__provenance,
            "num_records": len(self.__records),
            "final_nash_gap": self.__records[-1]["nash_gap"] if len(self.__records) > 0 else None,
            "nash_regret": self.nash_regret(),
            "nash_regret_star": self.nash_regret_star(),
            "regret_exact": self.is_regret_exact(),
        }


def evaluate_iterate(game, policy, report, tolerance=BEST_RESPONSE_TOLERANCE):
    """
    Oracle measurements of one iterate: ``(phi, gap, c)``.

    ``phi`` is NaN for games without a certified potential.
    """
    phi = potential_value(game, policy) if game.is_potential_certified() else np.nan
    gap, _ = nash_gap(game, policy, tolerance)
    return phi, gap, exploration_factor(game, policy, report)


def run_oracle_algorithm(game, algorithm, num_iterations, rate, eval_period=10, initial_policy=None,
                         cache=None, keep_policies=False, seed=None):
    """
    Runs projected gradient, proximal-Q or natural gradient ascent with exact oracles.

    Starts from the uniform joint policy (unless ``initial_policy`` is given)
    and evaluates potential, Nash gap and exploration factor at ``t = 0``,
    every ``eval_period`` iterations and at ``t = T``. An ``ErgodicityError``
    ends the run early with status ``'aborted: ...'``.

    :param game: Game.
    :type game: ampg.game.MarkovGame
    :param algorithm: ``'pg'``, ``'proxq'`` or ``'npg'``.
    :type algorithm: str
    :param num_iterations: Number of steps ``T`` (``0`` evaluates the initial policy only).
    :type num_iterations: int
    :param rate: Step size, ``StepSchedule`` or ``LearningRateRule``.
    :param eval_period: Iterations between oracle evaluations.
    :type eval_period: int
    :param keep_policies: Store policy snapshots at evaluation points.
    :type keep_policies: bool
    :returns: Completed trace.
    :rtype: RunTrace
    """
    if algorithm not in ORACLE_ALGORITHMS:
        raise ValueError(f"Unknown oracle algorithm '{algorithm}'. Expected one of {ORACLE_ALGORITHMS}.")
    if num_iterations < 0 or eval_period < 1:
        raise ValueError(f"Invalid run length {num_iterations} or evaluation period {eval_period}.")

    schedule = as_schedule(rate)
    cache = OracleCache() if cache is None else cache
    rule = schedule.get_rule() if isinstance(schedule, LearningRateRule) else "manual"
    provenance = schedule.get_provenance() if isinstance(schedule, LearningRateRule) else None
    trace = RunTrace(algorithm, seed=seed, game_id=game.get_game_id(), rate_rule=rule, provenance=provenance)

    policy = JointPolicy.uniform(game.get_num_states(), game.get_action_counts()) if initial_policy is None else initial_policy
    logger.debug(f"Running {algorithm} on game {game.get_game_id()} for {num_iterations} iterations ({rule}, beta(0)={schedule(0)}).")

    try:
        for t in range(num_iterations + 1):
            report = evaluate_policy(game, policy, cache)
            beta = schedule(t)
            if t % eval_period == 0 or t == num_iterations:
                phi, gap, c_t = evaluate_iterate(game, policy, report)
                trace.add_record(t, phi, gap, c_t, beta, policy=policy if keep_policies else None)
            if t == num_iterations:
                break
            if algorithm == "pg":
                policy = pg_step(game, policy, beta, report=report)
            elif algorithm == "proxq":
                policy = proxq_step(game, policy, beta, report=report)
            else:
                policy, _ = npg_step(game, policy, beta, report=report)
        trace.set_status("completed")
    except ErgodicityError as exc:
        logger.warning(f"Run {algorithm} on game {game.get_game_id()} aborted: {exc}", exc_info=True)
        trace.set_status(f"aborted: {exc}")
    return trace
