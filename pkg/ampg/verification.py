#!/usr/bin/env python
"""
verification.py

Property checks: the identities and inequalities the convergence analysis
rests on, evaluated on concrete games with the exact oracles.

Last Header Update: 10/18/26
"""
import numpy as np
import json
import logging
from ampg.game import JointPolicy, policy_distance, induced_state_chain
from ampg.oracle import (
    OracleReport,
    average_reward,
    potential_value,
    potential_gradient,
    estimate_constants,
    second_eigenvalue_modulus,
    stationary_distribution,
    EXACT
)
from ampg.algorithms import npg_step, as_schedule, LearningRateRule
from ampg.errors import UnsupportedStructureError
from ampg.utils import ProgressBar, LOG_LEVEL_TRACE

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-9
GRADIENT_TOLERANCE = 1e-6
PROBE_MIXING_WEIGHT = 0.1
SUITES = ("fast", "full")

PASS = "pass"
FAIL = "fail"
INFO = "info"


class PropertyResult:
    """
    Outcome of one property check.

    The verdict is ``pass`` iff ``max_violation <= tolerance``. Checks whose
    constants are not exact report ``info`` instead of ``fail``.
    """

    def __init__(self, property_id, game_id, num_probes, max_violation, tolerance, informational=False, details=None):
        self.property_id = property_id
        self.game_id = game_id
        self.num_probes = int(num_probes)
        self.max_violation = float(max_violation)
        self.tolerance = float(tolerance)
        self.informational = informational
        self.details = {} if details is None else dict(details)

    def __repr__(self):
        return f"PropertyResult({self.property_id}, {self.get_verdict()}, max_violation={self.max_violation:.3e})"

    def is_satisfied(self):
        return self.max_violation <= self.tolerance

    def get_verdict(self):
        if self.is_satisfied():
            return PASS
        return INFO if self.informational else FAIL

    def is_hard_failure(self):
        return self.get_verdict() == FAIL

    def to_dict(self):
        return {
            "property_id": self.property_id,
            "game_id": self.game_id,
            "num_probes": self.num_probes,
            "max_violation": self.max_violation,
            "tolerance": self.tolerance,
            "verdict": self.get_verdict(),
            "informational": self.informational,
            "details": self.details,
        }


def _make_rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def probe_policy(rng, game):
    """Dirichlet(1) rows mixed with the uniform policy, so every entry is at least ``0.1 / A_i``."""
    sample = JointPolicy.dirichlet(rng, game.get_num_states(), game.get_action_counts())
    return JointPolicy([(1.0 - PROBE_MIXING_WEIGHT) * m + PROBE_MIXING_WEIGHT / m.shape[1] for m in sample])


def tangent_direction(rng, shape):
    """Random direction with zero row sums and unit l2 norm."""
    direction = rng.standard_normal(shape)
    direction -= direction.mean(axis=1, keepdims=True)
    norm = np.linalg.norm(direction)
    return direction / norm if norm > 0 else direction


def _violation(lhs, rhs):
    return float(lhs - rhs)


def check_performance_difference(game, num_probes=100, seed=0):
    """
    Checks the performance difference identity in both forms.

    For random ``(i, j, pi, pi_j')`` compares
    ``rho_i(pi_j, pi_-j) - rho_i(pi_j', pi_-j)`` with
    ``E_{s~nu^pi} <Qbar'_{j;i}(s,.), pi_j - pi_j'>`` and with
    ``E_{s~nu^pi} sum_a pi_j(a|s) Abar'_{j;i}(s,a)``, where primes denote
    quantities at the deviated policy.

    :rtype: PropertyResult
    """
    rng = _make_rng(seed)
    num_agents = game.get_num_agents()
    worst = 0.0
    worst_advantage = 0.0
    for _ in range(num_probes):
        policy = probe_policy(rng, game)
        i = int(rng.integers(num_agents))
        j = int(rng.integers(num_agents))
        deviated = policy.replace(j, probe_policy(rng, game)[j])

        report = OracleReport(game, policy)
        deviated_report = OracleReport(game, deviated)
        nu = report.get_stationary()
        lhs = report.get_gain(i) - deviated_report.get_gain(i)
        delta = policy[j] - deviated[j]
        q_form = float(nu @ (deviated_report.get_marginal_q(j, i) * delta).sum(axis=1))
        advantage_form = float(nu @ (policy[j] * deviated_report.get_advantage(j, i)).sum(axis=1))
        worst = max(worst, abs(lhs - q_form))
        worst_advantage = max(worst_advantage, abs(lhs - advantage_form))
    return PropertyResult("performance_difference", game.get_game_id(), num_probes, max(worst, worst_advantage),
                          IDENTITY_TOLERANCE, details={"q_form": worst, "advantage_form": worst_advantage})


def check_gradient(game, num_probes=20, step=1e-5, seed=0):
    """
    Compares central finite differences of ``rho_i`` along random tangent
    directions of ``pi_j`` with the analytic gradient ``Qbar_{j;i} nu``.

    The tolerance is ``max(1e-6, 10 h^2 L)`` with ``L`` evaluated from the
    mixing coefficient observed on the probes.

    :rtype: PropertyResult
    """
    rng = _make_rng(seed)
    num_agents = game.get_num_agents()
    worst = 0.0
    kappa_0 = 1.0
    for _ in range(num_probes):
        policy = probe_policy(rng, game)
        i = int(rng.integers(num_agents))
        j = int(rng.integers(num_agents))
        direction = tangent_direction(rng, policy[j].shape)

        report = OracleReport(game, policy)
        modulus = second_eigenvalue_modulus(report.get_chain().get_state_matrix())
        kappa_0 = max(kappa_0, 1.0 / (1.0 - modulus))
        analytic = float((report.get_gradient(j, i) * direction).sum())

        forward = policy.replace(j, policy[j] + step * direction, check=False)
        backward = policy.replace(j, policy[j] - step * direction, check=False)
        numeric = (average_reward(game, forward, i) - average_reward(game, backward, i)) / (2.0 * step)
        worst = max(worst, abs(numeric - analytic))

    num_states = game.get_num_states()
    max_actions = game.get_max_actions()
    smoothness = kappa_0**2 * num_states**1.5 * max_actions + kappa_0 * np.sqrt(num_states) * max_actions
    tolerance = max(GRADIENT_TOLERANCE, 10.0 * step**2 * smoothness)
    return PropertyResult("gradient", game.get_game_id(), num_probes, worst, tolerance, details={"step": step})


def _sensitivity_sides(report, other, constants, distance):
    """``(lhs, rhs)`` pairs of the four sensitivity inequalities for every agent."""
    num_states = constants.get_num_states()
    kappa = constants["kappa"]
    kappa_1 = constants["kappa_1"]
    value_factor = kappa_1 * (2.0 + num_states * (kappa + kappa_1) + num_states * kappa * kappa_1)
    sides = {
        "stationary": (float(np.max(np.abs(report.get_stationary() - other.get_stationary()))), kappa * distance),
    }
    gain_gap = np.max(np.abs(report.get_gains() - other.get_gains()))
    sides["gain"] = (float(gain_gap), kappa * distance)
    value_gap = max(np.max(np.abs(report.get_values(i) - other.get_values(i))) for i in range(len(report.get_gains())))
    sides["value"] = (float(value_gap), value_factor * distance)
    q_gap = max(np.max(np.abs(report.get_q(i) - other.get_q(i))) for i in range(len(report.get_gains())))
    sides["q"] = (float(q_gap), constants["kappa_q"] * distance)
    return sides


def check_sensitivity(game, constants, num_probes=100, seed=0):
    """
    Sensitivity of ``nu``, ``rho``, ``V`` and ``Q`` to a unilateral policy change.

    For random ``pi`` and ``pi' = (pi_j', pi_-j)`` every difference must stay
    below its constant times ``||pi - pi'||_{1,inf}``, with zero slack.
    Non-exact constants make the result informational.

    :rtype: PropertyResult
    """
    rng = _make_rng(seed)
    worst = {"stationary": 0.0, "gain": 0.0, "value": 0.0, "q": 0.0}
    for _ in range(num_probes):
        policy = probe_policy(rng, game)
        j = int(rng.integers(game.get_num_agents()))
        other = policy.replace(j, probe_policy(rng, game)[j])
        distance = policy_distance(policy, other)
        sides = _sensitivity_sides(OracleReport(game, policy), OracleReport(game, other), constants, distance)
        for name, (lhs, rhs) in sides.items():
            worst[name] = max(worst[name], _violation(lhs, rhs))
    informational = not constants.is_exact(["kappa", "kappa_1"])
    return PropertyResult("sensitivity", game.get_game_id(), num_probes, max(worst.values()), 0.0,
                          informational=informational, details=worst)


def check_mixing(game, constants, probes, t_max=50):
    """
    Geometric mixing: ``sup_s ||P^t(.|s) - nu||_1 <= C_p varrho^t`` for ``t = 1..t_max``.

    :param probes: Policies to check.
    :type probes: list[ampg.game.JointPolicy]
    :rtype: PropertyResult
    """
    c_p = constants["c_p"]
    rho = constants["varrho"]
    worst = -np.inf
    for policy in probes:
        matrix = induced_state_chain(game, policy).get_state_matrix()
        nu = stationary_distribution(matrix)
        power = np.eye(matrix.shape[0])
        for t in range(1, t_max + 1):
            power = power @ matrix
            lhs = float(np.max(np.abs(power - nu).sum(axis=1)))
            worst = max(worst, _violation(lhs, c_p * rho**t))
    worst = 0.0 if len(probes) == 0 else max(worst, 0.0)
    informational = not constants.is_exact(["gamma", "kappa_0"])
    return PropertyResult("mixing", game.get_game_id(), len(probes), worst, 0.0, informational=informational,
                          details={"t_max": t_max})


def check_span_bound(game, constants, probes):
    """``||Q_i^pi||_inf <= C_p kappa_0`` on every probe policy and agent."""
    bound = constants["c_p"] * constants["kappa_0"]
    worst = 0.0
    for policy in probes:
        report = OracleReport(game, policy)
        for agent in range(game.get_num_agents()):
            worst = max(worst, _violation(np.max(np.abs(report.get_q(agent))), bound))
    informational = not constants.is_exact(["gamma", "kappa_0"])
    return PropertyResult("span_bound", game.get_game_id(), len(probes), worst, 0.0, informational=informational,
                          details={"bound": bound})


def check_fundamental_bound(game, constants):
    """``kappa_1 <= 1 + C_p varrho / (1 - varrho)`` and ``D <= 1 / (1 - Gamma)``."""
    rho = constants["varrho"]
    kappa_1_bound = 1.0 + constants["c_p"] * rho / (1.0 - rho)
    mismatch_bound = 1.0 / (1.0 - constants["gamma"])
    details = {
        "kappa_1": _violation(constants["kappa_1"], kappa_1_bound),
        "d": _violation(constants["d"], mismatch_bound),
    }
    informational = not constants.is_exact(["gamma", "kappa_0", "kappa_1", "d"])
    return PropertyResult("fundamental_bound", game.get_game_id(), constants.get_num_probes(),
                          max(0.0, max(details.values())), 0.0, informational=informational, details=details)


def check_potential_identity(game, num_probes=100, seed=0):
    """
    ``rho_i(pi_i', pi_-i) - rho_i(pi) = Phi(pi_i', pi_-i) - Phi(pi)`` on random unilateral deviations.

    :raises UnsupportedStructureError: If the game has no certified potential.
    """
    if not game.is_potential_certified():
        raise UnsupportedStructureError(f"Game {game.get_game_id()} has no certified potential.")
    rng = _make_rng(seed)
    worst = 0.0
    for _ in range(num_probes):
        policy = probe_policy(rng, game)
        i = int(rng.integers(game.get_num_agents()))
        deviated = policy.replace(i, probe_policy(rng, game)[i])
        gain_change = average_reward(game, deviated, i) - average_reward(game, policy, i)
        potential_change = potential_value(game, deviated) - potential_value(game, policy)
        worst = max(worst, abs(gain_change - potential_change))
    return PropertyResult("potential_identity", game.get_game_id(), num_probes, worst, IDENTITY_TOLERANCE)


def check_npg_monotone(game, rate, num_iterations, tolerance=IDENTITY_TOLERANCE):
    """
    Monotone improvement of natural policy gradient from the uniform policy.

    At every step ``Phi(pi+) - Phi(pi) >= (1/beta) sum_i E log Z_i >= 0``,
    the expectation under ``nu`` of ``(pi_i+, pi_-i)``. With ``beta = 0``
    both sides are zero.

    :param rate: Step size, schedule or ``LearningRateRule``.
    :rtype: PropertyResult
    """
    schedule = as_schedule(rate)
    policy = JointPolicy.uniform(game.get_num_states(), game.get_action_counts())
    worst = {"improvement": 0.0, "normalizer": 0.0}
    phi = potential_value(game, policy)
    for t in range(num_iterations):
        beta = schedule(t)
        updated, normalizers = npg_step(game, policy, beta)
        updated_phi = potential_value(game, updated)
        bound = 0.0
        if beta > 0:
            for agent in range(len(policy)):
                unilateral = policy.replace(agent, updated[agent])
                nu = stationary_distribution(induced_state_chain(game, unilateral))
                bound += float(nu @ np.log(normalizers[agent]))
            bound /= beta
        worst["improvement"] = max(worst["improvement"], _violation(bound, updated_phi - phi))
        worst["normalizer"] = max(worst["normalizer"], -bound)
        logger.log(LOG_LEVEL_TRACE, f"NPG step {t}: phi {phi} -> {updated_phi}, bound {bound}")
        policy, phi = updated, updated_phi

    informational = False
    if isinstance(schedule, LearningRateRule) and schedule.get_provenance() is not None:
        informational = any(flag != EXACT for flag in schedule.get_provenance().values())
    return PropertyResult("npg_monotone", game.get_game_id(), num_iterations, max(worst.values()), tolerance,
                          informational=informational, details=worst)


def _flat_gradient(game, policy):
    return np.concatenate([block.ravel() for block in potential_gradient(game, policy)])


def check_smoothness(game, constants, num_probes=50, distance=1e-3, seed=0):
    """
    Lipschitz gradients on random nearby pairs.

    Checks ``||grad Phi(pi) - grad Phi(pi')||_2 <= L_Phi ||pi - pi'||_2`` for
    joint perturbations and ``||grad_i rho_i(pi) - grad_i rho_i(pi_i', pi_-i)||_2
    <= L ||pi_i - pi_i'||_2`` for unilateral ones. Identical policies give
    ratio 0.

    :rtype: PropertyResult
    """
    if not game.is_potential_certified():
        raise UnsupportedStructureError(f"Game {game.get_game_id()} has no certified potential.")
    rng = _make_rng(seed)
    worst = {"potential": 0.0, "agent": 0.0}
    for _ in range(num_probes):
        policy = probe_policy(rng, game)
        if distance > 0:
            directions = [tangent_direction(rng, m.shape) for m in policy]
            total = np.sqrt(sum(np.sum(d**2) for d in directions))
            other = JointPolicy([m + distance * d / total for m, d in zip(policy, directions)])
        else:
            other = policy
        shift = np.sqrt(sum(np.sum((a - b) ** 2) for a, b in zip(policy, other)))
        if shift == 0:
            continue
        ratio = np.linalg.norm(_flat_gradient(game, policy) - _flat_gradient(game, other)) / shift
        worst["potential"] = max(worst["potential"], _violation(ratio, constants["l_phi"]))

        agent = int(rng.integers(game.get_num_agents()))
        unilateral = policy.replace(agent, other[agent])
        agent_shift = np.linalg.norm(policy[agent] - other[agent])
        if agent_shift > 0:
            before = OracleReport(game, policy).get_gradient(agent)
            after = OracleReport(game, unilateral).get_gradient(agent)
            worst["agent"] = max(worst["agent"], _violation(np.linalg.norm(before - after) / agent_shift, constants["l"]))
    informational = not constants.is_exact(["kappa_0"])
    return PropertyResult("smoothness", game.get_game_id(), num_probes, max(worst.values()), 0.0,
                          informational=informational, details=worst)


def run_suite(game, suite="fast", seed=0, constants=None, show_progress=False):
    """
    Runs every applicable check on one game.

    The ``fast`` suite uses 20 probes and 50 natural gradient steps; ``full``
    uses 100 probes and 500 steps. Potential checks run only on
    potential-certified games.

    :param constants: Precomputed constants; estimated when omitted.
    :type constants: ampg.oracle.GameConstants or None
    :rtype: list[PropertyResult]
    """
    if suite not in SUITES:
        raise ValueError(f"Unknown suite '{suite}'. Expected one of {SUITES}.")
    num_probes, npg_iterations = (20, 50) if suite == "fast" else (100, 500)
    constants = estimate_constants(game, seed=seed) if constants is None else constants
    probes = [probe_policy(_make_rng(seed + k), game) for k in range(num_probes)]

    checks = [
        lambda: check_performance_difference(game, num_probes, seed),
        lambda: check_gradient(game, num_probes, seed=seed),
        lambda: check_sensitivity(game, constants, num_probes, seed),
        lambda: check_mixing(game, constants, probes),
        lambda: check_span_bound(game, constants, probes),
        lambda: check_fundamental_bound(game, constants),
    ]
    if game.is_potential_certified():
        checks.extend([
            lambda: check_potential_identity(game, num_probes, seed),
            lambda: check_smoothness(game, constants, num_probes, seed=seed),
            lambda: check_npg_monotone(game, LearningRateRule("npg_theorem4", constants=constants), npg_iterations),
        ])

    results = []
    prog_bar = ProgressBar(total=len(checks), label="Verifying") if show_progress else None
    for check in checks:
        result = check()
        logger.debug(f"{result}")
        results.append(result)
        if prog_bar is not None:
            prog_bar.step()
    return results


def has_hard_failure(results):
    return any(result.is_hard_failure() for result in results)


def format_table(results):
    """Plain-text table with one row per check."""
    header = f"{'property':<24}{'verdict':<9}{'max violation':>16}{'tolerance':>12}{'probes':>8}"
    lines = [header, "-" * len(header)]
    for result in results:
        lines.append(f"{result.property_id:<24}{result.get_verdict():<9}{result.max_violation:>16.3e}"
                     f"{result.tolerance:>12.1e}{result.num_probes:>8d}")
    return "\n".join(lines)


def results_to_json(results):
    return json.dumps([result.to_dict() for result in results], indent=2)
