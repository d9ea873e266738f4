#!/usr/bin/env python
"""
harness.py

Experiment orchestration: seed fan-out over a worker pool, per-seed CSV
traces, aggregated summaries, reference policies and step-size sweeps.

Last Header Update: 10/18/26
"""
import numpy as np
import os
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from ampg.game import JointPolicy
from ampg.oracle import OracleCache, nash_gap
from ampg.algorithms import ORACLE_ALGORITHMS, run_oracle_algorithm, npg_step
from ampg.sampling import run_sampled_pg, run_sampled_proxq
from ampg.meta import write_json, format_float
from ampg.errors import NoConvergenceError
from ampg.utils import ProgressBar, log_game_info, log_trace_info

logger = logging.getLogger(__name__)

SUMMARY_METRICS = ("nash_gap", "phi", "l1_distance")


def reference_policy(game, warm_start=None, tolerance=1e-10, max_iters=10**6, beta=1.0, check_every=100):
    """
    Runs oracle natural policy gradient until the Nash gap is at most ``tolerance``.

    A warm start that already meets the tolerance is returned unchanged.

    :param warm_start: Starting joint policy (uniform by default).
    :type warm_start: ampg.game.JointPolicy or None
    :param beta: Natural gradient step size.
    :type beta: float
    :param check_every: Iterations between Nash-gap evaluations.
    :type check_every: int
    :returns: ``(policy, gap)``.
    :rtype: tuple[ampg.game.JointPolicy, float]
    :raises NoConvergenceError: If the gap is still above ``tolerance`` after ``max_iters`` iterations.
    """
    policy = JointPolicy.uniform(game.get_num_states(), game.get_action_counts()) if warm_start is None else warm_start
    gap, _ = nash_gap(game, policy)
    if gap <= tolerance:
        return policy, gap

    cache = OracleCache(max_size=2)
    for iteration in range(1, max_iters + 1):
        policy, _ = npg_step(game, policy, beta, cache=cache)
        if iteration % check_every == 0 or iteration == max_iters:
            gap, _ = nash_gap(game, policy)
            logger.debug(f"Reference policy search on game {game.get_game_id()}: gap {gap:.3e} at iteration {iteration}.")
            if gap <= tolerance:
                return policy, gap
    raise NoConvergenceError(f"Natural policy gradient left a Nash gap of {gap:.3e} > {tolerance} after {max_iters} iterations.")


def run_seed(game, algorithm, num_iterations, rate, params, seed, eval_period, reference=None, csv_path=None):
    """
    Runs one seed of an experiment and optionally writes its CSV trace.

    Worker entry point; every argument is picklable.

    :rtype: ampg.algorithms.RunTrace
    """
    if algorithm in ORACLE_ALGORITHMS:
        trace = run_oracle_algorithm(game, algorithm, num_iterations, rate, eval_period=eval_period, seed=seed)
    elif algorithm == "sampled_pg":
        trace = run_sampled_pg(game, num_iterations, rate, params.K, params.N1, params.N2, params.alpha, seed,
                               eval_period=eval_period, reference=reference)
    elif algorithm == "sampled_proxq":
        trace = run_sampled_proxq(game, num_iterations, rate, params.B, params.N1, params.alpha, seed,
                                  eval_period=eval_period, reference=reference)
    else:
        raise ValueError(f"Unknown algorithm '{algorithm}'.")
    if csv_path is not None:
        trace.write_csv(csv_path)
    return trace


def summarize_traces(traces):
    """
    Per-iteration mean and standard deviation of every recorded metric.

    Only iterations present in every trace are aggregated.

    :rtype: dict
    """
    if len(traces) == 0:
        return {"t": []}
    common = set(traces[0].get_column("t").astype(int)) if len(traces[0]) > 0 else set()
    for trace in traces[1:]:
        common &= set(trace.get_column("t").astype(int))
    iterations = sorted(common)
    summary = {"t": iterations}
    for metric in SUMMARY_METRICS:
        columns = []
        for trace in traces:
            lookup = {record["t"]: record.get(metric, np.nan) for record in trace}
            columns.append([lookup[t] for t in iterations])
        values = np.array(columns, dtype=np.float64)
        if metric == "l1_distance" and np.all(np.isnan(values)):
            continue
        summary[f"{metric}_mean"] = values.mean(axis=0) if len(iterations) > 0 else np.array([])
        summary[f"{metric}_std"] = values.std(axis=0) if len(iterations) > 0 else np.array([])
    regrets = np.array([trace.nash_regret_star() for trace in traces])
    summary["nash_regret"] = float(np.mean([trace.nash_regret() for trace in traces]))
    summary["nash_regret_star"] = float(regrets.mean())
    summary["regret_exact"] = all(trace.is_regret_exact() for trace in traces)
    return summary


def run_experiment(config, num_processes=None, raise_errors=False, show_progress=True):
    """
    Runs an experiment over all its seeds.

    Writes ``<output_dir>/<name>/seed-<k>.csv`` per seed and ``summary.json``
    with per-iteration means and standard deviations. Failed or aborted runs
    go to ``errors.json``; completed traces are kept.

    :param config: Validated experiment configuration.
    :type config: ampg.configs.config.ExperimentConfig
    :param num_processes: Worker count (defaults to ``config.num_processes``).
    :type num_processes: int or None
    :param raise_errors: Re-raise the first worker error.
    :type raise_errors: bool
    :returns: Summary dictionary (also written to ``summary.json``).
    :rtype: dict
    """
    config.validate()
    game = config.load_game()
    log_game_info(game)
    rate = config.get_rate(game)
    params = config.get_estimator_params()
    seeds = config.get_seeds()
    output_path = config.get_output_path()
    os.makedirs(output_path, exist_ok=True)

    reference = None
    if config.reference:
        reference, reference_gap = reference_policy(game)
        logger.info(f"Reference policy reached Nash gap {reference_gap:.3e}.")

    num_processes = config.num_processes if num_processes is None else num_processes
    traces = {}
    errors = []
    with ProcessPoolExecutor(max_workers=num_processes) as executor:
        futures = {
            executor.submit(run_seed, game, config.algorithm, config.get_num_iterations(), rate, params, seed,
                            config.get_eval_period(), reference, os.path.join(output_path, f"seed-{seed}.csv")): seed
            for seed in seeds
        }
        prog_bar = ProgressBar(total=len(futures), label=f"Running {config.name}") if show_progress else None
        for future in as_completed(futures):
            seed = futures[future]
            try:
                trace = future.result()
                traces[seed] = trace
                log_trace_info(trace)
                if trace.get_status() != "completed":
                    errors.append({"seed": seed, "error_type": "Aborted", "message": trace.get_status()})
            except Exception as exc:
                logger.warning(f"Run of {config.name} with seed {seed} failed: {exc}", exc_info=True)
                errors.append({"seed": seed, "error_type": type(exc).__name__, "message": str(exc)})
                if raise_errors:
                    raise
            finally:
                if prog_bar is not None:
                    prog_bar.step()

    ordered = [traces[seed] for seed in seeds if seed in traces]
    summary = {
        "name": config.name,
        "algorithm": config.algorithm,
        "game_id": game.get_game_id(),
        "seeds": seeds,
        "rate_rule": rate.get_rule(),
        "beta_0": rate(0),
        "provenance": rate.get_provenance(),
        "estimator": params.to_dict(),
        "num_failures": len(errors),
        "runs": [trace.summary() for trace in ordered],
    }
    summary.update(summarize_traces(ordered))
    write_json(summary, os.path.join(output_path, "summary.json"))
    if len(errors) > 0:
        write_json(sorted(errors, key=lambda e: e["seed"]), os.path.join(output_path, "errors.json"))
    logger.info(f"Experiment {config.name}: {len(ordered)} runs, {len(errors)} failures, output in '{output_path}'.")
    return summary


def rate_sweep(config, betas, num_processes=None, raise_errors=False):
    """
    Repeats an experiment with each constant step size in ``betas``.

    Each run writes under ``<name>-beta-<beta>``. The best step size is the
    one with the smallest mean final Nash gap.

    :returns: ``{"runs": {beta: summary}, "best_beta": beta}``.
    :rtype: dict
    """
    if len(betas) == 0:
        raise ValueError("A rate sweep needs at least one step size.")
    runs = {}
    for beta in betas:
        swept = config.copy(rate={"rule": "manual", "beta": format_float(beta)},
                            name=f"{config.name}-beta-{format_float(beta)}")
        runs[float(beta)] = run_experiment(swept, num_processes=num_processes, raise_errors=raise_errors)

    def final_gap(summary):
        means = summary.get("nash_gap_mean", [])
        return float(means[-1]) if len(means) > 0 else np.inf

    best = min(runs, key=lambda beta: final_gap(runs[beta]))
    logger.info(f"Rate sweep of {config.name}: best beta {best} (final mean Nash gap {final_gap(runs[best]):.3e}).")
    return {"runs": runs, "best_beta": best}
