import argparse
import sys
import os
import json
from ampg.utils import get_version, enable_logging, log_game_info, LOG_ENV_VAR


def parse_arguments():
    """
    Parses command-line arguments for the ``run_ampg`` entry point.

    Global arguments:

    - ``-v`` / ``--verbose``: Print the active settings and enable trace logging.
    - ``-V`` / ``--version``: Print the installed ``ampg`` version and exit.
    - ``--log-file``: Also write log output to this file.

    Subcommands:

    - ``generate``: Build a game from a generator spec (``--spec``) or a fixture (``--fixture``) and write it to ``--out``.
    - ``run``: Run the experiment in ``--config``; ``--seeds``, ``--threads``, ``--eval-every`` and ``--out`` override it, ``--sweep`` repeats it per step size.
    - ``verify``: Run the property suite on ``--game`` and print the table; exit code 1 on a hard failure.
    - ``gap``: Nash gap of ``--policy`` (uniform if omitted) in ``--game``.
    - ``constants``: Estimate the structural constants of ``--game``.

    :returns: Namespace object populated with parsed argument values.
    :rtype: argparse.Namespace
    """
    parser = argparse.ArgumentParser(
        description="AMPG: policy optimization for average-reward Markov potential games."
    )
    parser.add_argument(
        "-v", "--verbose",
        action="store_true",
        help="Enable verbose output."
    )
    parser.add_argument(
        "-V", "--version",
        action="version",
        version=f"%(prog)s {get_version()}"
    )
    parser.add_argument(
        "--log-file",
        type=str,
        default=None,
        help="Additionally write log messages to this file."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    generate = subparsers.add_parser("generate", help="Generate a game file.")
    source = generate.add_mutually_exclusive_group(required=True)
    source.add_argument("--spec", type=str, help="Generator spec JSON file.")
    source.add_argument("--fixture", type=str, choices=["manual"], help="Built-in fixture to write instead.")
    generate.add_argument(
        "--condition",
        type=str,
        default=None,
        help="Build a structured potential game satisfying this condition ('1' or '2-cooperative')."
    )
    generate.add_argument("--out", type=str, required=True, help="Output game file.")

    run = subparsers.add_parser("run", help="Run an experiment.")
    run.add_argument("--config", type=str, required=True, help="Experiment config JSON file.")
    run.add_argument("--out", type=str, default=None, help="Output directory. (Default from config)")
    run.add_argument("--seeds", type=str, default=None, help="Comma-separated seed list, e.g. '0,1,2'.")
    run.add_argument("--threads", type=int, default=None, help="Number of worker processes. (Default from config)")
    run.add_argument("--eval-every", type=int, default=None, help="Iterations between oracle evaluations.")
    run.add_argument("--sweep", type=str, default=None, help="Comma-separated constant step sizes to sweep.")

    verify = subparsers.add_parser("verify", help="Run the property suite on a game.")
    verify.add_argument("--game", type=str, required=True, help="Game file.")
    verify.add_argument("--suite", type=str, choices=["fast", "full"], default="fast", help="Suite size. (Default fast)")
    verify.add_argument("--out", type=str, default=None, help="Write the JSON report to this file.")
    verify.add_argument("--seed", type=int, default=0, help="Probe seed. (Default 0)")

    gap = subparsers.add_parser("gap", help="Nash gap of a joint policy.")
    gap.add_argument("--game", type=str, required=True, help="Game file.")
    gap.add_argument("--policy", type=str, default=None, help="Policy file. (Default uniform policy)")

    constants = subparsers.add_parser("constants", help="Estimate the structural constants of a game.")
    constants.add_argument("--game", type=str, required=True, help="Game file.")
    constants.add_argument("--budget", type=int, default=64, help="Random probe policies when enumeration is too large. (Default 64)")
    constants.add_argument("--out", type=str, default=None, help="Write the constants to this file.")
    return parser.parse_args()


def _parse_list(value, cast):
    return [cast(item) for item in value.split(",") if item.strip() != ""]


def _generate(args):
    from ampg.generators import GeneratorSpec, generate, make_potential_game, manual_fixture
    from ampg.meta import write_game

    if args.fixture is not None:
        game = manual_fixture()
    else:
        spec = GeneratorSpec.from_json(args.spec)
        game = generate(spec) if args.condition is None else make_potential_game(spec, args.condition)
    write_game(game, args.out)
    log_game_info(game)
    print(f"Wrote game {game.get_game_id()} to '{args.out}'.")
    return 0


def _run(args):
    from ampg.configs.config import ExperimentConfig
    from ampg.harness import run_experiment, rate_sweep

    config = ExperimentConfig.from_json(args.config)
    overrides = {}
    if args.seeds is not None:
        overrides["seeds"] = _parse_list(args.seeds, int)
    if args.threads is not None:
        overrides["num_processes"] = args.threads
    if args.eval_every is not None:
        overrides["eval_period"] = args.eval_every
    if args.out is not None:
        overrides["output_dir"] = args.out
    config = config.copy(**overrides).validate()

    if args.sweep is not None:
        result = rate_sweep(config, _parse_list(args.sweep, float))
        failures = sum(summary["num_failures"] for summary in result["runs"].values())
        print(f"Best step size: {result['best_beta']}")
    else:
        failures = run_experiment(config)["num_failures"]
    return 0 if failures == 0 else 1


def _verify(args):
    from ampg.meta import read_game
    from ampg.verification import run_suite, format_table, results_to_json, has_hard_failure

    game = read_game(args.game)
    results = run_suite(game, suite=args.suite, seed=args.seed, show_progress=True)
    print(format_table(results))
    report = results_to_json(results)
    if args.out is not None:
        with open(args.out, "w") as handle:
            handle.write(report)
    return 1 if has_hard_failure(results) else 0


def _gap(args):
    from ampg.game import JointPolicy
    from ampg.meta import read_game, read_policy
    from ampg.oracle import nash_gap

    game = read_game(args.game)
    if args.policy is None:
        policy = JointPolicy.uniform(game.get_num_states(), game.get_action_counts())
    else:
        policy = read_policy(args.policy)
        policy.check_compatible(game)
    gap, gaps = nash_gap(game, policy)
    print(json.dumps({"nash_gap": gap, "agent_gaps": gaps.tolist()}))
    return 0


def _constants(args):
    from ampg.meta import read_game, write_constants
    from ampg.oracle import estimate_constants

    game = read_game(args.game)
    constants = estimate_constants(game, policy_sample_budget=args.budget)
    if args.out is not None:
        write_constants(constants, args.out)
    print(json.dumps(constants.to_dict(), indent=2))
    return 0


COMMANDS = {
    "generate": _generate,
    "run": _run,
    "verify": _verify,
    "gap": _gap,
    "constants": _constants,
}


def main():
    """
    Entry point for the ``run_ampg`` command-line interface.

    Parses arguments, prints the active settings when ``--verbose`` is set,
    enables logging when ``--verbose``, ``--log-file`` or ``AMPG_LOG`` asks
    for it, then dispatches to the subcommand and exits with
    its status code.
    """
    args = parse_arguments()

    if args.verbose:
        for key, value in sorted(vars(args).items()):
            print(f"  {key:<24}: {value}")
    if args.verbose or args.log_file is not None or os.environ.get(LOG_ENV_VAR):
        enable_logging(verbose=args.verbose, output_path=args.log_file)

    status = COMMANDS[args.command](args)
    sys.exit(status)
