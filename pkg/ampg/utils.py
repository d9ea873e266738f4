#!/usr/bin/env python
"""
utils.py

Last Header Update: 10/18/26
"""
from time import time
from importlib.metadata import version
import logging
import sys
import os
import datetime
import numpy as np

LOG_LEVEL_TRACE = 5
LOG_ENV_VAR = "AMPG_LOG"
LOG_ENV_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
    "trace": LOG_LEVEL_TRACE
}

logging.addLevelName(LOG_LEVEL_TRACE, "TRACE")


def get_time_stamp():
    """
    Returns the current system date and time as a formatted string.

    :returns: Date-time string formatted as ``'YYYY-MM-DD HH:MM'``.
    :rtype: str
    """
    return datetime.datetime.fromtimestamp(time()).strftime('%Y-%m-%d %H:%M')


def get_version():
    """
    Returns the version string of the installed ``ampg`` package.

    :returns: Package version string (e.g. ``'0.3.0'``).
    :rtype: str
    """
    return version('ampg')


def resolve_log_level(verbose=False, level=None):
    """
    Chooses the package log level.

    Precedence: ``verbose`` (trace level), then an explicit ``level``, then
    the ``AMPG_LOG`` environment variable, then ``DEBUG``.

    :param verbose: Enable per-iteration trace messages.
    :type verbose: bool
    :param level: Level name (``'error'``, ``'warn'``, ``'info'``, ``'debug'``) or number.
    :type level: str or int or None
    :returns: Numeric logging level.
    :rtype: int
    :raises ValueError: If the level name is not recognized.
    """
    if verbose:
        return LOG_LEVEL_TRACE
    if level is None:
        level = os.environ.get(LOG_ENV_VAR)
    if level is None or level == "":
        return logging.DEBUG
    if isinstance(level, int):
        return level
    if level.lower() not in LOG_ENV_LEVELS:
        raise ValueError(f"Unknown log level '{level}'. Expected one of {sorted(LOG_ENV_LEVELS)}.")
    return LOG_ENV_LEVELS[level.lower()]


def enable_logging(verbose=False, output_path=None, level=None):
    """
    Configures the ``ampg`` package logger and begins emitting log messages.

    At ``verbose=True``, the log level is ``LOG_LEVEL_TRACE`` (5), which
    includes per-iteration and per-probe traces. Otherwise the level comes
    from ``level`` or the ``AMPG_LOG`` environment variable, defaulting to
    ``DEBUG``. Two header lines (version and logging settings) are logged at
    INFO.

    :param verbose: If ``True``, enable trace messages. Defaults to ``False``.
    :type verbose: bool
    :param output_path: Optional file path to additionally write log output to.
    :type output_path: str or None
    :param level: Optional explicit level overriding ``AMPG_LOG``.
    :type level: str or int or None
    :returns: The configured package logger.
    :rtype: logging.Logger
    """
    logger = logging.getLogger("ampg")

    formatter = logging.Formatter("%(asctime)s [%(levelname)s] %(name)s: %(message)s")
    stdout_handler = logging.StreamHandler(sys.stdout)
    stdout_handler.setFormatter(formatter)

    if output_path:
        file_handler = logging.FileHandler(output_path)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    logger.setLevel(resolve_log_level(verbose, level))
    logger.addHandler(stdout_handler)

    logger.info(f"AMPG version {get_version()}")
    logger.info(f"Logging enabled (verbose={verbose}, level={logging.getLevelName(logger.level)}, output_path={output_path})")
    return logger


class ProgressBar:
    """
    Single-line terminal progress bar for seed fan-out and probe loops.
    """

    def __init__(self, total, length=40, label="", stream=None):
        self.total = max(total, 1)
        self.length = length
        self.label = label
        self.stream = sys.stdout if stream is None else stream
        self.start_time = time()
        self.count = -1
        self.step()

    def step(self):
        """Advances by one item and redraws; writes a newline when finished."""
        self.count += 1
        fraction = min(self.count / self.total, 1.0)
        filled = int(self.length * fraction)
        elapsed = time() - self.start_time
        self.stream.write(
            f"\r [{'#' * filled}{'.' * (self.length - filled)}] {fraction:6.2%} ({self.label}) "
            f"{self.count}/{self.total} {elapsed:6.1f}s"
        )
        self.stream.flush()
        if self.count >= self.total:
            self.stream.write("\n")


def log_game_info(game):
    """
    Logs a summary of a ``MarkovGame`` at INFO level.

    :param game: Game to describe.
    :type game: ampg.game.MarkovGame
    """
    logger = logging.getLogger("ampg")
    rewards = game.get_rewards()
    logger.info(f"=============================================")
    logger.info(f"                 Game Info                   ")
    logger.info(f"=============================================")
    logger.info(f"Game id: {game.get_game_id()}")
    logger.info(f"States: {game.get_num_states()}  Agents: {game.get_num_agents()}  Actions: {game.get_action_counts()}")
    logger.info(f"Joint actions per state: {game.get_num_joint_actions()}")
    logger.info(f"Structure: {game.get_structure_names()}")
    logger.info(f"Reward range: [{np.min(rewards)}, {np.max(rewards)}]")
    logger.info(f"Stored potential: {game.get_potential() is not None}")


def log_trace_info(trace):
    """
    Logs the final record and regret aggregates of a ``RunTrace`` at INFO level.

    :param trace: Finished run trace.
    :type trace: ampg.algorithms.RunTrace
    """
    logger = logging.getLogger("ampg")
    logger.info(f"=============================================")
    logger.info(f"                 Run Info                    ")
    logger.info(f"=============================================")
    logger.info(f"Algorithm: {trace.get_algorithm()}  Seed: {trace.get_seed()}  Status: {trace.get_status()}")
    if len(trace) == 0:
        logger.info("No records.")
        return
    last = trace[-1]
    logger.info(f"Records: {len(trace)}  Last iteration: {last['t']}")
    logger.info(f"Final Nash gap: {last['nash_gap']}  Final potential: {last['phi']}")
    logger.info(f"Nash-Regret: {trace.nash_regret()}  Nash-Regret*: {trace.nash_regret_star()}")
