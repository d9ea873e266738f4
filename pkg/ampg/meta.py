#!/usr/bin/env python
"""
meta.py

JSON (de)serialization for games, policies, oracle reports and constants.
Floats are written as decimal strings with 17 significant digits so that a
write/read cycle reproduces every bit.

Last Header Update: 10/18/26
"""
import numpy as np
import json
import logging
from ampg.game import MarkovGame, JointPolicy, structure_names

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def format_float(value):
    """Decimal string with 17 significant digits (round-trips any float64)."""
    return format(float(value), ".17g")


def parse_float(value):
    """Inverse of :func:`format_float`; plain numbers are accepted too."""
    return float(value)


def encode(value):
    """
    Recursively converts arrays and floats to decimal strings.

    Integers, booleans and strings pass through; dictionaries and sequences
    are walked.
    """
    if isinstance(value, np.ndarray):
        if np.issubdtype(value.dtype, np.integer):
            return value.tolist()
        return encode(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, dict):
        return {key: encode(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(item) for item in value]
    return value


def decode_array(values, shape=None):
    """Parses a (possibly nested) list of decimal strings into a float64 array."""
    array = np.vectorize(parse_float, otypes=[np.float64])(np.array(values, dtype=object))
    if shape is not None:
        array = array.reshape(shape)
    return array


def write_json(data, path):
    """
    Writes ``data`` (after :func:`encode`) as indented JSON.

    :raises OSError: With the path appended when the file cannot be written.
    """
    try:
        with open(path, "w") as handle:
            json.dump(encode(data), handle, indent=2)
    except OSError as exc:
        raise type(exc)(f"{exc} Path: {path}") from exc
    logger.debug(f"Wrote '{path}'.")


def read_json(path):
    """
    Reads a JSON document.

    :raises OSError: With the path appended on I/O failure.
    :raises ValueError: With the path appended on malformed JSON.
    """
    try:
        with open(path, "r") as handle:
            return json.load(handle)
    except OSError as exc:
        raise type(exc)(f"{exc} Path: {path}") from exc
    except ValueError as exc:
        # JSONDecodeError cannot be rebuilt from a message alone
        raise ValueError(f"{exc} Path: {path}") from exc


def game_to_dict(game):
    """
    Document form of a game.

    ``transition`` is flattened row-major in the order
    ``(state, a_1, ..., a_N, next_state)``; ``rewards`` holds one flattened
    ``(state, a_1, ..., a_N)`` list per agent.
    """
    data = {
        "format_version": FORMAT_VERSION,
        "num_states": game.get_num_states(),
        "action_counts": list(game.get_action_counts()),
        "transition": [format_float(x) for x in game.get_transition().ravel()],
        "rewards": [[format_float(x) for x in game.get_rewards(i).ravel()] for i in range(game.get_num_agents())],
        "structure_tag": structure_names(game.get_structure()),
    }
    if game.get_potential() is not None:
        data["potential"] = [format_float(x) for x in game.get_potential().ravel()]
    if game.get_name() is not None:
        data["name"] = game.get_name()
    return data


def game_from_dict(data, check=True):
    """
    Rebuilds a game from :func:`game_to_dict` output.

    :raises ValueError: On missing fields or shape/invariant violations.
    """
    for key in ("num_states", "action_counts", "transition", "rewards"):
        if key not in data:
            raise ValueError(f"Game document is missing field '{key}'.")
    num_states = int(data["num_states"])
    action_counts = tuple(int(n) for n in data["action_counts"])
    transition = decode_array(data["transition"], (num_states,) + action_counts + (num_states,))
    rewards = np.stack([decode_array(r, (num_states,) + action_counts) for r in data["rewards"]])
    potential = None
    if data.get("potential") is not None:
        potential = decode_array(data["potential"], (num_states,) + action_counts)
    return MarkovGame(transition, rewards, structure=data.get("structure_tag", "general"),
                      potential=potential, check=check, name=data.get("name"))


def write_game(game, path):
    write_json(game_to_dict(game), path)


def read_game(path, check=True):
    """Reads a game file; errors carry the path."""
    data = read_json(path)
    try:
        return game_from_dict(data, check=check)
    except (ValueError, KeyError) as exc:
        raise type(exc)(f"{exc} Path: {path}") from exc


def policy_to_list(policy):
    """Per-agent ``S x A_i`` row-major matrices of decimal strings."""
    return [encode(matrix) for matrix in policy]


def policy_from_list(data, check=True):
    return JointPolicy([decode_array(matrix) for matrix in data], check=check)


def write_policy(policy, path):
    write_json(policy_to_list(policy), path)


def read_policy(path):
    data = read_json(path)
    try:
        return policy_from_list(data)
    except ValueError as exc:
        raise type(exc)(f"{exc} Path: {path}") from exc


def report_to_dict(report):
    """Document form of an ``OracleReport`` (decimal strings throughout)."""
    return encode(report.to_dict())


def constants_to_dict(constants):
    return encode(constants.to_dict())


def write_constants(constants, path):
    write_json(constants.to_dict(), path)


def read_constants(path):
    from ampg.oracle import GameConstants
    return GameConstants.from_dict(read_json(path))
