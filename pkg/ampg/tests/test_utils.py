from ampg.utils import *
from ampg.algorithms import RunTrace
from ampg.tests.test_cases import *
from io import StringIO
import pytest

LOGGER_HEADER_NUM_LINES = 2


def test_timestamp():
    """get_time_stamp() returns a string."""
    assert type(get_time_stamp()) == str


def test_version():
    """get_version() returns a string."""
    assert type(get_version()) == str


@pytest.fixture(scope="session")
def log_output_dir(tmp_path_factory):
    """Session-scoped temp directory for log file output."""
    return tmp_path_factory.mktemp("log_data")


def test_resolve_log_level(monkeypatch):
    """Verbose wins, then an explicit level, then AMPG_LOG, then DEBUG."""
    monkeypatch.delenv(LOG_ENV_VAR, raising=False)
    assert resolve_log_level() == logging.DEBUG
    assert resolve_log_level(verbose=True, level="error") == LOG_LEVEL_TRACE
    assert resolve_log_level(level="WARN") == logging.WARNING
    assert resolve_log_level(level=logging.INFO) == logging.INFO
    monkeypatch.setenv(LOG_ENV_VAR, "info")
    assert resolve_log_level() == logging.INFO
    assert resolve_log_level(level="trace") == LOG_LEVEL_TRACE
    with pytest.raises(ValueError):
        resolve_log_level(level="loud")


def test_logging(log_output_dir, monkeypatch):
    """Non-verbose mode suppresses trace messages; verbose mode includes them; both emit exactly two header lines on init."""
    monkeypatch.delenv(LOG_ENV_VAR, raising=False)
    logger = logging.getLogger("ampg")

    enable_logging(verbose=False, output_path=f"{log_output_dir}/log_header.txt")

    with open(f"{log_output_dir}/log_header.txt") as f:
        assert len(f.readlines()) == LOGGER_HEADER_NUM_LINES

    enable_logging(verbose=False, output_path=f"{log_output_dir}/non_verbose.txt")

    logger.debug("test")
    logger.info("test")
    logger.warning("test")
    logger.log(LOG_LEVEL_TRACE, "test")

    with open(f"{log_output_dir}/non_verbose.txt") as f:
        assert len(f.readlines()) == LOGGER_HEADER_NUM_LINES + 3

    enable_logging(verbose=True, output_path=f"{log_output_dir}/verbose.txt")

    logger.debug("test")
    logger.info("test")
    logger.warning("test")
    logger.log(LOG_LEVEL_TRACE, "test")

    with open(f"{log_output_dir}/verbose.txt") as f:
        assert len(f.readlines()) == LOGGER_HEADER_NUM_LINES + 4


def test_game_info_logger(manual_game, log_output_dir):
    enable_logging(verbose=True, output_path=f"{log_output_dir}/game_logger.txt")
    log_game_info(manual_game)

    with open(f"{log_output_dir}/game_logger.txt") as f:
        lines = f.readlines()
    assert any("Game Info" in line for line in lines)
    assert any(manual_game.get_game_id() in line for line in lines)


def test_trace_info_logger(log_output_dir):
    enable_logging(verbose=True, output_path=f"{log_output_dir}/trace_logger.txt")
    log_trace_info(RunTrace("pg", seed=2))
    trace = RunTrace("npg", seed=3)
    trace.add_record(0, 0.5, 0.25, 0.5, 1.0)
    log_trace_info(trace)

    with open(f"{log_output_dir}/trace_logger.txt") as f:
        text = f.read()
    assert text.count("Run Info") == 2
    assert "No records." in text
    assert "Final Nash gap: 0.25" in text


def test_progress_bar():
    """The bar starts at zero, counts steps and ends with a newline."""
    stream = StringIO()
    prog_bar = ProgressBar(total=2, length=10, label="probes", stream=stream)
    assert "0/2" in stream.getvalue()
    prog_bar.step()
    prog_bar.step()
    output = stream.getvalue()
    assert "2/2" in output
    assert "100.00%" in output
    assert output.endswith("\n")
