import logging

from rigidlab.utils.logger import LogUtil

logger = logging.getLogger("rigidlab.test")


def test_log_execution_reports_failures(caplog):
    with caplog.at_level(logging.INFO, logger="rigidlab.test"):
        LogUtil.log_execution(
            logger,
            {"experiment": "e", "item": "a"},
            {"success": False, "message": "item raised", "error": "boom"},
        )
    assert '"error": "boom"' in caplog.text
    assert '"item": "a"' in caplog.text


def test_log_array_summary(caplog):
    with caplog.at_level(logging.DEBUG, logger="rigidlab.test"):
        LogUtil.log_array(logger, "values", [[1.0, -2.0], [3.0, 0.5]])
        LogUtil.log_array(logger, "nothing", [])
    assert "values: shape=(2, 2) min=-2 max=3" in caplog.text
    assert "nothing: empty" in caplog.text


def test_log_array_is_silent_above_its_level(caplog):
    with caplog.at_level(logging.WARNING, logger="rigidlab.test"):
        LogUtil.log_array(logger, "values", [1.0])
    assert caplog.text == ""
