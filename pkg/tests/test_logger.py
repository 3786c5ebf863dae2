"""Tests for logger setup and the performance log."""

import json
import logging

import pytest

from utils.logger import ColoredFormatter, JSONFormatter, get_log_stats, get_logger, log_performance, \
    setup_advanced_logger


def make_record(message='hello', level=logging.INFO):
    return logging.LogRecord('spectral.ratio', level, __file__, 10, message, None, None)


def test_child_loggers_share_package_root():
    assert get_logger('core.ratio').name == 'spectral.ratio'
    assert get_logger('core.ratio') is get_logger('core.ratio')


def test_console_only_without_log_dir():
    root = setup_advanced_logger(logging.WARNING)
    assert len(root.handlers) == 1
    assert root.handlers[0].level == logging.WARNING
    assert get_log_stats()['log_directory'] is None


def test_file_handlers_with_log_dir(tmp_path):
    root = setup_advanced_logger(logging.INFO, tmp_path / 'logs')
    get_logger('core.evaluation').info('study finished')
    for handler in root.handlers:
        handler.flush()
    assert 'study finished' in (tmp_path / 'logs' / 'spectral.log').read_text()
    line = (tmp_path / 'logs' / 'spectral.json').read_text().strip().splitlines()[-1]
    assert json.loads(line)['message'] == 'study finished'


def test_reconfigure_drops_file_handlers(tmp_path):
    setup_advanced_logger(logging.INFO, tmp_path / 'logs')
    root = setup_advanced_logger(logging.INFO)
    assert len(root.handlers) == 1


def test_failed_log_dir_keeps_previous_setup(tmp_path):
    setup_advanced_logger(logging.INFO, tmp_path / 'logs')
    blocker = tmp_path / 'file'
    blocker.write_text('')
    with pytest.raises(OSError):
        setup_advanced_logger(logging.DEBUG, blocker / 'logs')
    assert get_log_stats()['log_directory'] == str(tmp_path / 'logs')


def test_performance_log_lines(tmp_path):
    setup_advanced_logger(logging.INFO, tmp_path)
    log_performance('ratio', 'select', 0.25, {'grid': 5})
    entry = json.loads((tmp_path / 'performance.log').read_text().strip())
    assert entry['duration_ms'] == 250.0
    assert entry['details'] == {'grid': 5}


def test_performance_log_is_noop_without_dir(tmp_path):
    setup_advanced_logger(logging.INFO)
    log_performance('ratio', 'select', 0.1)
    assert not (tmp_path / 'performance.log').exists()


def test_plain_format_has_component():
    text = ColoredFormatter(use_colors=False).format(make_record())
    assert '| INFO' in text and 'ratio' in text and text.endswith('hello')


def test_json_format_fields():
    entry = json.loads(JSONFormatter().format(make_record('x', logging.WARNING)))
    assert entry['level'] == 'WARNING'
    assert entry['component'] == 'spectral.ratio'
