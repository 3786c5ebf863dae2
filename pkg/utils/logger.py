"""
Logging System for the spectral series toolkit
Colored console output, plain and JSON log files, and a performance log
"""

import logging
import sys
import json
import time
from datetime import datetime
from pathlib import Path
from typing import Dict, Optional

from colorama import Fore, Style, just_fix_windows_console

just_fix_windows_console()


class ColoredFormatter(logging.Formatter):
    """Formatter with per-level and per-component colors"""

    LEVEL_COLORS = {
        'DEBUG': Style.DIM + Fore.WHITE,
        'INFO': Fore.LIGHTGREEN_EX,
        'WARNING': Fore.LIGHTYELLOW_EX,
        'ERROR': Fore.LIGHTRED_EX,
        'CRITICAL': Fore.LIGHTMAGENTA_EX + Style.BRIGHT
    }

    COMPONENT_COLORS = {
        'spectral_main': Fore.LIGHTCYAN_EX,
        'kernels': Fore.LIGHTBLUE_EX,
        'spectral_basis': Fore.BLUE,
        'ratio': Fore.LIGHTGREEN_EX,
        'likelihood': Fore.LIGHTMAGENTA_EX,
        'simulators': Fore.LIGHTYELLOW_EX,
        'evaluation': Fore.CYAN,
        'persistence': Fore.GREEN,
        'config_manager': Fore.WHITE
    }

    def __init__(self, use_colors=True):
        super().__init__()
        self.use_colors = use_colors and sys.stdout.isatty()

    def format(self, record):
        if not self.use_colors:
            return self._format_plain(record)

        level_color = self.LEVEL_COLORS.get(record.levelname, Fore.WHITE)
        component_name = record.name.split('.')[-1]
        component_color = self.COMPONENT_COLORS.get(component_name, Fore.WHITE)

        timestamp = datetime.fromtimestamp(record.created).strftime('%H:%M:%S.%f')[:-3]
        timestamp_colored = f"{Style.DIM}{timestamp}{Style.RESET_ALL}"
        level_colored = f"{level_color}{record.levelname:8}{Style.RESET_ALL}"
        component_colored = f"{component_color}{component_name:15}{Style.RESET_ALL}"

        message = record.getMessage()
        if record.levelno == logging.DEBUG:
            message = f"{message} {Style.DIM}({record.filename}:{record.lineno}){Style.RESET_ALL}"

        formatted = f"{timestamp_colored} │ {level_colored} │ {component_colored} │ {message}"

        if record.exc_info:
            formatted += f"\n{Fore.RED}{self.formatException(record.exc_info)}{Style.RESET_ALL}"

        return formatted

    def _format_plain(self, record):
        """Format without colors for file output"""
        timestamp = datetime.fromtimestamp(record.created).strftime('%Y-%m-%d %H:%M:%S.%f')[:-3]
        component_name = record.name.split('.')[-1]

        formatted = f"{timestamp} | {record.levelname:8} | {component_name:15} | {record.getMessage()}"

        if record.exc_info:
            formatted += f"\n{self.formatException(record.exc_info)}"

        return formatted


class JSONFormatter(logging.Formatter):
    """JSON-lines formatter for structured logging"""

    def format(self, record):
        log_entry = {
            'timestamp': datetime.fromtimestamp(record.created).isoformat(),
            'level': record.levelname,
            'component': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno
        }

        if record.exc_info:
            log_entry['exception'] = self.formatException(record.exc_info)

        return json.dumps(log_entry, ensure_ascii=False)


class AdvancedLogger:
    """
    Owns the handler setup for every named logger.
    File handlers are attached only once a log directory is configured.
    """

    ROOT_NAME = 'spectral'

    def __init__(self):
        self.log_dir: Optional[Path] = None
        self.level = logging.INFO
        self.loggers: Dict[str, logging.Logger] = {}

    @property
    def performance_log_file(self) -> Optional[Path]:
        return self.log_dir / "performance.log" if self.log_dir else None

    def configure(self, level: int = logging.INFO, log_dir: Optional[Path] = None) -> logging.Logger:
        """Attach console and (optionally) file handlers to the package root logger"""
        log_dir = Path(log_dir) if log_dir is not None else None
        if log_dir is not None:
            log_dir.mkdir(parents=True, exist_ok=True)
        self.level = level
        self.log_dir = log_dir

        root = logging.getLogger(self.ROOT_NAME)
        root.setLevel(logging.DEBUG)
        for handler in list(root.handlers):
            handler.close()
        root.handlers.clear()

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(level)
        console_handler.setFormatter(ColoredFormatter(use_colors=True))
        root.addHandler(console_handler)

        if self.log_dir is not None:
            file_handler = logging.FileHandler(self.log_dir / "spectral.log", encoding='utf-8')
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(ColoredFormatter(use_colors=False))
            root.addHandler(file_handler)

            error_handler = logging.FileHandler(self.log_dir / "spectral_errors.log", encoding='utf-8')
            error_handler.setLevel(logging.ERROR)
            error_handler.setFormatter(ColoredFormatter(use_colors=False))
            root.addHandler(error_handler)

            json_handler = logging.FileHandler(self.log_dir / "spectral.json", encoding='utf-8')
            json_handler.setLevel(logging.INFO)
            json_handler.setFormatter(JSONFormatter())
            root.addHandler(json_handler)

        root.propagate = False
        self.loggers[self.ROOT_NAME] = root
        return root

    def get_logger(self, name: str) -> logging.Logger:
        """Child of the package root logger, named after the last module component"""
        if name not in self.loggers:
            short = name.split('.')[-1]
            self.loggers[name] = logging.getLogger(f"{self.ROOT_NAME}.{short}")
        return self.loggers[name]

    def log_performance(self, component: str, operation: str, duration: float, details: dict = None):
        """Append one JSON line per timed stage; no-op without a log directory"""
        if self.performance_log_file is None:
            return
        performance_data = {
            'timestamp': datetime.now().isoformat(),
            'component': component,
            'operation': operation,
            'duration_ms': round(duration * 1000, 2),
            'details': details or {}
        }
        try:
            with open(self.performance_log_file, 'a', encoding='utf-8') as f:
                f.write(json.dumps(performance_data, ensure_ascii=False, default=str) + '\n')
        except OSError as e:
            self.get_logger(__name__).warning(f"Could not write performance log: {e}")

    def cleanup_old_logs(self, days: int = 7) -> int:
        """Delete log files older than `days`; returns the number removed"""
        if self.log_dir is None:
            return 0
        cutoff_time = time.time() - days * 24 * 60 * 60
        removed = 0
        for log_file in self.log_dir.glob("*.log*"):
            if log_file.stat().st_mtime < cutoff_time:
                log_file.unlink()
                removed += 1
        return removed

    def get_log_stats(self) -> dict:
        if self.log_dir is None:
            return {'log_directory': None, 'log_files': [], 'total_size_mb': 0}

        stats = {'log_directory': str(self.log_dir), 'log_files': [], 'total_size_mb': 0.0}
        for log_file in sorted(self.log_dir.glob("*")):
            file_size = log_file.stat().st_size
            stats['log_files'].append({
                'name': log_file.name,
                'size_mb': round(file_size / 1024 / 1024, 4),
                'modified': datetime.fromtimestamp(log_file.stat().st_mtime).isoformat()
            })
            stats['total_size_mb'] += file_size / 1024 / 1024
        stats['total_size_mb'] = round(stats['total_size_mb'], 4)
        return stats


# Global logger instance
_logger_instance = AdvancedLogger()


def setup_advanced_logger(level: int = logging.INFO, log_dir: Optional[Path] = None) -> logging.Logger:
    """Configure handlers (main entry point, called once by the CLI)"""
    return _logger_instance.configure(level, log_dir)


def get_logger(name: str) -> logging.Logger:
    return _logger_instance.get_logger(name)


def log_performance(component: str, operation: str, duration: float, details: dict = None):
    _logger_instance.log_performance(component, operation, duration, details)


def cleanup_logs(days: int = 7) -> int:
    return _logger_instance.cleanup_old_logs(days)


def get_log_stats() -> dict:
    return _logger_instance.get_log_stats()
