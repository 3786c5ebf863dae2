"""
Configuration Manager for the spectral series toolkit
Nested JSON defaults, user file merge, dot-key access and provenance hashing
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from core.errors import ConfigError
from utils.logger import get_logger

DEFAULT_CONFIG: Dict[str, Any] = {
    'seed': 0,
    'kernel': {
        'family': 'gaussian',
        'eps_grid': None,
        'theta_eps_grid': None,
        'grid_quantiles': [0.05, 0.10, 0.25, 0.50, 0.75],
        'grid_subsample': 1000
    },
    'ratio': {
        'j_max': 50,
        'clip_negative': True,
        'stability_factor': 1.0
    },
    'likelihood': {
        'i_max': 20,
        'j_max': 50,
        'b_permutations': 20,
        'grid_points_per_dim': 50,
        'floor_lik': 1e-300,
        'clip_negative': True,
        'train_fraction': 0.6,
        'stability_factor': 0.0
    },
    'splits': {
        'train': 0.6,
        'validation': 0.2,
        'test': 0.2
    },
    'simulator': {
        'model': 'gaussian_shift',
        'n': 2000,
        'mu': 0.5,
        'dim': 1,
        'n_test': 1000
    },
    'study': {
        'benchmark': 'ratio_gaussian',
        'sizes': [250, 1000, 4000],
        'm_sizes': [1, 5, 10, 25],
        'n_test_thetas': 30,
        'seeds': 10,
        'train_size': 2000,
        'assert_monotone': False
    },
    'output': {
        'out_dir': 'results',
        'standardize': False
    },
    'logging': {
        'level': 'INFO',
        'to_file': True
    }
}


class ConfigManager:
    """
    Configuration Manager
    Defaults merged with an optional JSON file, then with command-line overrides
    """

    def __init__(self, config_file: Optional[str] = None):
        self.logger = get_logger(__name__)
        self.config_file = Path(config_file) if config_file else None
        self.default_config = copy.deepcopy(DEFAULT_CONFIG)
        self.config: Dict[str, Any] = {}

        self._load_config()

    def _load_config(self):
        """Load configuration from file, falling back to defaults"""
        self.config = copy.deepcopy(self.default_config)
        if self.config_file is None:
            return

        if not self.config_file.exists():
            raise ConfigError(f"config file not found: {self.config_file}")
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                file_config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {self.config_file} is not valid JSON: {e}") from e

        if not isinstance(file_config, dict):
            raise ConfigError(f"config file {self.config_file} must hold a JSON object")

        self.config = self._merge_configs(self.config, file_config)
        self.logger.info(f"Configuration loaded from {self.config_file}")

    def _merge_configs(self, default: Dict, user: Dict) -> Dict:
        """Merge user configuration with default configuration"""
        merged = copy.deepcopy(default)

        for key, value in user.items():
            if key in merged and isinstance(merged[key], dict) and isinstance(value, dict):
                merged[key] = self._merge_configs(merged[key], value)
            else:
                merged[key] = value

        return merged

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by dotted key"""
        value = self.config
        for k in key.split('.'):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def set(self, key: str, value: Any):
        """Set configuration value by dotted key"""
        keys = key.split('.')
        config = self.config
        for k in keys[:-1]:
            config = config.setdefault(k, {})
        config[keys[-1]] = value
        self.logger.debug(f"Configuration updated: {key} = {value}")

    def get_section(self, section: str) -> Dict:
        return copy.deepcopy(self.config.get(section, {}))

    def update(self, updates: Dict[str, Any]):
        """Apply dotted-key overrides, skipping None values (unset flags)"""
        applied = 0
        for key, value in updates.items():
            if value is None:
                continue
            self.set(key, value)
            applied += 1
        if applied:
            self.logger.debug(f"Configuration updated with {applied} overrides")

    def validate_config(self) -> Dict[str, List[str]]:
        """Validate configuration and return any issues"""
        issues: Dict[str, List[str]] = {'errors': [], 'warnings': []}

        splits = self.get_section('splits')
        try:
            fractions = [float(splits[k]) for k in ('train', 'validation', 'test')]
        except (KeyError, TypeError, ValueError):
            issues['errors'].append("splits must define numeric train, validation and test fractions")
        else:
            if any(f <= 0 for f in fractions):
                issues['errors'].append("split fractions must be positive")
            if abs(sum(fractions) - 1.0) > 1e-9:
                issues['errors'].append(f"split fractions sum to {sum(fractions)!r}, expected 1")

        for key in ('ratio.j_max', 'likelihood.i_max', 'likelihood.j_max', 'likelihood.b_permutations',
                    'likelihood.grid_points_per_dim'):
            value = self.get(key)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                issues['errors'].append(f"{key} must be an integer >= 1 (got {value!r})")

        for key in ('kernel.eps_grid', 'kernel.theta_eps_grid'):
            grid = self.get(key)
            if grid is None:
                continue
            if not isinstance(grid, list) or not grid or any(
                    not isinstance(v, (int, float)) or v <= 0 for v in grid):
                issues['errors'].append(f"{key} must be a nonempty list of positive numbers")

        if not isinstance(self.get('seed'), int):
            issues['errors'].append("seed must be an integer")

        train_fraction = self.get('likelihood.train_fraction')
        if not isinstance(train_fraction, (int, float)) or not 0 < train_fraction < 1:
            issues['errors'].append("likelihood.train_fraction must lie in (0, 1)")

        for key in ('ratio.stability_factor', 'likelihood.stability_factor'):
            value = self.get(key)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
                issues['errors'].append(f"{key} must be a number >= 0 (got {value!r})")

        if self.get('likelihood.b_permutations', 0) > 200:
            issues['warnings'].append("more than 200 permutations makes selection slow")

        return issues

    def require_valid(self):
        """Raise ConfigError listing every validation error"""
        issues = self.validate_config()
        for warning in issues['warnings']:
            self.logger.warning(warning)
        if issues['errors']:
            raise ConfigError("; ".join(issues['errors']))

    def config_hash(self) -> str:
        """Short SHA-256 of the canonical JSON form of the effective config"""
        canonical = json.dumps(self.config, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]

    def export_config(self, file_path: Path):
        """Write the effective configuration (for provenance next to outputs)"""
        with open(file_path, 'w', encoding='utf-8') as f:
            json.dump(self.config, f, indent=2, sort_keys=True)
        self.logger.info(f"Configuration exported to: {file_path}")


@dataclass
class RunConfig:
    """Effective settings for one CLI invocation"""
    command: str
    seed: int
    out_dir: Path
    config_hash: str
    eps_grid: Optional[List[float]] = None
    theta_eps_grid: Optional[List[float]] = None
    grid_quantiles: List[float] = field(default_factory=lambda: [0.05, 0.10, 0.25, 0.50, 0.75])
    grid_subsample: int = 1000
    j_max: int = 50
    i_max: int = 20
    b_permutations: int = 20
    splits: List[float] = field(default_factory=lambda: [0.6, 0.2, 0.2])
    standardize: bool = False
    assert_monotone: bool = False
    grid_points_per_dim: int = 50
    floor_lik: float = 1e-300
    likelihood_train_fraction: float = 0.6
    clip_negative: bool = True
    ratio_stability: float = 1.0
    likelihood_stability: float = 0.0
    simulator: Dict[str, Any] = field(default_factory=dict)
    study: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_manager(cls, command: str, manager: ConfigManager, ratio_section: bool = True) -> 'RunConfig':
        manager.require_valid()
        splits = manager.get_section('splits')
        section = 'ratio' if ratio_section else 'likelihood'
        return cls(
            command=command,
            seed=manager.get('seed'),
            out_dir=Path(manager.get('output.out_dir')),
            config_hash=manager.config_hash(),
            eps_grid=manager.get('kernel.eps_grid'),
            theta_eps_grid=manager.get('kernel.theta_eps_grid'),
            grid_quantiles=list(manager.get('kernel.grid_quantiles')),
            grid_subsample=int(manager.get('kernel.grid_subsample')),
            j_max=manager.get(f'{section}.j_max'),
            i_max=manager.get('likelihood.i_max'),
            b_permutations=manager.get('likelihood.b_permutations'),
            splits=[float(splits['train']), float(splits['validation']), float(splits['test'])],
            standardize=bool(manager.get('output.standardize')),
            assert_monotone=bool(manager.get('study.assert_monotone')),
            grid_points_per_dim=manager.get('likelihood.grid_points_per_dim'),
            floor_lik=float(manager.get('likelihood.floor_lik')),
            likelihood_train_fraction=float(manager.get('likelihood.train_fraction')),
            clip_negative=bool(manager.get(f'{section}.clip_negative')),
            ratio_stability=float(manager.get('ratio.stability_factor')),
            likelihood_stability=float(manager.get('likelihood.stability_factor')),
            simulator=manager.get_section('simulator'),
            study=manager.get_section('study'),
        )
