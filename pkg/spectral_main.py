#!/usr/bin/env python3
"""
Spectral Series Estimation - Command Line Entry Point
Simulate benchmark data, fit density-ratio and likelihood models, compute
posteriors and run convergence studies
"""

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.table import Table

# Add project root to path
sys.path.append(str(Path(__file__).parent))

from core import __version__
from core.errors import EXIT_OK, EXIT_USAGE, ConfigError, InputError, MonotonicityError, SpectralError
from core.evaluation import (BENCHMARKS, PipelineSettings, child_seeds, compare_methods, convergence_study,
                             fit_likelihood_pipeline, fit_ratio_pipeline, get_benchmark, split_sample,
                             write_comparison, write_study)
from core.likelihood import (ThetaGrid, average_likelihood, compute_posterior, estimate_likelihood_loss,
                             posterior_distance, posterior_summary)
from core.persistence import load_model, save_model
from core.ratio import estimate_ratio_loss
from core.simulators import SimulatorModel, SimulatorSpec, simulate_at, simulate_gaussian_shift, simulate_joint
from utils.config_manager import ConfigManager, RunConfig
from utils.csv_io import THETA_PREFIX, read_samples, write_rows, write_samples
from utils.logger import cleanup_logs, get_log_stats, get_logger, setup_advanced_logger

COMPARE_BENCHMARKS = ['ratio_gaussian'] + [m.value for m in SimulatorModel]


def float_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def parse_box(text: str) -> List[List[float]]:
    """'0:15' or '0:6.28,0:6.28'"""
    box = []
    for part in text.split(','):
        try:
            low, high = (float(v) for v in part.split(':'))
        except ValueError:
            raise argparse.ArgumentTypeError(f"box entries look like low:high, got '{part}'")
        box.append([low, high])
    return box


class SpectralRunner:
    """
    Spectral Series Runner
    Turns parsed arguments into a validated run configuration and dispatches subcommands
    """

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.console = Console()
        self.logger = get_logger(__name__)
        self.config = ConfigManager(args.config)
        self.ratio_section = args.command == 'fit-ratio' or (
            args.command in ('study', 'compare') and args.benchmark == 'ratio_gaussian')
        self.config.update(self._overrides())
        self.run = RunConfig.from_manager(args.command, self.config, ratio_section=self.ratio_section)

    def _overrides(self) -> Dict:
        args = self.args
        section = 'ratio' if self.ratio_section else 'likelihood'
        splits = None
        if args.splits is not None:
            if len(args.splits) != 3:
                raise ConfigError(f"--splits takes three fractions (got {len(args.splits)})")
            splits = dict(zip(('train', 'validation', 'test'), args.splits))
        return {
            'seed': args.seed,
            'kernel.eps_grid': args.eps_grid,
            'kernel.theta_eps_grid': args.theta_eps_grid,
            f'{section}.j_max': args.j_max,
            'likelihood.i_max': args.i_max,
            'likelihood.b_permutations': args.b_permutations,
            'splits': splits,
            'output.standardize': True if args.standardize else None,
            'study.assert_monotone': True if args.assert_monotone else None,
            'output.out_dir': args.out_dir,
        }

    @property
    def out_dir(self) -> Path:
        return self.run.out_dir

    def settings(self) -> PipelineSettings:
        run = self.run
        return PipelineSettings(
            j_max=run.j_max, i_max=run.i_max, b_permutations=run.b_permutations,
            grid_quantiles=tuple(run.grid_quantiles), grid_subsample=run.grid_subsample,
            splits=tuple(run.splits), likelihood_train_fraction=run.likelihood_train_fraction,
            train_size=int(run.study.get('train_size', 2000)), n_test=int(run.simulator.get('n_test', 1000)),
            n_test_thetas=int(run.study.get('n_test_thetas', 30)), grid_points_per_dim=run.grid_points_per_dim,
            floor_lik=run.floor_lik, eps_grid=tuple(run.eps_grid) if run.eps_grid else None,
            theta_eps_grid=tuple(run.theta_eps_grid) if run.theta_eps_grid else None,
            clip_negative=run.clip_negative, standardize=run.standardize, n_jobs=self.args.jobs,
            ratio_stability=run.ratio_stability, likelihood_stability=run.likelihood_stability)

    def provenance(self) -> Dict:
        return {'command': self.run.command, 'config_hash': self.run.config_hash, 'seed': self.run.seed,
                'library_version': __version__}

    def write_provenance(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.config.export_config(self.out_dir / 'run_config.json')
        with open(self.out_dir / 'provenance.json', 'w', encoding='utf-8') as f:
            json.dump(self.provenance(), f, indent=2, sort_keys=True)

    def simulator_spec(self, model: Optional[str] = None) -> SimulatorSpec:
        sim = self.run.simulator
        return SimulatorSpec(model=model or sim.get('model', 'gaussian_shift'), dim=int(sim.get('dim', 1)),
                             seed=self.run.seed)

    def print_table(self, title: str, columns: Sequence[str], rows: Sequence[Sequence]):
        table = Table(title=title)
        for column in columns:
            table.add_column(column)
        for row in rows:
            table.add_row(*(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
        self.console.print(table)

    # ------------------------------------------------------------------------- commands

    def cmd_generate(self) -> int:
        args = self.args
        spec = self.simulator_spec(args.model)
        n = args.n or int(self.run.simulator.get('n', 2000))
        if args.theta is not None:
            samples = simulate_at(spec, args.theta, n, self.run.seed)
        else:
            samples = simulate_joint(spec, n, self.run.seed)

        path = Path(args.output) if args.output else self.out_dir / f'{spec.model.value}_samples.csv'
        write_samples(path, samples)
        self.logger.info(f"generated {spec.model.value} samples -> {path}")
        self.console.print(f"{samples.n} rows x {samples.p + samples.d} columns written to {path}")
        return EXIT_OK

    def cmd_fit_ratio(self) -> int:
        args, run = self.args, self.run
        if args.f_data or args.g_data:
            if not (args.f_data and args.g_data):
                raise ConfigError("--f-data and --g-data must be given together")
            samples_F = read_samples(args.f_data).without_thetas()
            samples_G = read_samples(args.g_data).without_thetas()
            if samples_F.d != samples_G.d:
                raise InputError(f"F data has {samples_F.d} columns but G data has {samples_G.d}")
        else:
            seed_F, seed_G = child_seeds(run.seed, 2)
            n, d = int(run.simulator.get('n', 2000)), int(run.simulator.get('dim', 1))
            samples_F = simulate_gaussian_shift(float(run.simulator.get('mu', 0.5)), n, d, seed_F)
            samples_G = simulate_gaussian_shift(0.0, n, d, seed_G)

        train_F, val_F, test_F = split_sample(samples_F, run.splits, run.seed)
        train_G, val_G, test_G = split_sample(samples_G, run.splits, run.seed + 1)
        model, report = fit_ratio_pipeline(train_F, train_G, val_F, val_G, self.settings(), run.seed)
        test_loss = estimate_ratio_loss(model, test_G, test_F)

        self.write_provenance()
        save_model(self.out_dir / 'ratio_model.npz', model, self.provenance())
        write_rows(self.out_dir / 'loss_report.csv', ['eps', 'J', 'loss'],
                   [(row.eps, row.J, row.loss) for row in report.rows])
        selected = report.selected
        write_rows(self.out_dir / 'test_loss.csv', ['eps', 'J', 'validation_loss', 'test_loss'],
                   [(selected.eps, selected.J, selected.loss, test_loss)])

        self.print_table('Density ratio model', ['eps', 'J', 'validation loss', 'test loss'],
                         [(selected.eps, selected.J, selected.loss, test_loss)])
        if report.failures:
            self.console.print(f"[yellow]{len(report.failures)} bandwidths failed to fit[/yellow]")
        return EXIT_OK

    def cmd_fit_likelihood(self) -> int:
        args, run = self.args, self.run
        settings = self.settings()
        if args.joint_data or args.g_data:
            if not (args.joint_data and args.g_data):
                raise ConfigError("--joint-data and --g-data must be given together")
            joint = read_samples(args.joint_data, require_thetas=True)
            samples_G = read_samples(args.g_data).without_thetas()
            if samples_G.n != joint.n or samples_G.d != joint.d:
                raise InputError(f"G data ({samples_G.n} x {samples_G.d}) must match the joint data "
                                 f"({joint.n} x {joint.d})")
            train_joint, val_joint, test_joint = split_sample(joint, run.splits, run.seed)
            train_G, val_G, test_G = split_sample(samples_G, run.splits, run.seed + 1)
            low, high = joint.thetas.min(axis=0), joint.thetas.max(axis=0)
        else:
            spec = self.simulator_spec(args.model)
            n = int(run.simulator.get('n', 2000))
            seed_joint, seed_G, seed_test, seed_test_G = child_seeds(run.seed, 4)
            fractions = (run.likelihood_train_fraction, 1.0 - run.likelihood_train_fraction)
            train_joint, val_joint = split_sample(simulate_joint(spec, n, seed_joint), fractions, run.seed)
            train_G, val_G = split_sample(simulate_joint(spec, n, seed_G).without_thetas(), fractions, run.seed + 1)
            test_joint = simulate_joint(spec, settings.n_test, seed_test)
            test_G = simulate_joint(spec, settings.n_test, seed_test_G).without_thetas()
            low, high = spec.low, spec.high

        model, report = fit_likelihood_pipeline(train_joint, train_G, val_joint, val_G, settings, run.seed)
        model = replace(model, param_box=tuple(zip(low, high)))
        test_loss = estimate_likelihood_loss(model, test_G, test_joint, B=run.b_permutations, seed=run.seed)
        grid = ThetaGrid.from_box(low, high, run.grid_points_per_dim)
        avg_likelihood = average_likelihood(model, test_joint, grid)

        self.write_provenance()
        save_model(self.out_dir / 'likelihood_model.npz', model, self.provenance())
        write_rows(self.out_dir / 'loss_report.csv', ['eps_x', 'eps_theta', 'I', 'J', 'loss'],
                   [(row.eps, row.eps_theta, row.I, row.J, row.loss) for row in report.rows])
        s = report.selected
        write_rows(self.out_dir / 'test_loss.csv',
                   ['eps_x', 'eps_theta', 'I', 'J', 'validation_loss', 'test_loss', 'avg_likelihood'],
                   [(s.eps, s.eps_theta, s.I, s.J, s.loss, test_loss, avg_likelihood)])

        self.print_table('Likelihood model',
                         ['eps_x', 'eps_theta', 'I', 'J', 'validation loss', 'test loss', 'avg likelihood'],
                         [(s.eps, s.eps_theta, s.I, s.J, s.loss, test_loss, avg_likelihood)])
        return EXIT_OK

    def cmd_posterior(self) -> int:
        args, run = self.args, self.run
        model = load_model(args.model_file, expected_kind='likelihood')
        observed = read_samples(args.observations)
        if args.box is not None:
            box = np.asarray(args.box, dtype=float)
            low, high = box[:, 0], box[:, 1]
        elif model.param_box is not None:
            low, high = (np.array(bounds) for bounds in zip(*model.param_box))
        else:
            thetas = model.basis_theta.train_points.points
            low, high = thetas.min(axis=0), thetas.max(axis=0)
        grid = ThetaGrid.from_box(low, high, args.grid_points or run.grid_points_per_dim)

        posterior = compute_posterior(model, observed.without_thetas(), grid, run.floor_lik)
        summary = posterior_summary(posterior.values, grid)

        self.write_provenance()
        header = [f'{THETA_PREFIX}{i}' for i in range(grid.p)] + ['density']
        write_rows(self.out_dir / 'posterior.csv', header,
                   [(*point, value) for point, value in zip(grid.points.tolist(), posterior.values.tolist())])

        rows = [(f'{THETA_PREFIX}{i}', float(summary['mean'][i]), float(summary['sd'][i]), float(summary['map'][i]))
                for i in range(grid.p)]
        self.print_table(f'Posterior from {observed.n} observations', ['parameter', 'mean', 'sd', 'MLE'], rows)
        if posterior.flat:
            self.console.print("[yellow]likelihood at the floor everywhere: posterior is flat[/yellow]")
        if observed.has_thetas and np.all(observed.thetas == observed.thetas[0]):
            distance = posterior_distance(posterior.values, grid, observed.thetas[0])
            self.console.print(f"posterior distance to the labelled parameter: {distance:.6g}")
        return EXIT_OK

    def cmd_study(self) -> int:
        args, run = self.args, self.run
        benchmark = get_benchmark(args.benchmark)
        if args.sizes:
            sizes = args.sizes
        else:
            sizes = run.study.get('m_sizes' if benchmark.size_kind == 'm' else 'sizes')
        n_seeds = args.seeds or int(run.study.get('seeds', 10))

        result = convergence_study(benchmark.name, sizes, n_seeds, base_seed=run.seed, settings=self.settings(),
                                   n_jobs=args.jobs, show_progress=not args.quiet)
        self.write_provenance()
        write_study(self.out_dir, result)

        self.print_table(f'{benchmark.name}: {benchmark.metric}', ['size', 'mean', 'se', 'valid seeds'],
                         [(r.size, r.mean, r.se, r.n_valid) for r in result.summary])
        if run.assert_monotone and not result.monotone:
            direction = 'non-decreasing' if benchmark.higher_is_better else 'non-increasing'
            raise MonotonicityError(f"mean {benchmark.metric} is not {direction} across sizes {sorted(sizes)}")
        return EXIT_OK

    def cmd_compare(self) -> int:
        args, run = self.args, self.run
        n = args.n or int(run.simulator.get('n', 2000))
        n_seeds = args.seeds or int(run.study.get('seeds', 10))
        results = compare_methods(args.benchmark, n, n_seeds, base_seed=run.seed, settings=self.settings(),
                                  show_progress=not args.quiet)
        self.write_provenance()
        write_comparison(self.out_dir, results)
        self.print_table(f'{args.benchmark}, n={n}, {n_seeds} seeds',
                         ['method', 'loss', 'se', 'avg likelihood', 'se'],
                         [(r.method, r.loss, r.loss_se,
                           '-' if r.avg_likelihood is None else r.avg_likelihood,
                           '-' if r.avg_likelihood_se is None else r.avg_likelihood_se) for r in results])
        return EXIT_OK

    def dispatch(self) -> int:
        commands = {
            'generate': self.cmd_generate,
            'fit-ratio': self.cmd_fit_ratio,
            'fit-likelihood': self.cmd_fit_likelihood,
            'posterior': self.cmd_posterior,
            'study': self.cmd_study,
            'compare': self.cmd_compare,
        }
        start = time.perf_counter()
        code = commands[self.args.command]()
        self.logger.info(f"{self.args.command} finished in {time.perf_counter() - start:.2f}s")
        return code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON configuration file')
    common.add_argument('--seed', type=int)
    common.add_argument('--eps-grid', type=float_list, help='comma-separated x bandwidths')
    common.add_argument('--theta-eps-grid', type=float_list, help='comma-separated theta bandwidths')
    common.add_argument('--j-max', type=int)
    common.add_argument('--i-max', type=int)
    common.add_argument('--b-permutations', type=int)
    common.add_argument('--splits', type=float_list, help='train,validation,test fractions')
    common.add_argument('--standardize', action='store_true', help='z-score inputs with training statistics')
    common.add_argument('--assert-monotone', action='store_true')
    common.add_argument('--out-dir')
    common.add_argument('--jobs', type=int, default=1, help='worker threads for grids and studies')
    common.add_argument('--log-level', default=None, choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    common.add_argument('--clean-logs', action='store_true', help='delete log files older than a week')
    common.add_argument('--quiet', action='store_true', help='no progress bars')

    parser = argparse.ArgumentParser(prog='spectral_main.py',
                                     description='Spectral series estimators for density ratios and likelihoods')
    sub = parser.add_subparsers(dest='command', required=True)

    generate = sub.add_parser('generate', parents=[common], help='simulate benchmark data to CSV')
    generate.add_argument('--model', choices=[m.value for m in SimulatorModel])
    generate.add_argument('--n', type=int)
    generate.add_argument('--theta', type=float_list, help='fixed parameter; omitted draws from the prior')
    generate.add_argument('--output', help='CSV path (default <out-dir>/<model>_samples.csv)')

    fit_ratio = sub.add_parser('fit-ratio', parents=[common], help='fit a density ratio model')
    fit_ratio.add_argument('--f-data', help='CSV sample from F')
    fit_ratio.add_argument('--g-data', help='CSV sample from G')

    fit_lik = sub.add_parser('fit-likelihood', parents=[common], help='fit a likelihood model')
    fit_lik.add_argument('--joint-data', help='CSV of (theta_*, x_*) draws')
    fit_lik.add_argument('--g-data', help='CSV sample from the marginal of x')
    fit_lik.add_argument('--model', choices=[m.value for m in SimulatorModel])

    posterior = sub.add_parser('posterior', parents=[common], help='posterior over a parameter grid')
    posterior.add_argument('--model-file', required=True)
    posterior.add_argument('--observations', required=True)
    posterior.add_argument('--box', type=parse_box, help="parameter box, e.g. '0:15' or '0:6.28,0:6.28'")
    posterior.add_argument('--grid-points', type=int, help='grid points per parameter dimension')

    study = sub.add_parser('study', parents=[common], help='convergence study over sample sizes')
    study.add_argument('--benchmark', required=True, choices=sorted(BENCHMARKS))
    study.add_argument('--sizes', type=int_list)
    study.add_argument('--seeds', type=int)

    compare = sub.add_parser('compare', parents=[common], help='series estimator vs KDE baseline')
    compare.add_argument('--benchmark', required=True, choices=COMPARE_BENCHMARKS)
    compare.add_argument('--n', type=int)
    compare.add_argument('--seeds', type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    level = getattr(logging, args.log_level) if args.log_level else logging.INFO
    logger = setup_advanced_logger(level)

    try:
        runner = SpectralRunner(args)
        if args.log_level is None:
            level = getattr(logging, str(runner.config.get('logging.level', 'INFO')).upper(), logging.INFO)
        log_dir = runner.out_dir / 'logs' if runner.config.get('logging.to_file', True) else None
        logger = setup_advanced_logger(level, log_dir)
        if args.clean_logs:
            removed = cleanup_logs()
            stats = get_log_stats()
            logger.info(f"removed {removed} old log files; {len(stats['log_files'])} files "
                        f"({stats['total_size_mb']} MB) remain in {stats['log_directory']}")
        return runner.dispatch()
    except SpectralError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        # unwritable or missing output locations
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
