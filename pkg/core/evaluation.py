"""
Evaluation
KDE baselines, MISE against analytic truths, benchmark pipelines, convergence
studies over n or m, and method comparison tables
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.model_selection import GridSearchCV
from sklearn.neighbors import KernelDensity
from tqdm import tqdm

from core.errors import InputError, MonotonicityError, SpectralError
from core.kernels import SampleLike, SampleSet, Standardizer, as_point, as_sample_set, bandwidth_grid
from core.likelihood import (DEFAULT_B, FLOOR_LIK, LikelihoodModel, ThetaGrid, average_distance_to_truth,
                             average_likelihood, estimate_likelihood_loss, select_likelihood_model)
from core.ratio import DEFAULT_STABILITY, LossReport, RatioModel, estimate_ratio_loss, select_ratio_model
from core.simulators import (SimulatorModel, SimulatorSpec, gaussian_shift_ratio, simulate_at,
                             simulate_gaussian_shift, simulate_joint)
from utils.csv_io import write_rows
from utils.logger import get_logger, log_performance

logger = get_logger(__name__)

G_FLOOR = 1e-12
KDE_CV_MAX_DIM = 4
RATIO_SHIFT = 0.5


# ----------------------------------------------------------------------------- KDE

def silverman_bandwidth(points: np.ndarray) -> float:
    """Reference-rule bandwidth; robust univariate form in 1-d"""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n, d = points.shape
    if n < 2:
        return 1.0
    std = points.std(axis=0, ddof=1)
    if d == 1:
        q75, q25 = np.percentile(points[:, 0], [75, 25])
        iqr = (q75 - q25) / 1.34
        sigma = min(std[0], iqr) if iqr > 0 else std[0]
        h = 0.9 * sigma * n ** (-0.2)
    else:
        h = float(np.mean(std)) * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))
    return float(h) if h > 0 else 1.0


def fit_kde(points: np.ndarray, bandwidth: Optional[float] = None, cross_validate: bool = False,
            n_folds: int = 5) -> KernelDensity:
    """Isotropic Gaussian KDE; cross-validation searches around the reference rule"""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] < 1:
        raise InputError("KDE needs at least one sample")

    if bandwidth is not None:
        return KernelDensity(kernel='gaussian', bandwidth=float(bandwidth)).fit(points)

    reference = silverman_bandwidth(points)
    if not cross_validate or points.shape[0] < 2 * n_folds:
        return KernelDensity(kernel='gaussian', bandwidth=reference).fit(points)

    params = {'bandwidth': reference * np.logspace(-1, 0.5, num=12)}
    search = GridSearchCV(KernelDensity(kernel='gaussian'), params, cv=n_folds)
    search.fit(points)
    logger.debug(f"KDE bandwidth by {n_folds}-fold CV: {search.best_params_['bandwidth']:.4g} "
                 f"(reference {reference:.4g})")
    return search.best_estimator_


def kde_density(samples: SampleLike, bandwidth: Optional[float], x) -> float:
    """(1/n) sum_k prod_dims N(x_dim; sample_dim, h^2), Silverman bandwidth when unset"""
    samples = as_sample_set(samples)
    point = as_point(x, samples.d)
    kde = fit_kde(samples.points, bandwidth)
    return float(np.exp(kde.score_samples(point[None, :])[0]))


class KDERatioBaseline:
    """
    Ratio of two kernel density estimates, f_hat / max(g_hat, g_floor),
    on inputs standardized with the G training statistics
    """

    def __init__(self, cross_validate: Optional[bool] = None, g_floor: float = G_FLOOR):
        self.cross_validate = cross_validate
        self.g_floor = g_floor
        self.standardizer: Optional[Standardizer] = None
        self.kde_F: Optional[KernelDensity] = None
        self.kde_G: Optional[KernelDensity] = None
        self.last_floor_hits = 0

    def fit(self, train_F: SampleLike, train_G: SampleLike) -> 'KDERatioBaseline':
        train_F, train_G = as_sample_set(train_F), as_sample_set(train_G)
        cv = train_G.d <= KDE_CV_MAX_DIM if self.cross_validate is None else self.cross_validate
        self.standardizer = Standardizer.fit(train_G)
        self.kde_F = fit_kde(self.standardizer.transform_points(train_F.points), cross_validate=cv)
        self.kde_G = fit_kde(self.standardizer.transform_points(train_G.points), cross_validate=cv)
        return self

    def predict_with_floor(self, xs: SampleLike) -> Tuple[np.ndarray, np.ndarray]:
        if self.kde_F is None:
            raise InputError("baseline is not fitted")
        points = self.standardizer.transform_points(as_sample_set(xs).points)
        log_f = self.kde_F.score_samples(points)
        log_g = self.kde_G.score_samples(points)
        # Jacobians of the shared standardization cancel in the ratio; the floor is on the raw scale
        log_floor = math.log(self.g_floor) + float(np.sum(np.log(self.standardizer.scale)))
        floored = log_g < log_floor
        return np.exp(log_f - np.maximum(log_g, log_floor)), floored

    def predict(self, xs: SampleLike, J: Optional[int] = None) -> np.ndarray:
        values, floored = self.predict_with_floor(xs)
        self.last_floor_hits = int(floored.sum())
        if self.last_floor_hits:
            logger.warning(f"KDE ratio: g_hat below floor at {self.last_floor_hits} points; capped")
        return values


def kde_ratio_baseline(train_F: SampleLike, train_G: SampleLike, val_G: Optional[SampleLike] = None,
                       val_F: Optional[SampleLike] = None,
                       cross_validate: Optional[bool] = None) -> Tuple[KDERatioBaseline, Optional[float]]:
    """Fit the ratio-of-KDEs baseline; returns it with its validation loss when validation sets are given"""
    baseline = KDERatioBaseline(cross_validate=cross_validate).fit(train_F, train_G)
    loss = None
    if val_G is not None and val_F is not None:
        loss = estimate_ratio_loss(baseline, val_G, val_F)
    return baseline, loss


class KDELikelihoodBaseline:
    """L(x; theta) estimated as f_hat(x, theta) / (f_hat(theta) g_hat(x))"""

    def __init__(self, cross_validate: Optional[bool] = None, g_floor: float = G_FLOOR):
        self.cross_validate = cross_validate
        self.g_floor = g_floor

    def fit(self, train_joint: SampleSet, train_G: SampleLike) -> 'KDELikelihoodBaseline':
        train_joint = as_sample_set(train_joint)
        if not train_joint.has_thetas:
            raise InputError("joint sample needs theta labels")
        train_G = as_sample_set(train_G)
        cv = train_G.d <= KDE_CV_MAX_DIM if self.cross_validate is None else self.cross_validate
        self.x_scaler = Standardizer.fit(train_G)
        self.theta_scaler = Standardizer.fit(train_joint.thetas)
        x_joint = self.x_scaler.transform_points(train_joint.points)
        theta_joint = self.theta_scaler.transform_points(train_joint.thetas)
        self.kde_joint = fit_kde(np.hstack([x_joint, theta_joint]), cross_validate=cv)
        self.kde_theta = fit_kde(theta_joint, cross_validate=cv)
        self.kde_G = fit_kde(self.x_scaler.transform_points(train_G.points), cross_validate=cv)
        self.log_floor = math.log(self.g_floor) + float(np.sum(np.log(self.x_scaler.scale)))
        return self

    def _log_ratio(self, xs: np.ndarray, thetas: np.ndarray) -> np.ndarray:
        log_joint = self.kde_joint.score_samples(np.hstack([xs, thetas]))
        log_theta = self.kde_theta.score_samples(thetas)
        log_g = np.maximum(self.kde_G.score_samples(xs), self.log_floor)
        return log_joint - log_theta - log_g

    def predict_pairs(self, xs: SampleLike, thetas: SampleLike, I: Optional[int] = None,
                      J: Optional[int] = None) -> np.ndarray:
        xs = self.x_scaler.transform_points(as_sample_set(xs).points)
        thetas = self.theta_scaler.transform_points(as_sample_set(thetas).points)
        if xs.shape[0] != thetas.shape[0]:
            raise InputError(f"{xs.shape[0]} points but {thetas.shape[0]} parameter rows")
        return np.exp(self._log_ratio(xs, thetas))

    def predict_grid(self, xs: SampleLike, thetas: SampleLike) -> np.ndarray:
        xs = self.x_scaler.transform_points(as_sample_set(xs).points)
        thetas = self.theta_scaler.transform_points(as_sample_set(thetas).points)
        m, g = xs.shape[0], thetas.shape[0]
        log_values = self._log_ratio(np.repeat(xs, g, axis=0), np.tile(thetas, (m, 1)))
        return np.exp(log_values).reshape(m, g)


def mise_vs_truth(predictor: Union[Callable[[np.ndarray], np.ndarray], RatioModel],
                  truth: Callable[[np.ndarray], np.ndarray], eval_sample: SampleLike) -> float:
    """Monte Carlo estimate of the integral of (estimate - truth)^2 dG over a held-out G sample"""
    eval_sample = as_sample_set(eval_sample)
    predict = predictor.predict if hasattr(predictor, 'predict') else predictor
    estimate = np.asarray(predict(eval_sample.points), dtype=float).reshape(-1)
    target = np.asarray(truth(eval_sample.points), dtype=float).reshape(-1)
    return float(np.mean(np.square(estimate - target)))


# ----------------------------------------------------------------------------- pipelines

@dataclass
class PipelineSettings:
    """Tuning and sizing shared by benchmark pipelines"""
    j_max: int = 50
    i_max: int = 20
    b_permutations: int = DEFAULT_B
    grid_quantiles: Tuple[float, ...] = (0.05, 0.10, 0.25, 0.50, 0.75)
    grid_subsample: int = 1000
    splits: Tuple[float, float, float] = (0.6, 0.2, 0.2)
    likelihood_train_fraction: float = 0.6
    train_size: int = 2000
    n_eval: int = 5000
    n_test: int = 1000
    n_test_thetas: int = 30
    grid_points_per_dim: int = 50
    floor_lik: float = FLOOR_LIK
    eps_grid: Optional[Tuple[float, ...]] = None
    theta_eps_grid: Optional[Tuple[float, ...]] = None
    clip_negative: bool = True
    standardize: bool = False
    n_jobs: int = 1
    ratio_stability: float = DEFAULT_STABILITY
    likelihood_stability: float = 0.0


def child_seeds(seed: int, count: int) -> List[int]:
    """Independent integer seeds derived from one seed"""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def split_sample(samples: SampleSet, fractions: Sequence[float], seed: int) -> List[SampleSet]:
    """Seeded shuffle, then consecutive chunks with the given fractions"""
    fractions = np.asarray(fractions, dtype=float)
    if np.any(fractions <= 0) or abs(fractions.sum() - 1.0) > 1e-9:
        raise InputError(f"split fractions must be positive and sum to 1 (got {fractions.tolist()})")
    order = np.random.default_rng(seed).permutation(samples.n)
    bounds = np.round(np.cumsum(fractions) * samples.n).astype(int)
    bounds[-1] = samples.n
    parts, start = [], 0
    for stop in bounds:
        if stop <= start:
            raise InputError(f"{samples.n} rows are too few for splits {fractions.tolist()}")
        parts.append(samples.subset(order[start:stop]))
        start = stop
    return parts


def fit_ratio_pipeline(train_F: SampleSet, train_G: SampleSet, val_F: SampleSet, val_G: SampleSet,
                       settings: PipelineSettings, seed: int = 0) -> Tuple[RatioModel, LossReport]:
    """Optional standardization, bandwidth grid, then (eps, J) selection on the validation split"""
    standardizer = Standardizer.fit(train_G) if settings.standardize else None
    if standardizer is not None:
        train_F, train_G, val_F, val_G = (standardizer.transform(s) for s in (train_F, train_G, val_F, val_G))
    eps_grid = settings.eps_grid or bandwidth_grid(train_G, settings.grid_quantiles, settings.grid_subsample, seed)
    model, report = select_ratio_model(train_G, train_F, val_G, val_F, eps_grid, settings.j_max,
                                       clip_negative=settings.clip_negative, n_jobs=settings.n_jobs,
                                       stability=settings.ratio_stability)
    return replace(model, standardizer=standardizer), report


def fit_likelihood_pipeline(train_joint: SampleSet, train_G: SampleSet, val_joint: SampleSet, val_G: SampleSet,
                            settings: PipelineSettings, seed: int = 0) -> Tuple[LikelihoodModel, LossReport]:
    """As fit_ratio_pipeline, with separate bandwidth grids for x and theta"""
    standardizer = Standardizer.fit(train_G) if settings.standardize else None
    if standardizer is not None:
        train_joint, train_G, val_joint, val_G = (standardizer.transform(s)
                                                  for s in (train_joint, train_G, val_joint, val_G))
    grid_x = settings.eps_grid or bandwidth_grid(train_G, settings.grid_quantiles, settings.grid_subsample, seed)
    grid_theta = settings.theta_eps_grid or bandwidth_grid(train_joint.theta_samples(), settings.grid_quantiles,
                                                           settings.grid_subsample, seed)
    model, report = select_likelihood_model(train_joint, train_G, val_joint, val_G, grid_x, grid_theta,
                                            settings.i_max, settings.j_max, settings.b_permutations,
                                            seed=seed, clip_negative=settings.clip_negative,
                                            stability=settings.likelihood_stability)
    return replace(model, standardizer=standardizer), report


@dataclass
class RatioOutcome:
    model: RatioModel
    report: LossReport
    test_loss: float
    mise: float
    mean_prediction: float
    baseline_test_loss: Optional[float] = None


def run_ratio_benchmark(n: int, seed: int, settings: PipelineSettings, mu: float = RATIO_SHIFT,
                        with_baseline: bool = False) -> RatioOutcome:
    """F = N(mu, 1), G = N(0, 1): select a series model and score it against exp(mu x - mu^2/2)"""
    seed_F, seed_G, seed_split, seed_eval = child_seeds(seed, 4)
    samples_F = simulate_gaussian_shift(mu, n, 1, seed_F)
    samples_G = simulate_gaussian_shift(0.0, n, 1, seed_G)
    train_F, val_F, test_F = split_sample(samples_F, settings.splits, seed_split)
    train_G, val_G, test_G = split_sample(samples_G, settings.splits, seed_split + 1)

    model, report = fit_ratio_pipeline(train_F, train_G, val_F, val_G, settings, seed)
    eval_G = simulate_gaussian_shift(0.0, settings.n_eval, 1, seed_eval)
    outcome = RatioOutcome(
        model=model, report=report,
        test_loss=estimate_ratio_loss(model, test_G, test_F),
        mise=mise_vs_truth(model, lambda x: gaussian_shift_ratio(x, mu), eval_G),
        mean_prediction=float(np.mean(model.predict(eval_G))))
    if with_baseline:
        baseline, _ = kde_ratio_baseline(train_F, train_G)
        outcome.baseline_test_loss = estimate_ratio_loss(baseline, test_G, test_F)
    return outcome


@dataclass
class LikelihoodOutcome:
    model: LikelihoodModel
    report: LossReport
    grid: ThetaGrid
    train_joint: SampleSet
    train_G: SampleSet


def run_likelihood_pipeline(spec: SimulatorSpec, n: int, seed: int,
                            settings: PipelineSettings) -> LikelihoodOutcome:
    """Simulate n joint draws and n independent G draws, split train/validation, select (eps, I, J)"""
    seed_joint, seed_G, seed_split, seed_perm = child_seeds(seed, 4)
    joint = simulate_joint(spec, n, seed_joint)
    samples_G = simulate_joint(spec, n, seed_G).without_thetas()
    fractions = (settings.likelihood_train_fraction, 1.0 - settings.likelihood_train_fraction)
    train_joint, val_joint = split_sample(joint, fractions, seed_split)
    train_G, val_G = split_sample(samples_G, fractions, seed_split + 1)

    model, report = fit_likelihood_pipeline(train_joint, train_G, val_joint, val_G, settings, seed_perm)
    model = replace(model, param_box=spec.param_box)
    grid = ThetaGrid.from_box(spec.low, spec.high, settings.grid_points_per_dim)
    return LikelihoodOutcome(model=model, report=report, grid=grid, train_joint=train_joint, train_G=train_G)


def observed_groups(spec: SimulatorSpec, n_thetas: int, m: int, seed: int) -> SampleSet:
    """n_thetas parameters from the prior, each with m observations, stacked in blocks of m"""
    seed_theta, seed_obs = child_seeds(seed, 2)
    thetas = np.random.default_rng(seed_theta).uniform(spec.low, spec.high, size=(n_thetas, spec.p))
    blocks = [simulate_at(spec, theta, m, s) for theta, s in zip(thetas, child_seeds(seed_obs, n_thetas))]
    return SampleSet(np.vstack([b.points for b in blocks]), np.vstack([b.thetas for b in blocks]))


def distance_curve(model, spec: SimulatorSpec, grid: ThetaGrid, m_grid: Sequence[int], seed: int,
                   settings: PipelineSettings) -> Dict[int, float]:
    """Average posterior distance to the truth for each observed sample size; samples are nested in m"""
    m_max = max(m_grid)
    groups = observed_groups(spec, settings.n_test_thetas, m_max, seed)
    curve = {}
    for m in m_grid:
        rows = np.concatenate([np.arange(t * m_max, t * m_max + m) for t in range(settings.n_test_thetas)])
        curve[m] = average_distance_to_truth(model, groups.subset(rows), grid, group_size=m,
                                             floor_lik=settings.floor_lik)
    return curve


# ----------------------------------------------------------------------------- studies

@dataclass(frozen=True)
class Benchmark:
    name: str
    size_kind: str
    metric: str
    higher_is_better: bool = False
    model: Optional[SimulatorModel] = None


BENCHMARKS: Dict[str, Benchmark] = {
    'ratio_gaussian': Benchmark('ratio_gaussian', 'n', 'mise'),
    'spiral_distance': Benchmark('spiral_distance', 'm', 'avg_distance', model=SimulatorModel.SPIRAL),
    'klein_distance': Benchmark('klein_distance', 'm', 'avg_distance', model=SimulatorModel.KLEIN_BOTTLE),
    'edges_distance': Benchmark('edges_distance', 'm', 'avg_distance', model=SimulatorModel.EDGES),
    'klein_avg_likelihood': Benchmark('klein_avg_likelihood', 'n', 'avg_likelihood', higher_is_better=True,
                                      model=SimulatorModel.KLEIN_BOTTLE),
}


def get_benchmark(name: str) -> Benchmark:
    if name not in BENCHMARKS:
        raise InputError(f"unknown benchmark '{name}' (choose from {', '.join(sorted(BENCHMARKS))})")
    return BENCHMARKS[name]


@dataclass
class StudyCell:
    size: int
    seed: int
    metric: float
    valid: bool = True
    error: str = ''


@dataclass
class SummaryRow:
    size: int
    mean: float
    se: float
    n_valid: int


@dataclass
class StudyResult:
    benchmark: str
    metric: str
    cells: List[StudyCell]
    summary: List[SummaryRow]
    monotone: bool


def standard_error(values: Sequence[float]) -> float:
    """Sample sd / sqrt(count); NaN with fewer than two values"""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float('nan')
    return float(np.std(values, ddof=1) / np.sqrt(values.size))


def _run_seed(benchmark: Benchmark, sizes: Sequence[int], seed: int,
              settings: PipelineSettings) -> List[StudyCell]:
    """Every size for one seed; m-studies fit the likelihood once per seed"""
    cells = []
    if benchmark.size_kind == 'm':
        spec = SimulatorSpec(benchmark.model)
        try:
            outcome = run_likelihood_pipeline(spec, settings.train_size, seed, settings)
            curve = distance_curve(outcome.model, spec, outcome.grid, sizes, seed + 1, settings)
        except SpectralError as e:
            return [StudyCell(size, seed, float('nan'), False, str(e)) for size in sizes]
        return [StudyCell(size, seed, curve[size]) for size in sizes]

    for size in sizes:
        try:
            if benchmark.name == 'ratio_gaussian':
                metric = run_ratio_benchmark(size, seed, settings).mise
            else:
                spec = SimulatorSpec(benchmark.model)
                outcome = run_likelihood_pipeline(spec, size, seed, settings)
                test_joint = simulate_joint(spec, settings.n_test, seed + 1)
                metric = average_likelihood(outcome.model, test_joint, outcome.grid)
            cells.append(StudyCell(size, seed, metric))
        except SpectralError as e:
            logger.warning(f"study cell size={size} seed={seed} failed: {e}")
            cells.append(StudyCell(size, seed, float('nan'), False, str(e)))
    return cells


def summarize(cells: Sequence[StudyCell], sizes: Sequence[int]) -> List[SummaryRow]:
    summary = []
    for size in sizes:
        values = [c.metric for c in cells if c.size == size and c.valid]
        mean = float(np.mean(values)) if values else float('nan')
        summary.append(SummaryRow(size, mean, standard_error(values), len(values)))
    return summary


def is_monotone(summary: Sequence[SummaryRow], higher_is_better: bool) -> bool:
    means = np.array([row.mean for row in summary])
    if np.any(~np.isfinite(means)):
        return False
    steps = np.diff(means)
    return bool(np.all(steps >= 0) if higher_is_better else np.all(steps <= 0))


def convergence_study(benchmark_name: str, sizes: Sequence[int], n_seeds: int, base_seed: int = 0,
                      settings: Optional[PipelineSettings] = None, n_jobs: int = 1,
                      assert_monotone: bool = False, show_progress: bool = False) -> StudyResult:
    """Run the pipeline for every (size, seed) cell and summarize the metric per size"""
    benchmark = get_benchmark(benchmark_name)
    settings = settings or PipelineSettings()
    sizes = sorted(int(s) for s in sizes)
    if not sizes or sizes[0] < 1:
        raise InputError(f"study sizes must be positive (got {sizes})")
    if n_seeds < 1:
        raise InputError("a study needs at least one seed")
    seeds = child_seeds(base_seed, n_seeds)

    start = time.perf_counter()
    with tqdm(total=len(seeds), desc=benchmark.name, disable=not show_progress) as progress:
        def run(seed):
            cells = _run_seed(benchmark, sizes, seed, settings)
            progress.update(1)
            return cells

        if n_jobs > 1:
            with ThreadPoolExecutor(max_workers=n_jobs) as executor:
                per_seed = list(executor.map(run, seeds))
        else:
            per_seed = [run(seed) for seed in seeds]

    cells = sorted((cell for cells in per_seed for cell in cells), key=lambda c: (c.size, seeds.index(c.seed)))
    summary = summarize(cells, sizes)
    monotone = is_monotone(summary, benchmark.higher_is_better)

    duration = time.perf_counter() - start
    logger.info(f"study {benchmark.name}: " + ", ".join(f"{r.size}: {r.mean:.5g}" for r in summary)
                + f" ({'monotone' if monotone else 'NOT monotone'})")
    log_performance('evaluation', 'convergence_study', duration,
                    {'benchmark': benchmark.name, 'sizes': sizes, 'seeds': n_seeds})

    result = StudyResult(benchmark.name, benchmark.metric, cells, summary, monotone)
    if assert_monotone and not monotone:
        direction = 'non-decreasing' if benchmark.higher_is_better else 'non-increasing'
        raise MonotonicityError(f"mean {benchmark.metric} is not {direction} across sizes {sizes}")
    return result


def write_study(out_dir: Path, result: StudyResult) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    study_path = write_rows(out_dir / 'study.csv', ['size', 'seed', result.metric, 'valid', 'error'],
                            [(c.size, c.seed, c.metric, int(c.valid), c.error) for c in result.cells])
    summary_path = write_rows(out_dir / 'summary.csv', ['size', 'mean', 'se', 'n_valid'],
                              [(r.size, r.mean, r.se, r.n_valid) for r in result.summary])
    return study_path, summary_path


# ----------------------------------------------------------------------------- comparisons

@dataclass
class ExperimentResult:
    method: str
    loss: float
    loss_se: float
    avg_likelihood: Optional[float] = None
    avg_likelihood_se: Optional[float] = None
    avg_distance: Dict[int, float] = field(default_factory=dict)
    config: Dict = field(default_factory=dict)
    seeds: List[int] = field(default_factory=list)


def _likelihood_scores(predictor, spec: SimulatorSpec, grid: ThetaGrid, seed: int,
                       settings: PipelineSettings) -> Tuple[float, float]:
    seed_test, seed_G = child_seeds(seed, 2)
    test_joint = simulate_joint(spec, settings.n_test, seed_test)
    test_G = simulate_joint(spec, settings.n_test, seed_G).without_thetas()
    loss = estimate_likelihood_loss(predictor, test_G, test_joint, B=settings.b_permutations, seed=seed)
    return loss, average_likelihood(predictor, test_joint, grid)


def compare_methods(benchmark: str, n: int, n_seeds: int, base_seed: int = 0,
                    settings: Optional[PipelineSettings] = None, show_progress: bool = False) -> List[ExperimentResult]:
    """Series estimator vs the KDE baseline, mean and standard error across seeds"""
    if benchmark != 'ratio_gaussian' and benchmark not in {m.value for m in SimulatorModel}:
        raise InputError(f"cannot compare methods on '{benchmark}'")
    settings = settings or PipelineSettings()
    seeds = child_seeds(base_seed, n_seeds)
    config = {'benchmark': benchmark, 'n': n, 'base_seed': base_seed, **asdict(settings)}
    losses: Dict[str, List[float]] = {'series': [], 'kde': []}
    likelihoods: Dict[str, List[float]] = {'series': [], 'kde': []}

    for seed in tqdm(seeds, desc=f"compare {benchmark}", disable=not show_progress):
        if benchmark == 'ratio_gaussian':
            outcome = run_ratio_benchmark(n, seed, settings, with_baseline=True)
            losses['series'].append(outcome.test_loss)
            losses['kde'].append(outcome.baseline_test_loss)
            continue

        spec = SimulatorSpec(SimulatorModel(benchmark))
        outcome = run_likelihood_pipeline(spec, n, seed, settings)
        kde = KDELikelihoodBaseline().fit(outcome.train_joint, outcome.train_G)
        for method, predictor in (('series', outcome.model), ('kde', kde)):
            loss, avg = _likelihood_scores(predictor, spec, outcome.grid, seed + 1, settings)
            losses[method].append(loss)
            likelihoods[method].append(avg)

    results = []
    for method in ('series', 'kde'):
        result = ExperimentResult(method=method, loss=float(np.mean(losses[method])),
                                  loss_se=standard_error(losses[method]), config=config, seeds=seeds)
        if likelihoods[method]:
            result.avg_likelihood = float(np.mean(likelihoods[method]))
            result.avg_likelihood_se = standard_error(likelihoods[method])
        results.append(result)
    return results


def write_comparison(out_dir: Path, results: Sequence[ExperimentResult]) -> Path:
    return write_rows(Path(out_dir) / 'comparison.csv',
                      ['method', 'loss', 'loss_se', 'avg_likelihood', 'avg_likelihood_se'],
                      [(r.method, r.loss, r.loss_se, r.avg_likelihood, r.avg_likelihood_se) for r in results])
