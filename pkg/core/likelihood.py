"""
Likelihood Estimation
Tensor-product spectral series for L(x; theta) = f(x | theta) / g(x), its permutation
loss, (I, J) selection, and posteriors over a parameter grid
"""

import itertools
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from core.errors import InputError, NumericalError, SelectionError, SpectralError
from core.kernels import KernelSpec, SampleLike, SampleSet, Standardizer, as_point, as_sample_set
from core.ratio import LossReport, LossRow
from core.spectral_basis import SpectralBasis, evaluate_basis_batch, fit_basis, stable_truncation
from utils.logger import get_logger, log_performance

logger = get_logger(__name__)

DEFAULT_B = 20
FLOOR_LIK = 1e-300


class LikelihoodPredictor(Protocol):
    def predict_pairs(self, xs: SampleLike, thetas: SampleLike,
                      I: Optional[int] = None, J: Optional[int] = None) -> np.ndarray:
        ...


@dataclass(frozen=True)
class LikelihoodModel:
    """coeffs[j, i] multiplies psi_j(x) phi_i(theta)"""
    basis_x: SpectralBasis
    basis_theta: SpectralBasis
    coeffs: np.ndarray
    I_selected: int
    J_selected: int
    clip_negative: bool = True
    standardizer: Optional[Standardizer] = None
    # uniform-prior box of the training parameters, used as the default posterior grid
    param_box: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if self.param_box is not None:
            box = tuple((float(low), float(high)) for low, high in self.param_box)
            if len(box) != self.basis_theta.dim or any(not low < high for low, high in box):
                raise InputError(f"parameter box {box} does not fit {self.basis_theta.dim} parameters")
            object.__setattr__(self, 'param_box', box)
        coeffs = np.array(self.coeffs, dtype=float, copy=True)
        expected = (self.basis_x.J_kept, self.basis_theta.J_kept)
        if coeffs.shape != expected:
            raise InputError(f"coefficient matrix has shape {coeffs.shape}, expected {expected}")
        if not np.all(np.isfinite(coeffs)):
            raise InputError("likelihood coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coeffs', coeffs)
        if not 1 <= self.I_selected <= self.I_kept:
            raise InputError(f"I_selected={self.I_selected} outside 1..{self.I_kept}")
        if not 1 <= self.J_selected <= self.J_kept:
            raise InputError(f"J_selected={self.J_selected} outside 1..{self.J_kept}")

    @property
    def I_kept(self) -> int:
        return self.basis_theta.J_kept

    @property
    def J_kept(self) -> int:
        return self.basis_x.J_kept

    def x_features(self, xs: SampleLike) -> np.ndarray:
        xs = as_sample_set(xs)
        if self.standardizer is not None:
            xs = self.standardizer.transform(xs)
        return evaluate_basis_batch(self.basis_x, xs)

    def theta_features(self, thetas: SampleLike) -> np.ndarray:
        return evaluate_basis_batch(self.basis_theta, as_sample_set(thetas))

    def predict_pairs(self, xs: SampleLike, thetas: SampleLike,
                      I: Optional[int] = None, J: Optional[int] = None) -> np.ndarray:
        return predict_likelihood_pairs(self, xs, thetas, I, J)

    def predict_grid(self, xs: SampleLike, thetas: SampleLike) -> np.ndarray:
        return predict_likelihood_grid(self, xs, thetas)


class GridLikelihood(LikelihoodPredictor, Protocol):
    """Predictors the posterior and metric computations accept"""

    def predict_grid(self, xs: SampleLike, thetas: SampleLike) -> np.ndarray:
        ...


@dataclass(frozen=True)
class ThetaGrid:
    """Cell-centred grid over the (uniform-prior) parameter box"""
    points: np.ndarray
    cell_volume: float
    low: np.ndarray
    high: np.ndarray

    @classmethod
    def from_box(cls, low: Sequence[float], high: Sequence[float], points_per_dim: int = 50) -> 'ThetaGrid':
        low = np.asarray(low, dtype=float).reshape(-1)
        high = np.asarray(high, dtype=float).reshape(-1)
        if low.shape != high.shape or np.any(low >= high):
            raise InputError(f"invalid parameter box low={low}, high={high}")
        if points_per_dim < 1:
            raise InputError("points_per_dim must be >= 1")
        steps = (high - low) / points_per_dim
        axes = [lo + (np.arange(points_per_dim) + 0.5) * h for lo, h in zip(low, steps)]
        mesh = np.meshgrid(*axes, indexing='ij')
        points = np.column_stack([m.reshape(-1) for m in mesh])
        return cls(points=points, cell_volume=float(np.prod(steps)), low=low, high=high)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    @property
    def box_volume(self) -> float:
        return float(np.prod(self.high - self.low))

    def standardize(self, thetas: np.ndarray) -> np.ndarray:
        """Min-max scale parameters so the box becomes the unit cube"""
        return (np.asarray(thetas, dtype=float) - self.low) / (self.high - self.low)


@dataclass(frozen=True)
class Posterior:
    values: np.ndarray
    flat: bool


def _check_truncation(model: LikelihoodModel, I: Optional[int], J: Optional[int]) -> Tuple[int, int]:
    I = model.I_selected if I is None else int(I)
    J = model.J_selected if J is None else int(J)
    if not 1 <= I <= model.I_kept:
        raise InputError(f"truncation I={I} outside 1..{model.I_kept}")
    if not 1 <= J <= model.J_kept:
        raise InputError(f"truncation J={J} outside 1..{model.J_kept}")
    return I, J


def fit_likelihood_coeffs(basis_x: SpectralBasis, basis_theta: SpectralBasis, joint: SampleSet) -> np.ndarray:
    """beta[j, i] = mean over training pairs of psi_j(x_k) phi_i(theta_k)"""
    joint = as_sample_set(joint)
    if not joint.has_thetas:
        raise InputError("joint sample needs theta labels")
    features_x = evaluate_basis_batch(basis_x, joint.without_thetas())
    features_theta = evaluate_basis_batch(basis_theta, joint.theta_samples())
    return features_x.T @ features_theta / joint.n


def fit_likelihood(joint: SampleSet, samples_G: SampleLike, kernel_x: KernelSpec, kernel_theta: KernelSpec,
                   I_max: int, J_max: int, clip_negative: bool = True) -> LikelihoodModel:
    joint = as_sample_set(joint)
    samples_G = as_sample_set(samples_G)
    if not joint.has_thetas:
        raise InputError("joint sample needs theta labels")
    if joint.d != samples_G.d:
        raise InputError(f"joint x has dimension {joint.d} but G sample has {samples_G.d}")

    basis_x = fit_basis(samples_G, kernel_x, J_max)
    basis_theta = fit_basis(joint.theta_samples(), kernel_theta, I_max)
    coeffs = fit_likelihood_coeffs(basis_x, basis_theta, joint)
    return LikelihoodModel(basis_x, basis_theta, coeffs, I_selected=basis_theta.J_kept,
                           J_selected=basis_x.J_kept, clip_negative=clip_negative)


def _clip(values: np.ndarray, clip: bool) -> np.ndarray:
    return np.maximum(values, 0.0) if clip else values


def predict_likelihood_grid(model: LikelihoodModel, xs: SampleLike, thetas: SampleLike,
                            I: Optional[int] = None, J: Optional[int] = None,
                            clip: Optional[bool] = None) -> np.ndarray:
    """Matrix of estimates with rows indexed by xs and columns by thetas"""
    I, J = _check_truncation(model, I, J)
    features_x = model.x_features(xs)[:, :J]
    features_theta = model.theta_features(thetas)[:, :I]
    values = features_x @ model.coeffs[:J, :I] @ features_theta.T
    return _clip(values, model.clip_negative if clip is None else clip)


def predict_likelihood_pairs(model: LikelihoodModel, xs: SampleLike, thetas: SampleLike,
                             I: Optional[int] = None, J: Optional[int] = None,
                             clip: Optional[bool] = None) -> np.ndarray:
    """Estimates at row-aligned (x_k, theta_k) pairs"""
    I, J = _check_truncation(model, I, J)
    xs, thetas = as_sample_set(xs), as_sample_set(thetas)
    if xs.n != thetas.n:
        raise InputError(f"{xs.n} points but {thetas.n} parameter rows")
    features_x = model.x_features(xs)[:, :J]
    features_theta = model.theta_features(thetas)[:, :I]
    values = np.sum((features_x @ model.coeffs[:J, :I]) * features_theta, axis=1)
    return _clip(values, model.clip_negative if clip is None else clip)


def predict_likelihood(model: LikelihoodModel, x, theta, I: Optional[int] = None, J: Optional[int] = None,
                       clip: Optional[bool] = None) -> float:
    point = as_point(x, model.basis_x.dim)
    param = as_point(theta, model.basis_theta.dim)
    return float(predict_likelihood_pairs(model, point[None, :], param[None, :], I, J, clip)[0])


def draw_permutations(n: int, B: int, seed: int) -> List[np.ndarray]:
    if B < 1:
        raise InputError(f"number of permutations B must be >= 1 (got {B})")
    rng = np.random.default_rng(seed)
    return [rng.permutation(n) for _ in range(B)]


def _validation_pairs(val_G: SampleLike, val_joint: SampleSet) -> Tuple[SampleSet, SampleSet]:
    val_G = as_sample_set(val_G).without_thetas()
    val_joint = as_sample_set(val_joint)
    if not val_joint.has_thetas:
        raise InputError("validation joint sample needs theta labels")
    if val_G.n != val_joint.n:
        raise InputError(f"validation G sample has {val_G.n} rows but joint sample has {val_joint.n}")
    return val_G, val_joint


def estimate_likelihood_loss(model: LikelihoodPredictor, val_G: SampleLike, val_joint: SampleSet,
                             B: int = DEFAULT_B, I: Optional[int] = None, J: Optional[int] = None,
                             seed: int = 0, permutations: Optional[Sequence[np.ndarray]] = None) -> float:
    """
    (1/B) sum_l mean_k L(xG_k; theta_perm_l(k))^2 - 2 mean_k L(xF_k; theta_k).
    `permutations` overrides the seeded draws.
    """
    val_G, val_joint = _validation_pairs(val_G, val_joint)
    if permutations is None:
        permutations = draw_permutations(val_joint.n, B, seed)
    elif len(permutations) < 1:
        raise InputError("at least one permutation is required")

    thetas = val_joint.thetas
    first = np.mean([np.mean(np.square(model.predict_pairs(val_G, thetas[perm], I, J)))
                     for perm in permutations])
    second = np.mean(model.predict_pairs(val_joint.without_thetas(), thetas, I, J))
    return float(first - 2.0 * second)


def _tensor_partial_sums(features_x: np.ndarray, coeffs: np.ndarray, features_theta: np.ndarray,
                         clip: bool) -> np.ndarray:
    """partial[k, J-1, I-1] = clipped double-truncated series at pair k"""
    terms = features_x[:, :, None] * coeffs[None, :, :] * features_theta[:, None, :]
    partial = np.cumsum(np.cumsum(terms, axis=1), axis=2)
    return _clip(partial, clip)


def likelihood_IJ_scan(model: LikelihoodModel, val_G: SampleLike, val_joint: SampleSet,
                       B: int = DEFAULT_B, seed: int = 0,
                       permutations: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
    """Estimated loss for every truncation; entry [J-1, I-1], one basis evaluation per point"""
    val_G, val_joint = _validation_pairs(val_G, val_joint)
    if permutations is None:
        permutations = draw_permutations(val_joint.n, B, seed)

    features_G = model.x_features(val_G)
    features_F = model.x_features(val_joint.without_thetas())
    features_theta = model.theta_features(val_joint.theta_samples())

    first = np.zeros((model.J_kept, model.I_kept))
    for perm in permutations:
        partial = _tensor_partial_sums(features_G, model.coeffs, features_theta[perm], model.clip_negative)
        first += np.mean(np.square(partial), axis=0)
    first /= len(permutations)

    partial_F = _tensor_partial_sums(features_F, model.coeffs, features_theta, model.clip_negative)
    return first - 2.0 * np.mean(partial_F, axis=0)


def select_likelihood_model(train_joint: SampleSet, train_G: SampleLike, val_joint: SampleSet,
                            val_G: SampleLike, eps_grid_x: Sequence[float], eps_grid_theta: Sequence[float],
                            I_max: int, J_max: int, B: int = DEFAULT_B, seed: int = 0,
                            clip_negative: bool = True,
                            stability: float = 0.0) -> Tuple[LikelihoodModel, LossReport]:
    """
    Fit one basis per bandwidth, scan (I, J) for every bandwidth pair and keep the
    smallest estimated loss; ties go to smaller I+J, then smaller bandwidths.
    A positive `stability` caps I and J at each basis' stable truncation.
    """
    train_joint = as_sample_set(train_joint)
    train_G = as_sample_set(train_G).without_thetas()
    val_G, val_joint = _validation_pairs(val_G, val_joint)
    grid_x = sorted(float(e) for e in eps_grid_x)
    grid_theta = sorted(float(e) for e in eps_grid_theta)
    if not grid_x or not grid_theta:
        raise InputError("bandwidth grids must be nonempty")

    start = time.perf_counter()
    permutations = draw_permutations(val_joint.n, B, seed)
    failures: List[Tuple[object, str]] = []

    def fit_all(samples: SampleSet, grid: List[float], J_cap: int, label: str) -> Dict[float, SpectralBasis]:
        bases = {}
        for eps in grid:
            try:
                bases[eps] = fit_basis(samples, KernelSpec(eps), J_cap)
            except SpectralError as e:
                logger.warning(f"{label} bandwidth eps={eps:g} skipped: {e}")
                failures.append(((label, eps), str(e)))
        return bases

    bases_x = fit_all(train_G, grid_x, J_max, 'x')
    bases_theta = fit_all(train_joint.theta_samples(), grid_theta, I_max, 'theta')

    rows: List[LossRow] = []
    models: Dict[Tuple[float, float], LikelihoodModel] = {}
    for eps_x, eps_theta in itertools.product(bases_x, bases_theta):
        basis_x, basis_theta = bases_x[eps_x], bases_theta[eps_theta]
        try:
            coeffs = fit_likelihood_coeffs(basis_x, basis_theta, train_joint)
            model = LikelihoodModel(basis_x, basis_theta, coeffs, I_selected=1, J_selected=1,
                                    clip_negative=clip_negative)
            losses = likelihood_IJ_scan(model, val_G, val_joint, permutations=permutations)
        except SpectralError as e:
            failures.append(((eps_x, eps_theta), str(e)))
            continue
        models[(eps_x, eps_theta)] = model
        J_stable, I_stable = stable_truncation(basis_x, stability), stable_truncation(basis_theta, stability)
        for (J, I) in itertools.product(range(1, J_stable + 1), range(1, I_stable + 1)):
            rows.append(LossRow(eps=eps_x, J=J, loss=float(losses[J - 1, I - 1]), I=I, eps_theta=eps_theta))

    finite = [row for row in rows if np.isfinite(row.loss)]
    if not finite:
        raise SelectionError("every bandwidth pair failed to fit", failures)

    selected = min(finite, key=lambda r: (r.loss, r.I + r.J, r.eps, r.eps_theta, r.J))
    model = replace(models[(selected.eps, selected.eps_theta)], I_selected=selected.I, J_selected=selected.J)

    duration = time.perf_counter() - start
    logger.info(f"likelihood model selected: eps_x={selected.eps:g}, eps_theta={selected.eps_theta:g}, "
                f"I={selected.I}, J={selected.J}, loss={selected.loss:.6g}")
    log_performance('likelihood', 'select_likelihood_model', duration,
                    {'grid_x': grid_x, 'grid_theta': grid_theta, 'B': B,
                     'selected': [selected.eps, selected.eps_theta, selected.I, selected.J]})
    return model, LossReport(rows=rows, selected=selected, grid=grid_x, failures=failures,
                             theta_grid=grid_theta)


def _normalize_log_posterior(log_values: np.ndarray, cell_volume: float) -> np.ndarray:
    log_total = logsumexp(log_values) + np.log(cell_volume)
    if not np.isfinite(log_total):
        raise NumericalError("posterior normalization failed")
    return np.exp(log_values - log_total)


def compute_posterior(model: GridLikelihood, observations: SampleLike, grid: ThetaGrid,
                      floor_lik: float = FLOOR_LIK) -> Posterior:
    """Product likelihood of the observed sample over the grid, normalized to integrate to 1"""
    observations = as_sample_set(observations)
    values = np.maximum(model.predict_grid(observations, grid.points), 0.0)
    log_values = np.sum(np.log(np.maximum(values, floor_lik)), axis=0)
    flat = bool(np.all(values <= floor_lik))
    if flat:
        logger.warning(f"likelihood is at the floor on the whole grid for {observations.n} observations; "
                       f"posterior is uninformative")
    return Posterior(values=_normalize_log_posterior(log_values, grid.cell_volume), flat=flat)


def sample_log_likelihood(model: GridLikelihood, observations: SampleLike, grid: ThetaGrid,
                          floor_lik: float = FLOOR_LIK) -> np.ndarray:
    return compute_posterior(model, observations, grid, floor_lik).values


def posterior_distance(posterior: np.ndarray, grid: ThetaGrid, theta_star) -> float:
    """Expected standardized Euclidean distance from theta_star under the posterior"""
    theta_star = as_point(theta_star, grid.p)
    distances = np.linalg.norm(grid.standardize(grid.points) - grid.standardize(theta_star), axis=1)
    return float(np.sum(distances * posterior) * grid.cell_volume)


def posterior_summary(posterior: np.ndarray, grid: ThetaGrid) -> Dict[str, np.ndarray]:
    """Posterior mean, per-component sd and the grid maximizer (the MLE under a uniform prior)"""
    weights = posterior * grid.cell_volume
    mean = weights @ grid.points
    sd = np.sqrt(np.maximum(weights @ np.square(grid.points - mean), 0.0))
    return {'mean': mean, 'sd': sd, 'map': grid.points[int(np.argmax(posterior))]}


def _normalized_at_truth(model: GridLikelihood, xs: SampleSet, thetas: np.ndarray,
                         grid: ThetaGrid) -> np.ndarray:
    values = np.maximum(model.predict_grid(xs, grid.points), 0.0)
    normalizers = values.sum(axis=1) * grid.cell_volume
    at_truth = np.maximum(model.predict_pairs(xs, thetas), 0.0)

    degenerate = normalizers <= 0
    if np.all(degenerate):
        raise NumericalError("estimated likelihood vanishes on the whole grid for every test point")
    if np.any(degenerate):
        logger.warning(f"{int(degenerate.sum())} test points have an all-zero likelihood; scored as flat")
    normalized = np.where(degenerate, 1.0 / grid.box_volume, at_truth / np.where(degenerate, 1.0, normalizers))
    return normalized


def average_likelihood(model: GridLikelihood, test_joint: SampleSet, grid: ThetaGrid) -> float:
    """
    Mean over test pairs of the theta-normalized likelihood at the true parameter,
    reported on the unit-standardized box so the flat baseline scores 1.
    """
    test_joint = as_sample_set(test_joint)
    if not test_joint.has_thetas:
        raise InputError("test sample needs theta labels")
    normalized = _normalized_at_truth(model, test_joint.without_thetas(), test_joint.thetas, grid)
    return float(np.mean(normalized) * grid.box_volume)


def average_distance_to_truth(model: GridLikelihood, test_joint: SampleSet, grid: ThetaGrid,
                              group_size: int = 1, floor_lik: float = FLOOR_LIK) -> float:
    """
    Mean posterior distance to the true parameter. Consecutive blocks of
    `group_size` rows form one observed sample and must share their theta.
    """
    test_joint = as_sample_set(test_joint)
    if not test_joint.has_thetas:
        raise InputError("test sample needs theta labels")
    if group_size < 1 or test_joint.n % group_size:
        raise InputError(f"{test_joint.n} test rows cannot be split into groups of {group_size}")

    distances = []
    for start in range(0, test_joint.n, group_size):
        block = test_joint.subset(np.arange(start, start + group_size))
        theta_star = block.thetas[0]
        if not np.all(block.thetas == theta_star):
            raise InputError(f"rows {start}..{start + group_size - 1} do not share one parameter value")
        posterior = sample_log_likelihood(model, block.without_thetas(), grid, floor_lik)
        distances.append(posterior_distance(posterior, grid, theta_star))
    return float(np.mean(distances))
