"""
Density Ratio Estimation
Spectral series estimator of f(x)/g(x) with held-out loss and (eps, J) selection
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np

from core.errors import InputError, SelectionError, SpectralError
from core.kernels import KernelSpec, SampleLike, Standardizer, as_point, as_sample_set
from core.spectral_basis import SpectralBasis, evaluate_basis_batch, fit_basis, stable_truncation
from utils.logger import get_logger, log_performance

logger = get_logger(__name__)

DEFAULT_STABILITY = 1.0


class RatioPredictor(Protocol):
    """Anything that maps a batch of points to ratio estimates"""

    def predict(self, xs: SampleLike, J: Optional[int] = None) -> np.ndarray:
        ...


@dataclass(frozen=True)
class RatioModel:
    basis: SpectralBasis
    coeffs: np.ndarray
    J_selected: int
    clip_negative: bool = True
    standardizer: Optional[Standardizer] = None

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float, copy=True).reshape(-1)
        if coeffs.size != self.basis.J_kept:
            raise InputError(f"{coeffs.size} coefficients for a basis with {self.basis.J_kept} components")
        if not np.all(np.isfinite(coeffs)):
            raise InputError("ratio coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, 'coeffs', coeffs)
        if not 1 <= self.J_selected <= self.basis.J_kept:
            raise InputError(f"J_selected={self.J_selected} outside 1..{self.basis.J_kept}")

    @property
    def J_kept(self) -> int:
        return self.basis.J_kept

    def features(self, xs: SampleLike) -> np.ndarray:
        """Basis evaluations of (standardized) inputs"""
        xs = as_sample_set(xs)
        if self.standardizer is not None:
            xs = self.standardizer.transform(xs)
        return evaluate_basis_batch(self.basis, xs)

    def predict(self, xs: SampleLike, J: Optional[int] = None) -> np.ndarray:
        return predict_ratio_batch(self, xs, J)


@dataclass(frozen=True)
class LossRow:
    eps: float
    J: int
    loss: float
    I: Optional[int] = None
    eps_theta: Optional[float] = None


@dataclass
class LossReport:
    """Estimated loss for every evaluated configuration plus the selected one"""
    rows: List[LossRow]
    selected: LossRow
    grid: List[float]
    failures: List[Tuple[float, str]] = field(default_factory=list)
    theta_grid: Optional[List[float]] = None

    @property
    def per_J(self) -> List[Tuple[int, float]]:
        """(J, loss) pairs at the selected bandwidth"""
        return [(row.J, row.loss) for row in self.rows
                if row.eps == self.selected.eps and row.eps_theta == self.selected.eps_theta
                and row.I == self.selected.I]


def _check_J(model: RatioModel, J: Optional[int]) -> int:
    J = model.J_selected if J is None else int(J)
    if not 1 <= J <= model.J_kept:
        raise InputError(f"truncation J={J} outside 1..{model.J_kept}")
    return J


def fit_ratio_coeffs(basis: SpectralBasis, samples_F: SampleLike) -> np.ndarray:
    """beta_j = mean over the F sample of the j-th basis function"""
    samples_F = as_sample_set(samples_F)
    return evaluate_basis_batch(basis, samples_F).mean(axis=0)


def predict_ratio_batch(model: RatioModel, xs: SampleLike, J: Optional[int] = None,
                        clip: Optional[bool] = None) -> np.ndarray:
    J = _check_J(model, J)
    series = model.features(xs)[:, :J] @ model.coeffs[:J]
    clip = model.clip_negative if clip is None else clip
    return np.maximum(series, 0.0) if clip else series


def predict_ratio(model: RatioModel, x, J: Optional[int] = None, clip: Optional[bool] = None) -> float:
    point = as_point(x, model.basis.dim)
    return float(predict_ratio_batch(model, point[None, :], J, clip)[0])


def ratio_loss_from_predictions(pred_G: np.ndarray, pred_F: np.ndarray) -> float:
    """mean(b(x_G)^2) - 2 mean(b(x_F)): the L2 loss up to a constant"""
    return float(np.mean(np.square(pred_G)) - 2.0 * np.mean(pred_F))


def estimate_ratio_loss(model: RatioPredictor, val_G: SampleLike, val_F: SampleLike,
                        J: Optional[int] = None) -> float:
    val_G = as_sample_set(val_G)
    val_F = as_sample_set(val_F)
    return ratio_loss_from_predictions(model.predict(val_G, J), model.predict(val_F, J))


def _scan_losses(features_G: np.ndarray, features_F: np.ndarray, coeffs: np.ndarray,
                 clip: bool) -> np.ndarray:
    # running partial sums S_J = S_{J-1} + b_J psi_J, clipped per J
    partial_G = np.cumsum(features_G * coeffs, axis=1)
    partial_F = np.cumsum(features_F * coeffs, axis=1)
    if clip:
        partial_G = np.maximum(partial_G, 0.0)
        partial_F = np.maximum(partial_F, 0.0)
    return np.mean(np.square(partial_G), axis=0) - 2.0 * np.mean(partial_F, axis=0)


def ratio_J_scan(model: RatioModel, val_G: SampleLike, val_F: SampleLike) -> np.ndarray:
    """Estimated loss for J = 1..J_kept (entry J-1) from one basis evaluation per point"""
    features_G = model.features(val_G)
    features_F = model.features(val_F)
    return _scan_losses(features_G, features_F, model.coeffs, model.clip_negative)


def _select_argmin(candidates: Sequence[Tuple[float, int, float]]) -> int:
    """Index of the smallest loss; ties go to smaller J, then smaller eps"""
    best = None
    for index, (loss, J, eps) in enumerate(candidates):
        if not np.isfinite(loss):
            continue
        key = (loss, J, eps)
        if best is None or key < best[0]:
            best = (key, index)
    if best is None:
        raise SelectionError("no configuration produced a finite loss", [])
    return best[1]


def select_ratio_model(train_G: SampleLike, train_F: SampleLike, val_G: SampleLike, val_F: SampleLike,
                       eps_grid: Sequence[float], J_max: int, clip_negative: bool = True,
                       n_jobs: int = 1, stability: float = DEFAULT_STABILITY) -> Tuple[RatioModel, LossReport]:
    """
    Fit one basis per bandwidth, scan J up to the basis' stable truncation and keep
    the (eps, J) with the smallest estimated loss
    """
    train_G, train_F = as_sample_set(train_G), as_sample_set(train_F)
    val_G, val_F = as_sample_set(val_G), as_sample_set(val_F)
    grid = sorted(float(eps) for eps in eps_grid)
    if not grid:
        raise InputError("bandwidth grid is empty")
    if J_max < 1:
        raise InputError(f"J_max must be >= 1 (got {J_max})")

    start = time.perf_counter()

    def fit_one(eps: float):
        basis = fit_basis(train_G, KernelSpec(eps), J_max)
        model = RatioModel(basis, fit_ratio_coeffs(basis, train_F), J_selected=1,
                           clip_negative=clip_negative)
        J_stable = stable_truncation(basis, stability)
        if J_stable < basis.J_kept:
            logger.debug(f"eps={eps:g}: scanning J <= {J_stable} of {basis.J_kept} kept components")
        return model, ratio_J_scan(model, val_G, val_F)[:J_stable]

    def guarded(eps: float):
        try:
            return fit_one(eps)
        except SpectralError as e:
            logger.warning(f"bandwidth eps={eps:g} skipped: {e}")
            return e

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as executor:
            outcomes = list(executor.map(guarded, grid))
    else:
        outcomes = [guarded(eps) for eps in grid]

    rows: List[LossRow] = []
    fitted = []
    failures: List[Tuple[float, str]] = []
    for eps, outcome in zip(grid, outcomes):
        if isinstance(outcome, Exception):
            failures.append((eps, str(outcome)))
            continue
        model, losses = outcome
        fitted.append((eps, model, losses))
        rows.extend(LossRow(eps=eps, J=J, loss=float(loss)) for J, loss in enumerate(losses, start=1))

    if not fitted:
        raise SelectionError("every bandwidth failed to fit", failures)

    candidates = [(row.loss, row.J, row.eps) for row in rows]
    selected = rows[_select_argmin(candidates)]
    model = next(m for eps, m, _ in fitted if eps == selected.eps)
    model = replace(model, J_selected=selected.J)

    duration = time.perf_counter() - start
    logger.info(f"ratio model selected: eps={selected.eps:g}, J={selected.J}, loss={selected.loss:.6g}")
    log_performance('ratio', 'select_ratio_model', duration,
                    {'grid': grid, 'J_max': J_max, 'stability': stability,
                     'selected_eps': selected.eps, 'selected_J': selected.J})
    return model, LossReport(rows=rows, selected=selected, grid=grid, failures=failures)
