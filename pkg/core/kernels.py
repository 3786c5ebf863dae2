"""
Kernels and Gram matrices
Positive-definite kernels on the ambient space and the sample containers they act on
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from core.errors import InputError
from utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_GRID_QUANTILES = (0.05, 0.10, 0.25, 0.50, 0.75)


class KernelFamily(str, Enum):
    GAUSSIAN = 'gaussian'


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus bandwidth; K(z, y) = exp(-|z - y|^2 / (4 eps)) for the Gaussian"""
    bandwidth_eps: float
    family: KernelFamily = KernelFamily.GAUSSIAN

    def __post_init__(self):
        eps = float(self.bandwidth_eps)
        if not np.isfinite(eps) or eps <= 0:
            raise InputError(f"kernel bandwidth must be positive and finite (got {self.bandwidth_eps!r})")
        object.__setattr__(self, 'bandwidth_eps', eps)
        object.__setattr__(self, 'family', KernelFamily(self.family))

    def from_sq_distances(self, sq_dist: np.ndarray) -> np.ndarray:
        """Apply the kernel profile to squared Euclidean distances"""
        if self.family is KernelFamily.GAUSSIAN:
            return np.exp(-sq_dist / (4.0 * self.bandwidth_eps))
        raise InputError(f"unsupported kernel family {self.family}")

    def to_dict(self) -> Dict:
        return {'family': self.family.value, 'bandwidth_eps': self.bandwidth_eps}

    @classmethod
    def from_dict(cls, data: Dict) -> 'KernelSpec':
        return cls(bandwidth_eps=float(data['bandwidth_eps']), family=KernelFamily(data['family']))


@dataclass(frozen=True)
class SampleSet:
    """
    n x d matrix of points with optional n x p parameter labels.
    Rows of `points` and `thetas` are paired by index.
    """
    points: np.ndarray
    thetas: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        points = _as_matrix(self.points, 'points')
        object.__setattr__(self, 'points', points)
        if self.thetas is not None:
            thetas = _as_matrix(self.thetas, 'thetas')
            if thetas.shape[0] != points.shape[0]:
                raise InputError(
                    f"theta labels have {thetas.shape[0]} rows but points have {points.shape[0]}")
            object.__setattr__(self, 'thetas', thetas)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def p(self) -> int:
        return 0 if self.thetas is None else self.thetas.shape[1]

    @property
    def has_thetas(self) -> bool:
        return self.thetas is not None

    def subset(self, index: np.ndarray) -> 'SampleSet':
        thetas = None if self.thetas is None else self.thetas[index]
        return SampleSet(self.points[index], thetas)

    def theta_samples(self) -> 'SampleSet':
        """The parameter labels as a sample set of their own"""
        if self.thetas is None:
            raise InputError("sample set carries no theta labels")
        return SampleSet(self.thetas)

    def without_thetas(self) -> 'SampleSet':
        return SampleSet(self.points)


SampleLike = Union[SampleSet, np.ndarray, Sequence[Sequence[float]]]


def _as_matrix(values, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim == 1:
        array = array[:, None]
    if array.ndim != 2:
        raise InputError(f"{name} must be a 2-d matrix (got shape {array.shape})")
    if array.shape[0] < 1 or array.shape[1] < 1:
        raise InputError(f"{name} must have at least one row and one column (got shape {array.shape})")
    if not np.all(np.isfinite(array)):
        raise InputError(f"{name} contains non-finite entries")
    return array


def as_sample_set(samples: SampleLike) -> SampleSet:
    if isinstance(samples, SampleSet):
        return samples
    return SampleSet(np.asarray(samples, dtype=float))


def as_point(x, d: Optional[int] = None) -> np.ndarray:
    """Validate a single point; `d` checks the dimension when given"""
    point = np.asarray(x, dtype=float).reshape(-1)
    if point.size == 0:
        raise InputError("point has no coordinates")
    if not np.all(np.isfinite(point)):
        raise InputError("point contains non-finite coordinates")
    if d is not None and point.size != d:
        raise InputError(f"point has dimension {point.size}, expected {d}")
    return point


def eval_kernel(spec: KernelSpec, z, y) -> float:
    z = as_point(z)
    y = as_point(y)
    if z.size != y.size:
        raise InputError(f"dimension mismatch: {z.size} vs {y.size}")
    diff = z - y
    return float(spec.from_sq_distances(np.dot(diff, diff)))


def gram_matrix(spec: KernelSpec, samples: SampleLike) -> np.ndarray:
    """Symmetric n x n matrix of kernel values with unit diagonal"""
    points = as_sample_set(samples).points
    n = points.shape[0]
    if n == 1:
        return np.ones((1, 1))
    # condensed distances fill one triangle; squareform mirrors it and zeroes the diagonal
    gram = squareform(spec.from_sq_distances(pdist(points, 'sqeuclidean')))
    np.fill_diagonal(gram, 1.0)
    return gram


def kernel_block(spec: KernelSpec, xs: SampleLike, ys: SampleLike) -> np.ndarray:
    """m x n matrix K(xs[i], ys[j])"""
    a = as_sample_set(xs).points
    b = as_sample_set(ys).points
    if a.shape[1] != b.shape[1]:
        raise InputError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return spec.from_sq_distances(cdist(a, b, 'sqeuclidean'))


def bandwidth_grid(samples: SampleLike,
                   quantiles: Sequence[float] = DEFAULT_GRID_QUANTILES,
                   subsample: int = 1000,
                   seed: int = 0) -> np.ndarray:
    """
    Candidate bandwidths: quantiles of squared pairwise distances on a
    subsample of min(n, subsample) points, divided by 4.
    """
    points = as_sample_set(samples).points
    if points.shape[0] < 2:
        raise InputError("bandwidth grid needs at least two points")
    if points.shape[0] > subsample:
        rng = np.random.default_rng(seed)
        points = points[np.sort(rng.choice(points.shape[0], size=subsample, replace=False))]

    sq_dist = pdist(points, 'sqeuclidean')
    grid = np.quantile(sq_dist, np.asarray(quantiles, dtype=float)) / 4.0
    grid = np.unique(grid[grid > 0])
    if grid.size == 0:
        raise InputError("all sampled points coincide; cannot derive a bandwidth grid")

    logger.debug(f"bandwidth grid from {points.shape[0]} points: {np.array2string(grid, precision=4)}")
    return grid


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-scoring with statistics from a training split"""
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, samples: SampleLike) -> 'Standardizer':
        points = as_sample_set(samples).points
        scale = points.std(axis=0)
        scale[scale == 0] = 1.0
        return cls(mean=points.mean(axis=0), scale=scale)

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.mean.size:
            raise InputError(f"points have dimension {points.shape[-1]}, standardizer expects {self.mean.size}")
        return (points - self.mean) / self.scale

    def transform(self, samples: SampleLike) -> SampleSet:
        samples = as_sample_set(samples)
        return SampleSet(self.transform_points(samples.points), samples.thetas)

    def to_dict(self) -> Dict:
        return {'mean': self.mean.tolist(), 'scale': self.scale.tolist()}

    @classmethod
    def from_dict(cls, data: Dict) -> 'Standardizer':
        return cls(mean=np.asarray(data['mean'], dtype=float), scale=np.asarray(data['scale'], dtype=float))
