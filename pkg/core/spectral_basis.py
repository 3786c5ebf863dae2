"""
Spectral Basis
Eigendecomposition of the Gram matrix and Nystrom extension of its eigenvectors
"""

import time
from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy.linalg import eigh

from core.errors import DegenerateKernelError, InputError
from core.kernels import KernelSpec, SampleLike, SampleSet, as_point, as_sample_set, gram_matrix, kernel_block
from utils.logger import get_logger, log_performance

logger = get_logger(__name__)

EIGVAL_FLOOR_REL = 1e-10
GAP_WARN_REL = 1e-8


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SpectralBasis:
    """
    Empirical eigenbasis of the kernel operator.
    Columns of `eigvecs` have unit Euclidean norm; the Nystrom factor sqrt(n)
    makes the extended functions orthonormal in the empirical L2 of the training sample.
    """
    train_points: SampleSet
    eigvecs: np.ndarray
    eigvals: np.ndarray
    kernel: KernelSpec
    near_degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'eigvecs', _frozen(self.eigvecs))
        object.__setattr__(self, 'eigvals', _frozen(self.eigvals))
        if self.eigvecs.shape != (self.train_points.n, self.eigvals.size):
            raise InputError(
                f"eigenvector matrix has shape {self.eigvecs.shape}, expected "
                f"({self.train_points.n}, {self.eigvals.size})")

    @property
    def J_kept(self) -> int:
        return self.eigvals.size

    @property
    def n_train(self) -> int:
        return self.train_points.n

    @property
    def dim(self) -> int:
        return self.train_points.d

    def to_arrays(self, prefix: str) -> Dict[str, np.ndarray]:
        return {
            f'{prefix}train_points': self.train_points.points,
            f'{prefix}eigvecs': np.asarray(self.eigvecs),
            f'{prefix}eigvals': np.asarray(self.eigvals),
        }


def _apply_sign_convention(eigvecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column positive (lowest index wins ties)"""
    lead = np.argmax(np.abs(eigvecs), axis=0)
    signs = np.sign(eigvecs[lead, np.arange(eigvecs.shape[1])])
    signs[signs == 0] = 1.0
    return eigvecs * signs


def fit_basis(samples_G: SampleLike, kernel: KernelSpec, J_max: int) -> SpectralBasis:
    """Top eigenpairs of the Gram matrix of `samples_G` above the eigenvalue floor"""
    samples_G = as_sample_set(samples_G)
    if J_max < 1:
        raise InputError(f"J_max must be >= 1 (got {J_max})")
    if samples_G.n < 2:
        raise InputError(f"fitting a basis needs at least two points (got {samples_G.n})")

    start = time.perf_counter()
    gram = gram_matrix(kernel, samples_G)
    eigvals, eigvecs = eigh(gram)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]

    top = eigvals[0]
    if not np.isfinite(top) or top <= 0:
        raise DegenerateKernelError(
            f"Gram matrix has no positive eigenvalue at eps={kernel.bandwidth_eps:g}")
    floor = EIGVAL_FLOOR_REL * top
    n_positive = int(np.count_nonzero(eigvals > floor))
    if n_positive == 0:
        raise DegenerateKernelError(
            f"every eigenvalue is below the floor {floor:.3g} at eps={kernel.bandwidth_eps:g}")

    J_kept = min(J_max, n_positive)
    eigvals = eigvals[:J_kept]
    eigvecs = _apply_sign_convention(eigvecs[:, :J_kept])

    gaps = -np.diff(eigvals)
    near_degenerate = bool(np.any(gaps < GAP_WARN_REL * top))
    if near_degenerate:
        logger.warning(
            f"near-degenerate eigenvalues at eps={kernel.bandwidth_eps:g}: "
            f"smallest gap {gaps.min():.3g} below {GAP_WARN_REL * top:.3g}")

    duration = time.perf_counter() - start
    logger.debug(f"basis fit: n={samples_G.n}, eps={kernel.bandwidth_eps:g}, J_kept={J_kept} "
                 f"in {duration * 1000:.1f} ms")
    log_performance('spectral_basis', 'fit_basis', duration,
                    {'n': samples_G.n, 'eps': kernel.bandwidth_eps, 'J_kept': J_kept})

    return SpectralBasis(train_points=samples_G, eigvecs=eigvecs, eigvals=eigvals,
                         kernel=kernel, near_degenerate=near_degenerate)


def stable_truncation(basis: SpectralBasis, factor: float = 1.0) -> int:
    """
    Number of leading components with Gram eigenvalue >= factor * sqrt(n), at least one.
    The Nystrom gain sqrt(n)/l_j stays below 1/factor on those; factor <= 0 keeps every component.
    """
    if factor <= 0:
        return basis.J_kept
    threshold = factor * np.sqrt(basis.n_train)
    return max(1, int(np.count_nonzero(basis.eigvals >= threshold)))


def evaluate_basis_batch(basis: SpectralBasis, xs: SampleLike) -> np.ndarray:
    """Nystrom extension: row i, column j is sqrt(n)/l_j * sum_k psi_j[k] K(x_i, x_k)"""
    xs = as_sample_set(xs)
    if xs.d != basis.dim:
        raise InputError(f"points have dimension {xs.d}, basis expects {basis.dim}")
    block = kernel_block(basis.kernel, xs, basis.train_points)
    return (block @ basis.eigvecs) * (np.sqrt(basis.n_train) / basis.eigvals)


def evaluate_basis(basis: SpectralBasis, x) -> np.ndarray:
    point = as_point(x, basis.dim)
    return evaluate_basis_batch(basis, point[None, :])[0]
