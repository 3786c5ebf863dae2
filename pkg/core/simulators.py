"""
Benchmark Simulators
Spiral, Klein bottle and binary-edge image models, plus Gaussian-shift fixtures
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import InputError
from core.kernels import SampleSet
from utils.logger import get_logger

logger = get_logger(__name__)

TWO_PI = 2.0 * np.pi
EDGE_SIZE = 20
EDGE_MAX_SHIFT = 8.0
# noise scales are variances in the model definitions; converted to sd below
EDGE_ANGLE_SD = np.sqrt(np.pi / 4.0)
EDGE_SHIFT_SD = np.sqrt(0.5)


class SimulatorModel(str, Enum):
    SPIRAL = 'spiral'
    KLEIN_BOTTLE = 'klein_bottle'
    EDGES = 'edges'
    GAUSSIAN_SHIFT = 'gaussian_shift'


DEFAULT_BOXES: Dict[SimulatorModel, List[Tuple[float, float]]] = {
    SimulatorModel.SPIRAL: [(0.0, 15.0)],
    SimulatorModel.KLEIN_BOTTLE: [(0.0, TWO_PI), (0.0, TWO_PI)],
    SimulatorModel.EDGES: [(0.0, TWO_PI), (-5.0, 5.0)],
    SimulatorModel.GAUSSIAN_SHIFT: [(-2.0, 2.0)],
}

DEFAULT_NOISE: Dict[SimulatorModel, Dict[str, float]] = {
    SimulatorModel.SPIRAL: {'sd': 1.0},
    SimulatorModel.KLEIN_BOTTLE: {'sd': 1.0},
    SimulatorModel.EDGES: {'angle_sd': EDGE_ANGLE_SD, 'shift_sd': EDGE_SHIFT_SD},
    SimulatorModel.GAUSSIAN_SHIFT: {'sd': 1.0},
}


@dataclass(frozen=True)
class SimulatorSpec:
    """Model choice, uniform-prior parameter box and noise scales"""
    model: SimulatorModel
    param_box: Tuple[Tuple[float, float], ...] = ()
    noise: Dict[str, float] = field(default_factory=dict)
    dim: int = 1
    seed: int = 0

    def __post_init__(self):
        model = SimulatorModel(self.model)
        object.__setattr__(self, 'model', model)
        box = tuple(tuple(map(float, b)) for b in (self.param_box or DEFAULT_BOXES[model]))
        if len(box) != len(DEFAULT_BOXES[model]):
            raise InputError(f"{model.value} takes {len(DEFAULT_BOXES[model])} parameters, box has {len(box)}")
        for low, high in box:
            if not low <= high:
                raise InputError(f"parameter box bound low={low} exceeds high={high}")
        object.__setattr__(self, 'param_box', box)
        noise = {**DEFAULT_NOISE[model], **(self.noise or {})}
        if any(v <= 0 for v in noise.values()):
            raise InputError(f"noise scales must be positive (got {noise})")
        object.__setattr__(self, 'noise', noise)
        if self.dim < 1:
            raise InputError("dimension must be >= 1")

    @property
    def p(self) -> int:
        return len(self.param_box)

    @property
    def low(self) -> np.ndarray:
        return np.array([b[0] for b in self.param_box])

    @property
    def high(self) -> np.ndarray:
        return np.array([b[1] for b in self.param_box])

    def to_dict(self) -> Dict:
        return {'model': self.model.value, 'param_box': [list(b) for b in self.param_box],
                'noise': dict(self.noise), 'dim': self.dim, 'seed': self.seed}


def _streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for parameter draws and for simulator noise"""
    param_seq, data_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(param_seq), np.random.default_rng(data_seq)


def truncated_normal(rng: np.random.Generator, loc, scale: float, low, high, size: int) -> np.ndarray:
    """N(loc, scale^2) restricted to [low, high] by rejection"""
    loc = np.broadcast_to(np.asarray(loc, dtype=float), (size,))
    low = np.broadcast_to(np.asarray(low, dtype=float), (size,))
    high = np.broadcast_to(np.asarray(high, dtype=float), (size,))
    if np.any(low > high):
        raise InputError("truncation bounds are empty")
    out = np.empty(size)
    pending = np.arange(size)
    while pending.size:
        draws = rng.normal(loc[pending], scale)
        ok = (draws >= low[pending]) & (draws <= high[pending])
        out[pending[ok]] = draws[ok]
        pending = pending[~ok]
    return out


def _check_count(n: int):
    if n < 1:
        raise InputError(f"sample size must be >= 1 (got {n})")


def _spiral_points(theta: np.ndarray, sd: float, rng: np.random.Generator) -> np.ndarray:
    center = np.column_stack([theta * np.cos(theta), theta * np.sin(theta)])
    return center + sd * rng.normal(size=center.shape)


def _klein_points(theta1: np.ndarray, theta2: np.ndarray, sd: float, rng: np.random.Generator) -> np.ndarray:
    radius = 2.0 * (np.cos(theta2) + 1.0)
    center = np.column_stack([
        radius * np.cos(theta1),
        radius * np.sin(theta1),
        2.0 * np.sin(theta2) * np.cos(theta1 / 2.0),
        2.0 * np.sin(theta2) * np.sin(theta1 / 2.0),
    ])
    return center + sd * rng.normal(size=center.shape)


def _pixel_centres() -> Tuple[np.ndarray, np.ndarray]:
    """Row-major pixel centres relative to the image centre, y pointing up"""
    offsets = np.arange(EDGE_SIZE) + 0.5 - EDGE_SIZE / 2.0
    cols, rows = np.meshgrid(offsets, offsets, indexing='xy')
    return cols.reshape(-1), -rows.reshape(-1)


def rasterize_edge(angle: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Pixels whose centre lies below `shift` along the unit normal at `angle` are 1"""
    angle = np.atleast_1d(np.asarray(angle, dtype=float))
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    x, y = _pixel_centres()
    projection = np.cos(angle)[:, None] * x[None, :] + np.sin(angle)[:, None] * y[None, :]
    return (projection < shift[:, None]).astype(float)


def _edge_images(alpha: np.ndarray, lam: np.ndarray, angle_sd: float, shift_sd: float,
                 rng: np.random.Generator) -> np.ndarray:
    n = alpha.size
    angle = alpha + angle_sd * rng.normal(size=n)
    shift = lam + truncated_normal(rng, 0.0, shift_sd, -EDGE_MAX_SHIFT - lam, EDGE_MAX_SHIFT - lam, n)
    return rasterize_edge(angle, shift)


def simulate_spiral(theta: float, n: int, seed: int = 0, noise_sd: float = 1.0) -> SampleSet:
    _check_count(n)
    if not 0.0 < theta < 15.0:
        raise InputError(f"spiral parameter must lie in (0, 15) (got {theta})")
    _, rng = _streams(seed)
    return SampleSet(_spiral_points(np.full(n, float(theta)), noise_sd, rng))


def simulate_klein(theta1: float, theta2: float, n: int, seed: int = 0, noise_sd: float = 1.0) -> SampleSet:
    _check_count(n)
    for name, value in (('theta1', theta1), ('theta2', theta2)):
        if not 0.0 < value < TWO_PI:
            raise InputError(f"Klein bottle {name} must lie in (0, 2 pi) (got {value})")
    _, rng = _streams(seed)
    return SampleSet(_klein_points(np.full(n, float(theta1)), np.full(n, float(theta2)), noise_sd, rng))


def simulate_edges(alpha: float, lam: float, n: int, seed: int = 0,
                   angle_sd: float = EDGE_ANGLE_SD, shift_sd: float = EDGE_SHIFT_SD,
                   lambda_box: Tuple[float, float] = (-5.0, 5.0)) -> SampleSet:
    """20 x 20 binary edge images flattened row-major; zero noise scales give the exact edge"""
    _check_count(n)
    if not lambda_box[0] <= lam <= lambda_box[1]:
        raise InputError(f"edge displacement must lie in [{lambda_box[0]}, {lambda_box[1]}] (got {lam})")
    _, rng = _streams(seed)
    return SampleSet(_edge_images(np.full(n, float(alpha)), np.full(n, float(lam)), angle_sd, shift_sd, rng))


def simulate_gaussian_shift(mu: float, n: int, d: int = 1, seed: int = 0) -> SampleSet:
    """i.i.d. N(mu, I_d); in 1-d the ratio against N(0, 1) is exp(mu x - mu^2 / 2)"""
    _check_count(n)
    _, rng = _streams(seed)
    return SampleSet(rng.normal(loc=mu, scale=1.0, size=(n, d)))


def gaussian_shift_ratio(x: np.ndarray, mu: float) -> np.ndarray:
    """True density ratio N(mu, I) / N(0, I) at the rows of x"""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.exp(mu * x.sum(axis=1) - x.shape[1] * mu ** 2 / 2.0)


def _simulate_rows(spec: SimulatorSpec, thetas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    noise = spec.noise
    if spec.model is SimulatorModel.SPIRAL:
        return _spiral_points(thetas[:, 0], noise['sd'], rng)
    if spec.model is SimulatorModel.KLEIN_BOTTLE:
        return _klein_points(thetas[:, 0], thetas[:, 1], noise['sd'], rng)
    if spec.model is SimulatorModel.EDGES:
        return _edge_images(thetas[:, 0], thetas[:, 1], noise['angle_sd'], noise['shift_sd'], rng)
    return thetas[:, :1] + noise['sd'] * rng.normal(size=(thetas.shape[0], spec.dim))


def simulate_joint(spec: SimulatorSpec, n: int, seed: Optional[int] = None) -> SampleSet:
    """theta_k ~ Uniform(box), x_k ~ model(theta_k): one data row per parameter draw"""
    _check_count(n)
    param_rng, data_rng = _streams(spec.seed if seed is None else seed)
    thetas = param_rng.uniform(spec.low, spec.high, size=(n, spec.p))
    points = _simulate_rows(spec, thetas, data_rng)
    logger.debug(f"simulated {n} draws from {spec.model.value}")
    return SampleSet(points, thetas)


def simulate_at(spec: SimulatorSpec, theta: Sequence[float], m: int, seed: int) -> SampleSet:
    """m observations at one fixed parameter, labelled with it"""
    _check_count(m)
    theta = np.asarray(theta, dtype=float).reshape(1, -1)
    if theta.shape[1] != spec.p:
        raise InputError(f"{spec.model.value} takes {spec.p} parameters (got {theta.shape[1]})")
    _, data_rng = _streams(seed)
    thetas = np.repeat(theta, m, axis=0)
    return SampleSet(_simulate_rows(spec, thetas, data_rng), thetas)
