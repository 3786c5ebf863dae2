"""
Model Persistence
Fitted ratio and likelihood models as versioned .npz archives with a JSON header
"""

import json
import zipfile
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from core import __version__
from core.errors import CorruptModelFileError, InputError, ModelFileError, ModelVersionError
from core.kernels import KernelSpec, SampleSet, Standardizer
from core.likelihood import LikelihoodModel
from core.ratio import RatioModel
from core.spectral_basis import SpectralBasis
from utils.logger import get_logger

logger = get_logger(__name__)

MODEL_FORMAT_VERSION = '1.0'
HEADER_KEY = 'header'

Model = Union[RatioModel, LikelihoodModel]


def _major(version: str) -> int:
    try:
        return int(str(version).split('.')[0])
    except ValueError as e:
        raise CorruptModelFileError(f"unreadable format version '{version}'") from e


def _basis_header(basis: SpectralBasis) -> Dict:
    return {'kernel': basis.kernel.to_dict(), 'near_degenerate': bool(basis.near_degenerate)}


def _basis_from(arrays: Dict[str, np.ndarray], header: Dict, prefix: str) -> SpectralBasis:
    return SpectralBasis(
        train_points=SampleSet(arrays[f'{prefix}train_points']),
        eigvecs=arrays[f'{prefix}eigvecs'],
        eigvals=arrays[f'{prefix}eigvals'],
        kernel=KernelSpec.from_dict(header['kernel']),
        near_degenerate=bool(header.get('near_degenerate', False)),
    )


def save_model(path: Path, model: Model, provenance: Optional[Dict] = None) -> Path:
    """Write a model with its kernels, bases, coefficients, truncations and provenance"""
    path = Path(path)
    header = {
        'format_version': MODEL_FORMAT_VERSION,
        'library_version': __version__,
        'provenance': provenance or {},
        'clip_negative': bool(model.clip_negative),
        'standardizer': model.standardizer.to_dict() if model.standardizer is not None else None,
    }

    if isinstance(model, RatioModel):
        header.update(kind='ratio', J_selected=int(model.J_selected), basis=_basis_header(model.basis))
        arrays = {**model.basis.to_arrays('x_'), 'coeffs': np.asarray(model.coeffs)}
    elif isinstance(model, LikelihoodModel):
        header.update(kind='likelihood', I_selected=int(model.I_selected), J_selected=int(model.J_selected),
                      basis=_basis_header(model.basis_x), basis_theta=_basis_header(model.basis_theta),
                      param_box=[list(b) for b in model.param_box] if model.param_box is not None else None)
        arrays = {**model.basis_x.to_arrays('x_'), **model.basis_theta.to_arrays('theta_'),
                  'coeffs': np.asarray(model.coeffs)}
    else:
        raise InputError(f"cannot save object of type {type(model).__name__}")

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as handle:
        np.savez_compressed(handle, **{HEADER_KEY: np.array(json.dumps(header, sort_keys=True))}, **arrays)
    logger.info(f"saved {header['kind']} model to {path}")
    return path


def read_model_file(path: Path) -> Tuple[Dict, Dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise ModelFileError(f"model file not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {key: archive[key] for key in archive.files}
        header = json.loads(str(arrays.pop(HEADER_KEY)))
    except (zipfile.BadZipFile, EOFError, OSError, ValueError, KeyError) as e:
        raise CorruptModelFileError(f"{path}: not a readable model file ({e})") from e

    version = header.get('format_version')
    if version is None:
        raise CorruptModelFileError(f"{path}: header has no format version")
    if _major(version) > _major(MODEL_FORMAT_VERSION):
        raise ModelVersionError(
            f"{path}: format {version} is newer than supported {MODEL_FORMAT_VERSION}; upgrade the package")
    return header, arrays


def load_model(path: Path, expected_kind: Optional[str] = None) -> Model:
    header, arrays = read_model_file(path)
    kind = header.get('kind')
    if expected_kind is not None and kind != expected_kind:
        raise ModelFileError(f"{path}: holds a {kind} model, expected {expected_kind}")

    standardizer = header.get('standardizer')
    standardizer = Standardizer.from_dict(standardizer) if standardizer else None
    try:
        basis_x = _basis_from(arrays, header['basis'], 'x_')
        if kind == 'ratio':
            model = RatioModel(basis_x, arrays['coeffs'], J_selected=header['J_selected'],
                               clip_negative=header['clip_negative'], standardizer=standardizer)
        elif kind == 'likelihood':
            model = LikelihoodModel(basis_x, _basis_from(arrays, header['basis_theta'], 'theta_'),
                                    arrays['coeffs'], I_selected=header['I_selected'],
                                    J_selected=header['J_selected'], clip_negative=header['clip_negative'],
                                    standardizer=standardizer, param_box=header.get('param_box'))
        else:
            raise CorruptModelFileError(f"{path}: unknown model kind '{kind}'")
    except (KeyError, TypeError, InputError) as e:
        raise CorruptModelFileError(f"{path}: inconsistent model contents ({e})") from e

    logger.debug(f"loaded {kind} model from {path} (format {header['format_version']})")
    return model


def model_provenance(path: Path) -> Dict:
    header, _ = read_model_file(path)
    return header.get('provenance', {})
