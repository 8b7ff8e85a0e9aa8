"""
Report and artifact files: report.json, normalizers.json and q.json.

All documents are written with sorted keys and without timestamps, so equal
configurations produce byte-identical files.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from osdmix import __version__
from osdmix.core.models import GeneratorCertificate, NormalizerTrack, Report
from osdmix.utils.errors import InvalidConfigError, MissingConfigError
from osdmix.utils.json_encoder import dumps, sanitize_for_json

PathLike = Union[str, Path]


def new_report(experiment: str, config: Dict[str, Any]) -> Report:
    return Report(experiment=experiment, config=config, version=__version__)


def write_report(report: Report, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(dumps(report.to_document()), encoding="utf-8", newline="\n")
    return path


def _read_json(path: PathLike, what: str) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise MissingConfigError(f"{what} file does not exist: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidConfigError(f"{what} file is not valid JSON: {path}", details={"error": str(e)}) from e
    if not isinstance(data, dict):
        raise InvalidConfigError(f"{what} file must hold a JSON object: {path}")
    return data


def save_track(track: NormalizerTrack, path: PathLike) -> Path:
    """Write a normalizer track as {checkpoints, regularized, A: {n: matrix}, b: {n: vector}}."""
    path = Path(path)
    document = {
        "checkpoints": track.checkpoints,
        "regularized": track.regularized,
        "A": {str(n): track.A[n] for n in track.checkpoints},
        "b": {str(n): track.b[n] for n in track.checkpoints},
    }
    path.write_text(dumps(document), encoding="utf-8", newline="\n")
    return path


def load_track(path: PathLike) -> NormalizerTrack:
    """
    Raises:
        MissingConfigError: if the file does not exist.
        InvalidConfigError: if it is not a normalizer track document.
    """
    data = _read_json(path, "Normalizer")
    try:
        return NormalizerTrack(
            checkpoints=[int(n) for n in data["checkpoints"]],
            A={int(n): np.asarray(A, dtype=np.float64) for n, A in data["A"].items()},
            b={int(n): np.asarray(b, dtype=np.float64) for n, b in data["b"].items()},
            regularized=bool(data.get("regularized", False)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidConfigError(
            f"Malformed normalizer file: {path}", details={"error": str(e)}
        ) from e


def save_generator(
    Q: np.ndarray,
    path: PathLike,
    certificates: Optional[Dict[str, GeneratorCertificate]] = None,
    source: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write q.json: the generator Q with its certificates keyed by c."""
    path = Path(path)
    document: Dict[str, Any] = {"Q": Q, "source": source or {}}
    if certificates:
        document["certificates"] = {
            c: sanitize_for_json(cert.model_dump()) for c, cert in certificates.items()
        }
    path.write_text(dumps(document), encoding="utf-8", newline="\n")
    return path


def load_generator(path: PathLike) -> np.ndarray:
    """
    Raises:
        MissingConfigError: if the file does not exist.
        InvalidConfigError: if Q is missing or not a finite square matrix.
    """
    data = _read_json(path, "Generator")
    try:
        Q = np.asarray(data["Q"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidConfigError(f"Generator file has no usable Q: {path}") from e
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or not np.all(np.isfinite(Q)):
        raise InvalidConfigError(f"Q must be a finite square matrix: {path}", details={"shape": Q.shape})
    return Q
