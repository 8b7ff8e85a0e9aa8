"""
Shared pydantic field types for numpy-backed models.
"""

from typing import Any, List

import numpy as np
from pydantic import BeforeValidator, ConfigDict, PlainSerializer
from typing_extensions import Annotated


def _as_float_array(value: Any) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


def _to_list(value: np.ndarray) -> List[Any]:
    return value.tolist()


Array = Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(_to_list, return_type=list),
]
"""A float64 numpy array that serializes to nested lists."""

ARRAY_MODEL_CONFIG = ConfigDict(arbitrary_types_allowed=True, frozen=False)
