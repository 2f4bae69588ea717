from __future__ import annotations

from typing import Callable

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]

# u0(z), u0'(z), ... evaluated nodewise.
ScalarFunction = Callable[[FloatArray], FloatArray]
# v0_±(x, z) evaluated on broadcast coordinate arrays.
PlaneFunction = Callable[[FloatArray, FloatArray], FloatArray]
ProgressLogger = Callable[[str], None]

__all__ = [
    "FloatArray",
    "IntArray",
    "ScalarFunction",
    "PlaneFunction",
    "ProgressLogger",
]
