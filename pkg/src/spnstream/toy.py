"""Synthetic three-variable benchmark stream.

The first two variables come from a four-component mixture of axis-aligned
Gaussians with the clusters strung out along the diagonal, which makes
them strongly correlated marginally while x3 is independent noise.  Used
by the command line generator and throughout the test suite because the
generating density is available in closed form.
"""

from __future__ import annotations

import numpy as np

VARIABLE_NAMES = ["x1", "x2", "x3"]

CENTERS = np.array([[1.0, 2.0], [11.0, 12.0], [21.0, 22.0], [31.0, 32.0]])
VAR_X1 = 1.0
VAR_X2 = 2.0
X3_MEAN = 3.0
VAR_X3 = 3.0


def generate(n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` rows of (x1, x2, x3)."""
    comp = rng.integers(0, len(CENTERS), size=n)
    x1 = CENTERS[comp, 0] + rng.normal(0.0, np.sqrt(VAR_X1), size=n)
    x2 = CENTERS[comp, 1] + rng.normal(0.0, np.sqrt(VAR_X2), size=n)
    x3 = rng.normal(X3_MEAN, np.sqrt(VAR_X3), size=n)
    return np.column_stack([x1, x2, x3])


def _log_normal(x: np.ndarray, mean: float, var: float) -> np.ndarray:
    return -0.5 * (np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var)


def true_log_density(rows: np.ndarray) -> np.ndarray:
    """Exact log density of rows under the generating distribution."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[1] != 3:
        raise ValueError("rows must have three columns")
    per_comp = np.stack([
        _log_normal(rows[:, 0], c1, VAR_X1) + _log_normal(rows[:, 1], c2, VAR_X2)
        for c1, c2 in CENTERS
    ])
    mix = np.logaddexp.reduce(per_comp, axis=0) - np.log(len(CENTERS))
    return mix + _log_normal(rows[:, 2], X3_MEAN, VAR_X3)
