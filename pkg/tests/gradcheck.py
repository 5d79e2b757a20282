"""Central-difference gradient checking shared by the test modules.

Comparison is per parameter block at the vector level: coordinate-wise
relative errors explode on near-zero entries where finite differences are
pure cancellation noise, while the block norm ratio stays meaningful.
"""

from __future__ import annotations

import numpy as np

STEP = 1e-5


def numeric_gradients(loss_fn, params: dict[str, np.ndarray], step: float = STEP):
    """Coordinate central differences of ``loss_fn(params) -> float``."""
    out = {}
    for name, arr in params.items():
        work = {k: v.copy() for k, v in params.items()}
        flat = work[name].ravel()
        grad = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = loss_fn(work)
            flat[i] = orig - step
            lm = loss_fn(work)
            flat[i] = orig
            grad[i] = (lp - lm) / (2 * step)
        out[name] = grad.reshape(arr.shape)
    return out


def max_block_relative_error(analytic: dict[str, np.ndarray],
                             numeric: dict[str, np.ndarray]) -> float:
    worst = 0.0
    for name in analytic:
        a = analytic[name].ravel()
        n = numeric[name].ravel()
        denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(n)), 1e-12)
        worst = max(worst, float(np.linalg.norm(a - n)) / denom)
    return worst
