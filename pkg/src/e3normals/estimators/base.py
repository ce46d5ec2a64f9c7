from __future__ import annotations

import numpy as np

from ..geom import as_points


class Estimator:
    """Maps canonical patch coordinates ``(n, 3)`` to per-point unit normals ``(n, 3)``.

    ``concurrency_safe`` estimators may be evaluated on several patches at once.
    """

    name = "estimator"
    concurrency_safe = True

    def estimate(self, points) -> np.ndarray:
        raise NotImplementedError

    def estimate_batch(self, stack) -> np.ndarray:
        return np.stack([self.estimate(p) for p in stack])

    def __call__(self, points) -> np.ndarray:
        return self.estimate(as_points(points))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r})"
