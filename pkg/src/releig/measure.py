from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_LOWER = 0.1
DEFAULT_STEP = 0.01


def default_lambda_grid(lower: float = DEFAULT_LOWER, step: float = DEFAULT_STEP) -> np.ndarray:
    """Equally spaced sample fractions lower, lower + step, ..., 1."""
    n = int(round((1.0 - lower) / step))
    if n < 1 or abs(lower + n * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} does not divide [{lower}, 1] evenly")
    return np.round(lower + step * np.arange(n + 1), 12)


@dataclass(frozen=True, eq=False)
class NuMeasure:
    """Uniform probability measure on (lower, 1], integrated by averaging over ``lambda_grid``.

    The same grid serves the self-normalizer of the test statistics and the
    denominator of the simulated limit law.
    """

    lower: float = DEFAULT_LOWER
    lambda_grid: np.ndarray = field(default=None)
    kind: str = "uniform_on_interval"

    def __post_init__(self):
        if not 0.0 < self.lower < 1.0:
            raise ValueError(f"lower bound must lie in (0, 1), got {self.lower}")
        grid = self.lambda_grid
        if grid is None:
            grid = default_lambda_grid(self.lower)
        grid = np.array(grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("lambda grid needs at least two points")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("lambda grid must be strictly increasing")
        if grid[0] < self.lower or grid[-1] != 1.0:
            raise ValueError("lambda grid must lie in [lower, 1] and end at 1")
        grid.setflags(write=False)
        object.__setattr__(self, "lambda_grid", grid)

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """nu-integral of values sampled on the lambda grid (plain average)."""
        return np.mean(values, axis=axis)

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "lower": float(self.lower),
            "lambda_grid": [float(x) for x in self.lambda_grid],
        }

    def __eq__(self, other):
        return (
            isinstance(other, NuMeasure)
            and self.kind == other.kind
            and self.lower == other.lower
            and np.array_equal(self.lambda_grid, other.lambda_grid)
        )

    def __hash__(self):
        return hash((self.kind, self.lower, self.lambda_grid.tobytes()))
