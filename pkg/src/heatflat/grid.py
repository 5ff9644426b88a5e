"""Uniform vertex grids on (0, L) x (0, 1) and sampled fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError


@dataclass(frozen=True)
class Grid2D:
    """Uniform grid with ``n1`` points in x1 and ``n2`` points in x2, boundaries included."""

    L: float
    n1: int
    n2: int

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigError(f"domain length L must be positive, got {self.L!r}")
        if self.n1 < 3 or self.n2 < 3:
            raise ConfigError(f"grid needs at least 3 points per axis, got {self.n1}x{self.n2}")

    @property
    def h1(self) -> float:
        return self.L / (self.n1 - 1)

    @property
    def h2(self) -> float:
        return 1.0 / (self.n2 - 1)

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.n1)

    @property
    def x2(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n2)

    def mesh(self):
        """``(X1, X2)`` arrays of shape ``(n1, n2)``."""
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def trapezoid_weights(self):
        w1 = np.full(self.n1, self.h1)
        w1[[0, -1]] *= 0.5
        w2 = np.full(self.n2, self.h2)
        w2[[0, -1]] *= 0.5
        return w1, w2


@dataclass(frozen=True)
class Field2D:
    """Temperature samples ``values[i1, i2]`` on ``grid`` at time ``t``."""

    values: np.ndarray = field(repr=False)
    grid: Grid2D
    t: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n1, self.grid.n2):
            raise InputError(
                f"field shape {v.shape} does not match grid {(self.grid.n1, self.grid.n2)}"
            )
        if not np.all(np.isfinite(v)):
            raise InputError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, func, grid: Grid2D, t: float = 0.0):
        X1, X2 = grid.mesh()
        return cls(np.broadcast_to(func(X1, X2), X1.shape).astype(float), grid, t)

    def integral(self) -> float:
        """Trapezoidal approximation of the integral over the domain."""
        w1, w2 = self.grid.trapezoid_weights()
        return float(w1 @ self.values @ w2)


def l2_norm(field: Field2D) -> float:
    """Trapezoidal approximation of the L2 norm over the domain."""
    w1, w2 = field.grid.trapezoid_weights()
    return float(np.sqrt(w1 @ (field.values**2) @ w2))
