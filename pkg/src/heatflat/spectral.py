"""Neumann cosine basis, double cosine decomposition and free evolution.

The x1 basis is the orthonormal Neumann eigenbasis of (0, L)::

    e_0 = L^-1/2,   e_j = sqrt(2/L) cos(j pi x1 / L),   lambda_j = (j pi / L)^2

and the x2 basis is the orthonormal cosine basis of (0, 1)::

    f_0 = 1,        f_n = sqrt(2) cos(n pi x2)

``beta(n) = f_n(0)`` is the weight with which mode ``n`` enters the trace at
``x2 = 0`` (1 for ``n = 0`` and sqrt(2) otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, InputError
from .grid import Field2D, Grid2D

#: Default number of quadrature panels per axis for discontinuous data.
PANELS_ROUGH = 1024
#: Default number of quadrature panels per axis for smooth data.
PANELS_SMOOTH = 256


@dataclass(frozen=True)
class NeumannBasis1D:
    L: float = 1.0

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigError(f"L must be positive, got {self.L!r}")

    def eigenvalue(self, j):
        j = np.asarray(j)
        if np.any(j < 0):
            raise DomainError("mode index must be >= 0")
        lam = (j * np.pi / self.L) ** 2
        return float(lam) if lam.ndim == 0 else lam

    def eigenvalues(self, J: int) -> np.ndarray:
        return self.eigenvalue(np.arange(J + 1))

    def eigenfunction(self, j: int, x1):
        if j < 0:
            raise DomainError("mode index must be >= 0")
        x = np.asarray(x1, dtype=float)
        if np.any((x < 0) | (x > self.L)):
            raise DomainError(f"x1 outside [0, {self.L}]")
        if j == 0:
            val = np.full_like(x, self.L**-0.5)
        else:
            val = np.sqrt(2.0 / self.L) * np.cos(j * np.pi * x / self.L)
        return float(val) if val.ndim == 0 else val

    def matrix(self, J: int, x1) -> np.ndarray:
        """``E[m, j] = e_j(x1[m])`` for j = 0..J."""
        x = np.asarray(x1, dtype=float).reshape(-1)
        if np.any((x < 0) | (x > self.L)):
            raise DomainError(f"x1 outside [0, {self.L}]")
        E = np.sqrt(2.0 / self.L) * np.cos(np.outer(x, np.arange(J + 1)) * (np.pi / self.L))
        E[:, 0] = self.L**-0.5
        return E


def cosine_x2(n: int, x2):
    """Orthonormal cosine basis function ``f_n`` on (0, 1)."""
    x = np.asarray(x2, dtype=float)
    val = np.ones_like(x) if n == 0 else np.sqrt(2.0) * np.cos(n * np.pi * x)
    return float(val) if val.ndim == 0 else val


def cosine_x2_matrix(N: int, x2) -> np.ndarray:
    x = np.asarray(x2, dtype=float).reshape(-1)
    F = np.sqrt(2.0) * np.cos(np.outer(x, np.arange(N + 1)) * np.pi)
    F[:, 0] = 1.0
    return F


def beta(N: int) -> np.ndarray:
    """Trace weights ``f_n(0)`` for n = 0..N."""
    b = np.full(N + 1, np.sqrt(2.0))
    b[0] = 1.0
    return b


def x2_rates(N: int) -> np.ndarray:
    """Decay rates ``(n pi)^2`` of the x2 modes."""
    return (np.arange(N + 1) * np.pi) ** 2


@dataclass(frozen=True)
class CoefficientMatrix:
    """Coefficients ``c[j, n]`` of a field in the basis ``e_j(x1) f_n(x2)``."""

    c: np.ndarray = field(repr=False)
    L: float = 1.0

    def __post_init__(self):
        c = np.array(self.c, dtype=float, ndmin=2)
        if c.ndim != 2:
            raise InputError("coefficient matrix must be 2-D")
        if not np.all(np.isfinite(c)):
            raise InputError("coefficient matrix contains non-finite entries")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def J(self) -> int:
        return self.c.shape[0] - 1

    @property
    def N(self) -> int:
        return self.c.shape[1] - 1

    @property
    def basis(self) -> NeumannBasis1D:
        return NeumannBasis1D(self.L)

    def norm(self) -> float:
        """L2 norm of the represented field (Parseval)."""
        return float(np.sqrt(np.sum(self.c**2)))

    def truncated(self, J: int, N: int) -> "CoefficientMatrix":
        return CoefficientMatrix(self.c[: J + 1, : N + 1], self.L)


def simpson_weights(n_points: int, length: float) -> np.ndarray:
    """Composite Simpson weights; falls back to trapezoid for an even point count."""
    h = length / (n_points - 1)
    if (n_points - 1) % 2:
        w = np.full(n_points, h)
        w[[0, -1]] = 0.5 * h
        return w
    w = np.full(n_points, 2.0 * h / 3.0)
    w[1::2] = 4.0 * h / 3.0
    w[[0, -1]] = h / 3.0
    return w


def decompose(theta0, basis: NeumannBasis1D, J: int, N: int, panels: int = PANELS_ROUGH):
    """Project initial data onto ``e_j(x1) f_n(x2)``, j <= J, n <= N.

    ``theta0`` is either a vectorized callable ``theta0(x1, x2)``, sampled on a
    uniform ``(panels+1) x (panels+1)`` grid, or a :class:`Field2D` whose own
    samples are integrated.  Quadrature is composite Simpson.
    """
    if J < 0 or N < 0:
        raise ConfigError("truncation orders must be >= 0")
    if isinstance(theta0, Field2D):
        grid = theta0.grid
        if not np.isclose(grid.L, basis.L):
            raise InputError(f"field length {grid.L} does not match basis length {basis.L}")
        x1, x2, vals = grid.x1, grid.x2, theta0.values
    else:
        if panels < 2 or panels % 2:
            raise ConfigError(f"Simpson quadrature needs an even panel count, got {panels}")
        x1 = np.linspace(0.0, basis.L, panels + 1)
        x2 = np.linspace(0.0, 1.0, panels + 1)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        vals = np.broadcast_to(np.asarray(theta0(X1, X2), dtype=float), X1.shape)
    if not np.all(np.isfinite(vals)):
        raise InputError("initial data contains non-finite samples")
    w1 = simpson_weights(x1.size, basis.L)
    w2 = simpson_weights(x2.size, 1.0)
    E = basis.matrix(J, x1) * w1[:, None]
    F = cosine_x2_matrix(N, x2) * w2[:, None]
    return CoefficientMatrix(E.T @ vals @ F, basis.L)


def double_step(x1, x2, L: float = 1.0):
    """Double-step initial state: -1/+1 checkerboard over the four quadrants.

    Points on a discontinuity line take the average of the adjacent values,
    which is 0 on both lines and at the centre.
    """
    return -np.sign(0.5 * L - np.asarray(x1, dtype=float)) * np.sign(0.5 - np.asarray(x2, dtype=float))


def doublestep_coefficients(l: int, p: int, L: float = 1.0) -> float:
    """Closed-form coefficient ``c[2l+1, 2p+1]`` of :func:`double_step`.

    All coefficients with an even index vanish.
    """
    j, n = 2 * l + 1, 2 * p + 1
    return -8.0 * np.sqrt(L) * (-1) ** (l + p) / (np.pi**2 * j * n)


def doublestep_matrix(J: int, N: int, L: float = 1.0) -> CoefficientMatrix:
    j = np.arange(J + 1)[:, None]
    n = np.arange(N + 1)[None, :]
    odd = (j % 2 == 1) & (n % 2 == 1)
    sign = np.where(((j // 2) + (n // 2)) % 2 == 0, 1.0, -1.0)
    with np.errstate(divide="ignore"):
        c = np.where(odd, -8.0 * np.sqrt(L) * sign / (np.pi**2 * j * n), 0.0)
    return CoefficientMatrix(c, L)


def decay_rates(J: int, N: int, basis: NeumannBasis1D) -> np.ndarray:
    """``lambda_j + (n pi)^2`` as a (J+1) x (N+1) array."""
    return basis.eigenvalues(J)[:, None] + x2_rates(N)[None, :]


def free_evolution(c: CoefficientMatrix, basis: NeumannBasis1D, t: float, k: int = 0):
    """Coefficients of the zero-control solution at time ``t``.

    With ``k > 0`` returns the coefficients of the k-th time derivative.
    """
    if t < 0:
        raise DomainError(f"free evolution needs t >= 0, got {t!r}")
    rate = decay_rates(c.J, c.N, basis)
    out = c.c * np.exp(-rate * t)
    if k:
        out = out * (-rate) ** k
    return CoefficientMatrix(out, c.L)


def evaluate_points(c: CoefficientMatrix, basis: NeumannBasis1D, x1, x2) -> np.ndarray:
    """Series value ``sum c[j,n] e_j(x1) f_n(x2)`` at paired points."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    shape = np.broadcast_shapes(x1.shape, x2.shape)
    a = np.broadcast_to(x1, shape).reshape(-1)
    b = np.broadcast_to(x2, shape).reshape(-1)
    E = basis.matrix(c.J, a)
    F = cosine_x2_matrix(c.N, b)
    return np.sum((E @ c.c) * F, axis=1).reshape(shape)


def synthesize_field(c: CoefficientMatrix, basis: NeumannBasis1D, grid: Grid2D, t: float = 0.0):
    """Inverse transform onto a vertex grid."""
    E = basis.matrix(c.J, grid.x1)
    F = cosine_x2_matrix(c.N, grid.x2)
    return Field2D(E @ c.c @ F.T, grid, t)
