"""Gevrey step function and truncated Taylor-jet arithmetic.

A :class:`TaylorJet` stores the *scaled* derivatives ``f^(i)(t0) / i!`` of a
scalar function at a point, i.e. the coefficients of its truncated Taylor
polynomial.  Sums, products, quotients, exponentials and real powers of jets
follow the usual power-series recurrences and are exact to the stored order.

The step function::

    phi_s(t) = 1                                          t <= 0
             = 0                                          t >= 1
             = exp(-(1-t)^-k) / (exp(-(1-t)^-k) + exp(-t^-k))   otherwise

with ``k = 1/(s-1)`` is Gevrey of order ``s``, equal to 1 (resp. 0) with all
derivatives vanishing at ``t = 0`` (resp. ``t = 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, DomainError, InputError, NumericRangeError

__all__ = [
    "DEFAULT_SNAP",
    "GevreyEstimate",
    "GevreyOrder",
    "TaylorJet",
    "fit_gevrey_envelope",
    "jet_div",
    "jet_exp",
    "jet_mul",
    "jet_pow",
    "phi_envelope",
    "phi_step",
    "phi_step_jet",
]

#: Evaluation points closer than this to 0 or 1 return the exact endpoint jet.
DEFAULT_SNAP = 1e-12


@dataclass(frozen=True)
class GevreyOrder:
    """Gevrey order ``s`` in the open interval (1, 2)."""

    s: float

    def __post_init__(self):
        s = float(self.s)
        if not (1.0 < s < 2.0):
            raise ConfigError(f"Gevrey order s must satisfy 1 < s < 2, got {self.s!r}")
        object.__setattr__(self, "s", s)

    @property
    def k(self) -> float:
        """Exponent ``1/(s-1)`` of the step function."""
        return 1.0 / (self.s - 1.0)


def _order(s) -> GevreyOrder:
    return s if isinstance(s, GevreyOrder) else GevreyOrder(s)


@dataclass(frozen=True)
class TaylorJet:
    """Truncated Taylor expansion of a scalar function about ``t0``.

    ``coeffs[i]`` holds ``f^(i)(t0) / i!``; the jet has order ``len(coeffs) - 1``.
    """

    t0: float
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float, copy=True).reshape(-1)
        if c.size == 0:
            raise InputError("a jet needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise NumericRangeError(f"non-finite jet coefficients at t0={self.t0!r}")
        c.setflags(write=False)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, value, t0=0.0, order=0):
        c = np.zeros(order + 1)
        c[0] = value
        return cls(t0, c)

    @classmethod
    def variable(cls, t0=0.0, order=1):
        """Jet of the identity map ``t -> t`` about ``t0``."""
        c = np.zeros(order + 1)
        c[0] = t0
        if order >= 1:
            c[1] = 1.0
        return cls(t0, c)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def derivatives(self) -> np.ndarray:
        """Raw derivatives ``f^(i)(t0)``; may overflow for large orders."""
        fact = np.array([math.factorial(i) for i in range(self.order + 1)], dtype=float)
        return self.coeffs * fact

    def derivative(self) -> "TaylorJet":
        """Jet of ``f'`` (one order lower)."""
        i = np.arange(1, self.order + 1)
        if i.size == 0:
            return TaylorJet(self.t0, [0.0])
        return TaylorJet(self.t0, self.coeffs[1:] * i)

    def scaled(self, rate: float) -> "TaylorJet":
        """Jet of ``t -> f(t0 + rate * (t - t0))`` about ``t0``."""
        return TaylorJet(self.t0, self.coeffs * rate ** np.arange(self.order + 1))

    def evaluate(self, dt):
        """Value of the Taylor polynomial at ``t0 + dt``."""
        return np.polynomial.polynomial.polyval(dt, self.coeffs)

    def _check(self, other: "TaylorJet"):
        if self.order != other.order:
            raise InputError(f"jet orders differ: {self.order} vs {other.order}")
        if self.t0 != other.t0:
            raise InputError(f"jet expansion points differ: {self.t0} vs {other.t0}")

    def __add__(self, other):
        if isinstance(other, TaylorJet):
            self._check(other)
            return TaylorJet(self.t0, self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[0] += other
        return TaylorJet(self.t0, c)

    __radd__ = __add__

    def __neg__(self):
        return TaylorJet(self.t0, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TaylorJet):
            return jet_mul(self, other)
        return TaylorJet(self.t0, self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TaylorJet):
            return jet_div(self, other)
        return TaylorJet(self.t0, self.coeffs / other)


def jet_mul(a: TaylorJet, b: TaylorJet) -> TaylorJet:
    """Truncated Cauchy product (Leibniz rule on scaled coefficients)."""
    a._check(b)
    x, y = a.coeffs, b.coeffs
    out = np.array([np.dot(x[: i + 1], y[i::-1]) for i in range(x.size)])
    return TaylorJet(a.t0, out)


def jet_div(a: TaylorJet, b: TaylorJet) -> TaylorJet:
    a._check(b)
    x, y = a.coeffs, b.coeffs
    if y[0] == 0.0:
        raise ZeroDivisionError("jet division by a jet with zero constant term")
    q = np.zeros_like(x)
    q[0] = x[0] / y[0]
    for i in range(1, x.size):
        q[i] = (x[i] - np.dot(y[1 : i + 1], q[i - 1 :: -1])) / y[0]
    return TaylorJet(a.t0, q)


def jet_exp(a: TaylorJet) -> TaylorJet:
    x = a.coeffs
    e = np.zeros_like(x)
    e[0] = math.exp(x[0])
    kx = np.arange(x.size) * x
    for i in range(1, x.size):
        e[i] = np.dot(kx[1 : i + 1], e[i - 1 :: -1]) / i
    return TaylorJet(a.t0, e)


def jet_pow(a: TaylorJet, alpha: float) -> TaylorJet:
    """Jet of ``f**alpha`` for a jet with positive constant term."""
    x = a.coeffs
    if not x[0] > 0.0:
        raise DomainError(f"real power of a jet needs a positive base, got {x[0]!r}")
    p = np.zeros_like(x)
    p[0] = x[0] ** alpha
    for n in range(1, x.size):
        k = np.arange(1, n + 1)
        p[n] = np.dot(((alpha + 1.0) * k - n) * x[1 : n + 1], p[n - 1 :: -1]) / (n * x[0])
    return TaylorJet(a.t0, p)


def phi_step(sigma, s):
    """Evaluate the Gevrey step function at ``sigma`` (scalar or array).

    Values are clamped: 1 for ``sigma <= 0`` and 0 for ``sigma >= 1``.
    """
    k = _order(s).k
    x = np.asarray(sigma, dtype=float)
    out = np.where(x <= 0.0, 1.0, 0.0)
    inner = (x > 0.0) & (x < 1.0)
    if np.any(inner):
        t = x[inner]
        with np.errstate(over="ignore", divide="ignore"):
            g = (1.0 - t) ** -k - t ** -k
            e = np.exp(-np.abs(g))
        # pick the branch whose exponential cannot overflow
        out[inner] = np.where(g > 0.0, e / (1.0 + e), 1.0 / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def phi_step_jet(sigma: float, s, m: int, snap: float = DEFAULT_SNAP) -> TaylorJet:
    """Jet of order ``m`` of the step function about ``sigma`` in [0, 1].

    Within ``snap`` of an endpoint, or where the exponential weight
    ``exp(-|g|)`` underflows to zero, the exact endpoint jet is returned.
    """
    if m < 0:
        raise ConfigError(f"jet order must be >= 0, got {m}")
    k = _order(s).k
    sigma = float(sigma)
    if not (0.0 <= sigma <= 1.0):
        raise DomainError(f"step-function jet needs sigma in [0, 1], got {sigma!r}")
    ones = TaylorJet.constant(1.0, sigma, m)
    zeros = TaylorJet.constant(0.0, sigma, m)
    if sigma <= snap:
        return ones
    if sigma >= 1.0 - snap:
        return zeros

    try:
        g0 = (1.0 - sigma) ** -k - sigma ** -k
    except OverflowError:
        return ones if sigma < 0.5 else zeros
    if math.exp(-abs(g0)) == 0.0:
        return ones if g0 < 0.0 else zeros

    t = TaylorJet.variable(sigma, m)
    try:
        with np.errstate(over="raise", invalid="raise"):
            g = jet_pow(1.0 - t, -k) - jet_pow(t, -k)
            if g0 > 0.0:
                e = jet_exp(-g)
                return jet_div(e, 1.0 + e)
            e = jet_exp(g)
            return jet_div(ones, 1.0 + e)
    except (FloatingPointError, OverflowError, NumericRangeError) as exc:
        raise NumericRangeError(
            f"step-function jet of order {m} overflows at sigma={sigma!r}"
        ) from exc


@dataclass(frozen=True)
class GevreyEstimate:
    """Fitted envelope ``|f^(i)| <= M i!^s / R^i``.

    ``M`` and ``R`` come from a least-squares fit in log space;
    ``M_envelope`` lifts ``M`` by the largest residual so that every sample
    lies on or below the envelope.  ``defined`` is False when there was
    nothing to fit (all samples exactly zero).
    """

    M: float
    R: float
    M_envelope: float
    s: float
    max_residual: float
    rms_residual: float
    n_samples: int
    defined: bool = True

    @classmethod
    def undefined(cls, s):
        nan = float("nan")
        return cls(nan, nan, nan, float(s), nan, nan, 0, defined=False)

    def bound(self, i):
        """Envelope value ``M_envelope * i!^s / R^i``."""
        i = np.asarray(i, dtype=float)
        return np.exp(math.log(self.M_envelope) + self.s * gammaln(i + 1) - i * math.log(self.R))


def fit_gevrey_envelope(orders, log_abs_derivs, s) -> GevreyEstimate:
    """Fit ``log|f^(i)| - s log(i!) = log M - i log R`` by least squares.

    ``orders`` and ``log_abs_derivs`` are flat sample arrays; entries equal to
    ``-inf`` (exact zeros) are discarded.
    """
    i = np.asarray(orders, dtype=float).ravel()
    y = np.asarray(log_abs_derivs, dtype=float).ravel()
    keep = np.isfinite(y)
    i, y = i[keep], y[keep]
    if i.size == 0:
        return GevreyEstimate.undefined(s)
    target = y - s * gammaln(i + 1)
    if np.unique(i).size < 2:
        log_m, log_r = float(np.max(target)), 0.0
    else:
        A = np.column_stack([np.ones_like(i), -i])
        (log_m, log_r), *_ = np.linalg.lstsq(A, target, rcond=None)
    resid = target - (log_m - i * log_r)
    return GevreyEstimate(
        M=math.exp(log_m),
        R=math.exp(log_r),
        M_envelope=math.exp(log_m + max(float(resid.max()), 0.0)),
        s=float(s),
        max_residual=float(resid.max()),
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        n_samples=int(i.size),
    )


def phi_envelope(s, sigmas=None, m: int = 30) -> GevreyEstimate:
    """Empirical Gevrey envelope of the step function.

    The fit uses, for each order ``i``, the largest ``|phi^(i)|`` over the
    interior sample points ``sigmas`` (default 91 points in [0.05, 0.95]).
    """
    if sigmas is None:
        sigmas = np.linspace(0.05, 0.95, 91)
    sup = np.zeros(m + 1)
    for sig in sigmas:
        sup = np.maximum(sup, np.abs(phi_step_jet(sig, s, m).coeffs))
    orders = np.arange(m + 1)
    with np.errstate(divide="ignore"):
        logs = np.log(sup) + gammaln(orders + 1)
    return fit_gevrey_envelope(orders, logs, _order(s).s)
