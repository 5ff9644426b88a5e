"""Flat-output trajectories and the explicit state and control series.

On ``[tau, T]`` each mode's flat output is

    y_j(t) = phi_s((t - tau) / (T - tau)) * ybar_j(t),
    ybar_j(t) = sum_n beta_n c[j, n] exp(-(n pi)^2 t),

so ``y_j`` reproduces the freely evolved state at ``tau`` with all its time
derivatives and vanishes to all orders at ``T``.  State and control are

    theta(t, x1, x2) = sum_j exp(-lambda_j t) e_j(x1) sum_i y_j^(i)(t) x2^(2i) / (2i)!
    u(t, x1)         = sum_j exp(-lambda_j t) e_j(x1) sum_{i>=1} y_j^(i)(t) / (2i-1)!

All jets are kept in scaled form ``y^(i) / i!``; the factorial ratios
``i!/(2i)!`` and ``i!/(2i-1)!`` are applied in log space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, DomainError
from .gevrey import GevreyEstimate, GevreyOrder, TaylorJet, fit_gevrey_envelope, phi_step_jet
from .spectral import CoefficientMatrix, NeumannBasis1D, beta, x2_rates

__all__ = [
    "FlatController",
    "FlatTrajectorySet",
    "GevreyEstimate",
    "TauJetMatrix",
    "control_weights",
    "fit_gevrey_envelope_traj",
    "state_weights",
    "tau_coefficients",
    "ybar_jet",
]


def _scaled_exponential_table(N: int, t: float, order: int) -> np.ndarray:
    """``beta_n (-mu_n)^i exp(-mu_n t) / i!`` as an (N+1) x (order+1) array."""
    mu = x2_rates(N)
    i = np.arange(order + 1)
    out = np.zeros((N + 1, order + 1))
    out[0, 0] = 1.0
    if N >= 1:
        with np.errstate(divide="ignore"):
            logmag = i[None, :] * np.log(mu[1:, None]) - gammaln(i + 1)[None, :] - mu[1:, None] * t
        sign = np.where(i % 2 == 0, 1.0, -1.0)
        out[1:] = np.exp(logmag) * sign[None, :]
    return out * beta(N)[:, None]


def state_weights(order: int) -> np.ndarray:
    """``i! / (2i)!`` for i = 0..order."""
    i = np.arange(order + 1)
    return np.exp(gammaln(i + 1) - gammaln(2 * i + 1))


def control_weights(order: int) -> np.ndarray:
    """``i! / (2i-1)!`` for i = 0..order, with the i = 0 entry set to 0."""
    i = np.arange(order + 1)
    w = np.zeros(order + 1)
    w[1:] = np.exp(gammaln(i[1:] + 1) - gammaln(2 * i[1:]))
    return w


@dataclass(frozen=True)
class TauJetMatrix:
    """Taylor data of the freely evolved state at ``tau``.

    ``scaled[j, i] = y_{j,i} / i!`` where
    ``y_{j,i} = sum_n beta_n c[j,n] exp(-(n pi)^2 tau) (-(n pi)^2)^i``.
    """

    scaled: np.ndarray = field(repr=False)
    tau: float

    @property
    def raw(self) -> np.ndarray:
        """Unscaled ``y_{j,i}`` (large; may overflow at high order)."""
        i = np.arange(self.scaled.shape[1])
        with np.errstate(over="ignore"):
            return self.scaled * np.exp(gammaln(i + 1))[None, :]

    def scaled_magnitudes(self) -> np.ndarray:
        """``|y_{j,i}| tau^i / i!``, bounded uniformly in i for L2 data."""
        i = np.arange(self.scaled.shape[1])
        return np.abs(self.scaled) * self.tau ** i[None, :]


def tau_coefficients(c: CoefficientMatrix, tau: float, order: int = 25) -> TauJetMatrix:
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau!r}")
    return TauJetMatrix(c.c @ _scaled_exponential_table(c.N, tau, order), float(tau))


def ybar_jet(c_row, t: float, order: int) -> TaylorJet:
    """Jet of ``ybar(t) = sum_n beta_n c_row[n] exp(-(n pi)^2 t)`` about ``t``."""
    c_row = np.asarray(c_row, dtype=float).reshape(-1)
    if not t > 0:
        raise DomainError(f"ybar jets need t > 0, got {t!r}")
    return TaylorJet(t, c_row @ _scaled_exponential_table(c_row.size - 1, t, order))


@dataclass(frozen=True)
class FlatTrajectorySet:
    """Scaled jets ``jets[k, j, i] = y_j^(i)(times[k]) / i!``."""

    times: np.ndarray = field(repr=False)
    jets: np.ndarray = field(repr=False)
    s: float
    tau: float
    T: float

    @property
    def order(self) -> int:
        return self.jets.shape[2] - 1


def fit_gevrey_envelope_traj(traj: FlatTrajectorySet) -> GevreyEstimate:
    """Least-squares Gevrey envelope over every (time, mode, order) sample."""
    n_t, n_j, n_i = traj.jets.shape
    i = np.broadcast_to(np.arange(n_i), traj.jets.shape)
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(traj.jets)) + gammaln(i + 1)
    return fit_gevrey_envelope(i, logs, traj.s)


class FlatController:
    """Two-phase null control built from the coefficients of the initial state.

    Parameters
    ----------
    coeffs : CoefficientMatrix
        Decomposition of the initial state, truncated at (J, N).
    tau, T : float
        End of the zero-control phase and final time, ``0 < tau < T``.
    s : float
        Gevrey order of the step function, ``1 < s < 2``.
    order : int
        Truncation ``I`` of the series in x2 (number of time derivatives).
    """

    def __init__(self, coeffs: CoefficientMatrix, tau: float, T: float, s: float, order: int = 25):
        if not (0.0 < tau < T):
            raise ConfigError(f"need 0 < tau < T, got tau={tau!r}, T={T!r}")
        if order < 1:
            raise ConfigError(f"series order must be >= 1, got {order}")
        self.coeffs = coeffs
        self.basis = NeumannBasis1D(coeffs.L)
        self.tau = float(tau)
        self.T = float(T)
        self.gevrey = GevreyOrder(s)
        self.order = int(order)
        self.lam = self.basis.eigenvalues(coeffs.J)

    @property
    def s(self) -> float:
        return self.gevrey.s

    @property
    def J(self) -> int:
        return self.coeffs.J

    def _check_time(self, t, lo=None):
        lo = self.tau if lo is None else lo
        if not (lo <= t <= self.T):
            raise DomainError(f"t={t!r} outside [{lo}, {self.T}]")

    def phi_jet(self, t: float, order: int) -> TaylorJet:
        """Jet of ``phi_s((t - tau)/(T - tau))`` about ``t``."""
        width = self.T - self.tau
        sigma = min(max((t - self.tau) / width, 0.0), 1.0)
        jet = phi_step_jet(sigma, self.gevrey, order).scaled(1.0 / width)
        return TaylorJet(t, jet.coeffs)

    def ybar_jets(self, t: float, order: int) -> np.ndarray:
        return self.coeffs.c @ _scaled_exponential_table(self.coeffs.N, t, order)

    def flat_jets(self, t: float, order: int | None = None) -> np.ndarray:
        """Scaled jets of all flat outputs at ``t``: array (J+1) x (order+1)."""
        self._check_time(t)
        order = self.order if order is None else order
        phi = self.phi_jet(t, order).coeffs
        if not np.any(phi):
            return np.zeros((self.J + 1, order + 1))
        ybar = self.ybar_jets(t, order)
        # Cauchy product row by row: out[:, i] = sum_k ybar[:, k] phi[i-k]
        toeplitz = np.zeros((order + 1, order + 1))
        for k in range(order + 1):
            toeplitz[k, k:] = phi[: order + 1 - k]
        return ybar @ toeplitz

    def flat_output_jet(self, j: int, t: float, order: int | None = None) -> TaylorJet:
        return TaylorJet(t, self.flat_jets(t, order)[j])

    def tau_coefficients(self) -> TauJetMatrix:
        return tau_coefficients(self.coeffs, self.tau, self.order)

    def trajectory(self, times) -> FlatTrajectorySet:
        times = np.asarray(times, dtype=float)
        jets = np.stack([self.flat_jets(t) for t in times])
        return FlatTrajectorySet(times, jets, self.s, self.tau, self.T)

    # -- series evaluation -------------------------------------------------

    def control_profile(self, t: float, x1) -> np.ndarray:
        """Boundary flux ``u(t, x1)``; identically zero for ``t <= tau``."""
        self._check_time(t, lo=0.0)
        x1 = np.asarray(x1, dtype=float)
        if t <= self.tau:
            return np.zeros(x1.shape)
        modes = self.flat_jets(t) @ control_weights(self.order)
        E = self.basis.matrix(self.J, x1.reshape(-1)) * np.exp(-self.lam * t)[None, :]
        return (E @ modes).reshape(x1.shape)

    def _x2_series(self, jets, x2, weights, power_shift):
        """``sum_i jets[j, i] weights[i] x2^(2i - power_shift)`` per point and mode."""
        i = np.arange(jets.shape[1])
        powers = np.clip(2 * i - power_shift, 0, None)
        with np.errstate(invalid="ignore"):
            xp = x2.reshape(-1)[:, None] ** powers[None, :]
        return xp @ (jets * weights[None, :]).T

    def _combine(self, t, x1, x2, mode_x2):
        x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
        E = self.basis.matrix(self.J, x1.reshape(-1)) * np.exp(-self.lam * t)[None, :]
        return np.sum(E * mode_x2, axis=1).reshape(x1.shape)

    def _check_points(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if np.any((x2 < 0) | (x2 > 1)) or np.any((x1 < 0) | (x1 > self.basis.L)):
            raise DomainError("evaluation point outside the closed domain")
        return np.broadcast_arrays(x1, x2)

    def state_series(self, t: float, x1, x2):
        """Truncated state series at ``t`` in ``[tau, T]`` and points ``(x1, x2)``."""
        self._check_time(t)
        x1, x2 = self._check_points(x1, x2)
        jets = self.flat_jets(t)
        mode_x2 = self._x2_series(jets, x2, state_weights(self.order), 0)
        out = self._combine(t, x1, x2, mode_x2)
        return float(out) if out.ndim == 0 else out

    def state_series_dx2(self, t: float, x1, x2):
        """Term-wise x2-derivative of the state series."""
        self._check_time(t)
        x1, x2 = self._check_points(x1, x2)
        jets = self.flat_jets(t)
        mode_x2 = self._x2_series(jets, x2, control_weights(self.order), 1)
        out = self._combine(t, x1, x2, mode_x2)
        return float(out) if out.ndim == 0 else out

    def time_derivative_series(self, t: float, x1, x2, k: int = 1):
        """k-th time derivative (k in {0, 1}) of the state series, term by term.

        ``d/dt [exp(-lam t) y^(i)] = exp(-lam t) (y^(i+1) - lam y^(i))`` needs
        jets one order higher than the truncation.
        """
        if k == 0:
            return self.state_series(t, x1, x2)
        if k != 1:
            raise ConfigError(f"only k in {{0, 1}} is supported, got {k}")
        self._check_time(t)
        x1, x2 = self._check_points(x1, x2)
        I = self.order
        jets = self.flat_jets(t, I + 1)
        i = np.arange(I + 1)
        # scaled jet of y^(i+1)/i! is (i+1) * jets[:, i+1]
        dy = jets[:, 1:] * (i + 1)[None, :] - self.lam[:, None] * jets[:, :-1]
        mode_x2 = self._x2_series(dy, x2, state_weights(I), 0)
        out = self._combine(t, x1, x2, mode_x2)
        return float(out) if out.ndim == 0 else out

    def tail_magnitudes(self, times) -> dict:
        """Size of the last retained terms of both series over ``times``.

        ``i_state``/``i_control``: largest ``|I-th term|`` of the x2 series
        (summed over modes, at x2 = 1); ``j_state``/``j_control``: largest
        contribution of mode ``J``.
        """
        ws, wu = state_weights(self.order), control_weights(self.order)
        emax = np.sqrt(2.0 / self.basis.L) if self.J > 0 else self.basis.L**-0.5
        tails = dict(i_state=0.0, i_control=0.0, j_state=0.0, j_control=0.0)
        for t in times:
            jets = self.flat_jets(t)
            amp = np.exp(-self.lam * t) * np.where(np.arange(self.J + 1) == 0, self.basis.L**-0.5, emax)
            tails["i_state"] = max(tails["i_state"], float(np.sum(amp * np.abs(jets[:, -1])) * ws[-1]))
            tails["i_control"] = max(tails["i_control"], float(np.sum(amp * np.abs(jets[:, -1])) * wu[-1]))
            tails["j_state"] = max(tails["j_state"], float(amp[-1] * np.sum(np.abs(jets[-1]) * ws)))
            tails["j_control"] = max(tails["j_control"], float(amp[-1] * np.sum(np.abs(jets[-1]) * wu)))
        return tails
