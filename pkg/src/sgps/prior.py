"""Analytic priors and the denoiser interface.

A Gaussian mixture with shared isotropic component variance s^2 has a
closed-form posterior mean under additive Gaussian noise, which makes it a
denoiser whose score, Jacobian trace, and Jacobian-vector products are all
exact.  That gives every downstream estimator an oracle to test against.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import RngStream, SgpsError, Signal

_TWO_PI = 2.0 * np.pi
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _check_sigma(sigma: float) -> float:
    s = float(sigma)
    if not np.isfinite(s) or s <= 0:
        raise SgpsError(f"noise level must be positive and finite, got {sigma}")
    return s


class Denoiser:
    """Minimal denoiser interface.

    Implementations map (noisy signal, noise level) to an estimate of the
    clean signal.  Capability flags advertise whether exact Jacobian
    diagnostics are available; consumers fall back to finite differences
    when they are not.
    """

    has_exact_jacobian_trace: bool = False
    has_analytic_input_gradient: bool = False

    def denoise(self, x: Signal, sigma: float) -> Signal:
        raise NotImplementedError

    def __call__(self, x: Signal, sigma: float) -> Signal:
        return self.denoise(x, sigma)

    def jacobian_trace(self, x: Signal, sigma: float) -> float:
        """Exact trace of d denoise / d x at (x, sigma)."""
        raise NotImplementedError(f"{type(self).__name__} has no exact Jacobian trace")

    def jacobian_vjp(self, x: Signal, sigma: float, v: np.ndarray) -> np.ndarray:
        """Exact J(x, sigma)^T v."""
        raise NotImplementedError(f"{type(self).__name__} has no analytic Jacobian products")


@dataclass(frozen=True)
class GmmPrior:
    """Mixture of K isotropic Gaussians with shared variance var_scale.

    weights: (K,), strictly positive, summing to 1 within 1e-12.
    means: (K, n) flat row-major component means, all sharing `shape`.
    """

    weights: np.ndarray
    means: np.ndarray
    var_scale: float
    shape: tuple[int, ...]

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=np.float64).reshape(-1)
        m = np.ascontiguousarray(self.means, dtype=np.float64)
        if m.ndim != 2:
            raise SgpsError(f"means must be a (K, n) array, got ndim={m.ndim}")
        if w.size != m.shape[0]:
            raise SgpsError(f"{w.size} weights for {m.shape[0]} means")
        if np.any(w <= 0):
            raise SgpsError("mixture weights must be strictly positive")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise SgpsError(f"mixture weights must sum to 1, got {w.sum()!r}")
        if not np.all(np.isfinite(m)):
            raise SgpsError("mixture means must be finite")
        if float(self.var_scale) <= 0:
            raise SgpsError(f"var_scale must be positive, got {self.var_scale}")
        shape = tuple(int(s) for s in self.shape)
        if int(np.prod(shape)) != m.shape[1]:
            raise SgpsError(f"shape {shape} does not match mean length {m.shape[1]}")
        w.flags.writeable = False
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "var_scale", float(self.var_scale))
        object.__setattr__(self, "shape", shape)

    @property
    def k(self) -> int:
        return int(self.weights.size)

    @property
    def n(self) -> int:
        return int(self.means.shape[1])

    def _log_resp(self, xv: np.ndarray, smoothed_var: float) -> np.ndarray:
        d = xv[None, :] - self.means
        sq = np.einsum("kn,kn->k", d, d)
        return np.log(self.weights) - sq / (2.0 * smoothed_var)

    def responsibilities(self, xv: np.ndarray, sigma: float) -> np.ndarray:
        v2 = self.var_scale + sigma * sigma
        lr = self._log_resp(xv, v2)
        lr -= logsumexp(lr)
        return np.exp(lr)

    def log_density(self, x: Signal, sigma: float) -> float:
        """Log density of the sigma-smoothed mixture at x."""
        sigma = _check_sigma(sigma)
        v2 = self.var_scale + sigma * sigma
        lr = self._log_resp(x.data, v2)
        norm = 0.5 * self.n * np.log(_TWO_PI * v2)
        return float(logsumexp(lr) - norm)

    def posterior_mean(self, x: Signal, sigma: float) -> Signal:
        """MMSE estimate of the clean signal given x = clean + sigma * noise."""
        sigma = _check_sigma(sigma)
        s2 = self.var_scale
        v2 = s2 + sigma * sigma
        g = self.responsibilities(x.data, sigma)
        mbar = g @ self.means
        return x.with_data((s2 * x.data + sigma * sigma * mbar) / v2)

    def score(self, x: Signal, sigma: float) -> Signal:
        """Gradient of log_density at x."""
        sigma = _check_sigma(sigma)
        v2 = self.var_scale + sigma * sigma
        g = self.responsibilities(x.data, sigma)
        mbar = g @ self.means
        return x.with_data((mbar - x.data) / v2)

    def trace_jacobian(self, x: Signal, sigma: float) -> float:
        """Exact trace of the posterior-mean Jacobian.

        J = (s^2 I + sig^2 C / v^2) / v^2 with C the responsibility-weighted
        covariance of the component means, so the trace needs only the
        weighted second moments, never an n x n matrix.
        """
        sigma = _check_sigma(sigma)
        s2 = self.var_scale
        sig2 = sigma * sigma
        v2 = s2 + sig2
        g = self.responsibilities(x.data, sigma)
        mbar = g @ self.means
        second = float(g @ np.einsum("kn,kn->k", self.means, self.means))
        trace_c = second - float(mbar @ mbar)
        return self.n * s2 / v2 + sig2 * trace_c / (v2 * v2)

    def jacobian_vjp(self, x: Signal, sigma: float, v: np.ndarray) -> np.ndarray:
        """J^T v; J is symmetric for this prior so this is also J v."""
        sigma = _check_sigma(sigma)
        s2 = self.var_scale
        sig2 = sigma * sigma
        v2 = s2 + sig2
        g = self.responsibilities(x.data, sigma)
        mbar = g @ self.means
        proj = self.means @ v
        cv = (g * proj) @ self.means - mbar * float(mbar @ v)
        return (s2 * v) / v2 + sig2 * cv / (v2 * v2)

    def draw(self, rng: RngStream) -> Signal:
        k = int(rng.gen.choice(self.k, p=self.weights))
        x = self.means[k] + np.sqrt(self.var_scale) * rng.normal(self.n)
        return Signal(x, self.shape)

    def draw_batch(self, rng: RngStream, count: int) -> np.ndarray:
        ks = rng.gen.choice(self.k, size=int(count), p=self.weights)
        z = rng.standard_normal((int(count), self.n))
        return self.means[ks] + np.sqrt(self.var_scale) * z


def denoise(prior: GmmPrior, x: Signal, sigma: float) -> Signal:
    return prior.posterior_mean(x, sigma)

def score(prior: GmmPrior, x: Signal, sigma: float) -> Signal:
    return prior.score(x, sigma)

def jacobian_trace_exact(prior: GmmPrior, x: Signal, sigma: float) -> float:
    return prior.trace_jacobian(x, sigma)


class GmmDenoiser(Denoiser):
    """Denoiser view of a GmmPrior; all diagnostics are exact."""

    has_exact_jacobian_trace = True
    has_analytic_input_gradient = True

    def __init__(self, prior: GmmPrior):
        self.prior = prior

    def denoise(self, x: Signal, sigma: float) -> Signal:
        return self.prior.posterior_mean(x, sigma)

    def jacobian_trace(self, x: Signal, sigma: float) -> float:
        return self.prior.trace_jacobian(x, sigma)

    def jacobian_vjp(self, x: Signal, sigma: float, v: np.ndarray) -> np.ndarray:
        return self.prior.jacobian_vjp(x, sigma, v)


class PerturbedDenoiser(Denoiser):
    """Analytic denoiser plus a bounded deterministic perturbation.

    Emulates the residual structure of a learned denoiser while keeping every
    diagnostic exact.  The perturbation a * sin(f * x + phase) is bounded by
    |a|, differentiable, and a pure function of the input; amplitude 0 (the
    default) reduces to the wrapped denoiser exactly.
    """

    has_exact_jacobian_trace = True
    has_analytic_input_gradient = True

    def __init__(self, base: Denoiser, amplitude: float = 0.0, frequency: float = 1.0):
        if not (base.has_exact_jacobian_trace and base.has_analytic_input_gradient):
            raise SgpsError("PerturbedDenoiser needs an analytic base denoiser")
        self.base = base
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)

    def _phase(self, n: int) -> np.ndarray:
        idx = np.arange(1, n + 1, dtype=np.float64)
        return _TWO_PI * np.mod(idx * _GOLDEN, 1.0)

    def denoise(self, x: Signal, sigma: float) -> Signal:
        _check_sigma(sigma)
        d = self.base.denoise(x, sigma)
        if self.amplitude == 0.0:
            return d
        bump = self.amplitude * np.sin(self.frequency * x.data + self._phase(x.n))
        return x.with_data(d.data + bump)

    def jacobian_trace(self, x: Signal, sigma: float) -> float:
        t = self.base.jacobian_trace(x, sigma)
        if self.amplitude == 0.0:
            return t
        diag = self.amplitude * self.frequency * np.cos(
            self.frequency * x.data + self._phase(x.n)
        )
        return t + float(diag.sum())

    def jacobian_vjp(self, x: Signal, sigma: float, v: np.ndarray) -> np.ndarray:
        out = self.base.jacobian_vjp(x, sigma, v)
        if self.amplitude == 0.0:
            return out
        diag = self.amplitude * self.frequency * np.cos(
            self.frequency * x.data + self._phase(x.n)
        )
        return out + diag * v


class LinearDenoiser(Denoiser):
    """D(x) = M x + offset with a stored matrix; trace and products are exact.

    The noise level argument is validated but otherwise ignored, which makes
    this the reference case for trace-estimator tests.
    """

    has_exact_jacobian_trace = True
    has_analytic_input_gradient = True

    def __init__(self, matrix: np.ndarray, offset: np.ndarray | None = None):
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise SgpsError(f"matrix must be square, got shape {m.shape}")
        self.matrix = m
        self.offset = (
            np.zeros(m.shape[0]) if offset is None else np.asarray(offset, dtype=np.float64)
        )

    def denoise(self, x: Signal, sigma: float) -> Signal:
        _check_sigma(sigma)
        return x.with_data(self.matrix @ x.data + self.offset)

    def jacobian_trace(self, x: Signal, sigma: float) -> float:
        _check_sigma(sigma)
        return float(np.trace(self.matrix))

    def jacobian_vjp(self, x: Signal, sigma: float, v: np.ndarray) -> np.ndarray:
        _check_sigma(sigma)
        return self.matrix.T @ v


class CountingDenoiser(Denoiser):
    """Wrapper that counts forward evaluations of the wrapped denoiser.

    Jacobian diagnostics are delegated without counting; only denoise calls
    cost a function evaluation in the budget sense.
    """

    def __init__(self, base: Denoiser):
        self.base = base
        self.calls = 0
        self.has_exact_jacobian_trace = base.has_exact_jacobian_trace
        self.has_analytic_input_gradient = base.has_analytic_input_gradient

    def denoise(self, x: Signal, sigma: float) -> Signal:
        self.calls += 1
        return self.base.denoise(x, sigma)

    def jacobian_trace(self, x: Signal, sigma: float) -> float:
        return self.base.jacobian_trace(x, sigma)

    def jacobian_vjp(self, x: Signal, sigma: float, v: np.ndarray) -> np.ndarray:
        return self.base.jacobian_vjp(x, sigma, v)
