"""Unbiased risk estimation for a denoiser applied to noisy input.

For x = clean + sigma * noise the quantity

    -n sigma^2 + ||x - D(x)||^2 + 2 sigma^2 tr(dD/dx)

has the same expectation as the mean squared error of D(x) against the
clean signal, without access to the clean signal.  The trace is estimated
with Gaussian probes; its gradient with respect to x (probe, step size, and
sigma held fixed) drives the sample update.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import RngStream, RoundoffWarning, SamplerConfig, SgpsError, Signal
from .prior import Denoiser

EPSILON_ABS_FLOOR = 1e-6


def probe_epsilon(x_noisy: Signal, divisor: float) -> float:
    """Probe step max(x)/divisor, floored at 1e-6 * (1 + max|x|)."""
    if divisor <= 0:
        raise SgpsError(f"epsilon divisor must be positive, got {divisor}")
    top = float(np.max(x_noisy.data)) / divisor
    floor = EPSILON_ABS_FLOOR * (1.0 + float(np.max(np.abs(x_noisy.data))))
    return max(top, floor)


def sure_identity(n: int, sigma_hat: float, data_term: float, trace_estimate: float) -> float:
    """The defining combination; kept as one expression so callers can
    recompute a stored value bit for bit."""
    s2 = sigma_hat * sigma_hat
    return -(n * s2) + data_term + 2.0 * s2 * trace_estimate


def _trace_with_probes(
    den: Denoiser,
    x_noisy: Signal,
    sigma_hat: float,
    epsilon: float,
    probes: np.ndarray,
    base: Signal,
) -> float:
    """Probe-averaged trace estimate sharing a precomputed base output."""
    sigma_probe = max(epsilon, sigma_hat)
    total = 0.0
    for b in probes:
        perturbed = den.denoise(x_noisy.with_data(x_noisy.data + epsilon * b), sigma_probe)
        if np.array_equal(perturbed.data, base.data):
            warnings.warn(
                f"probe step {epsilon} produced no representable output change",
                RoundoffWarning,
                stacklevel=3,
            )
        total += float(b @ (perturbed.data - base.data)) / epsilon
    return total / probes.shape[0]


def mc_trace(
    den: Denoiser,
    x_noisy: Signal,
    sigma: float,
    probes: int,
    epsilon: float,
    rng: RngStream,
    base: Signal | None = None,
) -> float:
    """Monte Carlo Jacobian trace of the denoiser at (x_noisy, sigma).

    Each of the `probes` Gaussian probes costs one extra denoiser
    evaluation; the unperturbed output is computed once (or passed in).
    """
    if probes < 1:
        raise SgpsError(f"probes must be >= 1, got {probes}")
    if epsilon <= 0:
        raise SgpsError(f"epsilon must be positive, got {epsilon}")
    if base is None:
        base = den.denoise(x_noisy, sigma)
    b = rng.standard_normal((int(probes), x_noisy.n))
    return _trace_with_probes(den, x_noisy, sigma, epsilon, b, base)


@dataclass(frozen=True)
class SureEvaluation:
    """One risk evaluation and everything needed to reuse or recompute it."""

    value: float
    data_term: float
    trace_estimate: float
    sigma_used: float
    epsilon: float
    probes: np.ndarray
    denoised: Signal

    def __post_init__(self):
        p = np.ascontiguousarray(self.probes, dtype=np.float64)
        if p.ndim != 2:
            raise SgpsError("probes must be a (count, n) matrix")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "probes", p)


def sure_value(
    den: Denoiser,
    x_noisy: Signal,
    sigma_hat: float,
    cfg: SamplerConfig,
    rng: RngStream,
) -> SureEvaluation:
    """Risk estimate at x_noisy with noise level sigma_hat.

    Costs 1 + cfg.mc_probes denoiser evaluations.  The probes are recorded
    so the gradient can reuse them.
    """
    if sigma_hat <= 0:
        raise SgpsError(f"sigma_hat must be positive, got {sigma_hat}")
    xhat = den.denoise(x_noisy, sigma_hat)
    eps = probe_epsilon(x_noisy, cfg.epsilon_divisor)
    b = rng.standard_normal((cfg.mc_probes, x_noisy.n))
    trace = _trace_with_probes(den, x_noisy, sigma_hat, eps, b, xhat)
    resid = x_noisy.data - xhat.data
    data_term = float(resid @ resid)
    value = sure_identity(x_noisy.n, sigma_hat, data_term, trace)
    return SureEvaluation(
        value=value,
        data_term=data_term,
        trace_estimate=trace,
        sigma_used=float(sigma_hat),
        epsilon=eps,
        probes=b,
        denoised=xhat,
    )


def _sure_expression(
    den: Denoiser,
    xv: np.ndarray,
    template: Signal,
    sigma_hat: float,
    epsilon: float,
    probes: np.ndarray,
) -> float:
    """Value of the risk expression at an arbitrary input, with sigma_hat,
    epsilon, and probes held fixed.  This is the function the gradient
    differentiates."""
    x = template.with_data(xv)
    xhat = den.denoise(x, sigma_hat)
    trace = _trace_with_probes(den, x, sigma_hat, epsilon, probes, xhat)
    resid = x.data - xhat.data
    return sure_identity(x.n, sigma_hat, float(resid @ resid), trace)


def sure_gradient(
    den: Denoiser,
    x_noisy: Signal,
    sigma_hat: float,
    cfg: SamplerConfig,
    rng: RngStream,
    evaluation: SureEvaluation | None = None,
) -> Signal:
    """Gradient of the risk expression with respect to the noisy input.

    sigma_hat, the probe step, and the probes are treated as constants.
    With an analytic denoiser the gradient uses exact Jacobian products and
    costs no extra denoiser evaluations; otherwise central differences with
    step 1e-4 * (1 + max|x|) are used.  Passing the evaluation from
    sure_value reuses its probes and base output; cfg.probe_resample
    instead draws fresh probes for the gradient.
    """
    if evaluation is None:
        evaluation = sure_value(den, x_noisy, sigma_hat, cfg, rng)
    if abs(evaluation.sigma_used - sigma_hat) > 0:
        raise SgpsError("evaluation was computed at a different sigma_hat")
    eps = evaluation.epsilon
    if cfg.probe_resample:
        probes = rng.standard_normal((cfg.mc_probes, x_noisy.n))
    else:
        probes = evaluation.probes

    if den.has_analytic_input_gradient:
        s2 = sigma_hat * sigma_hat
        sigma_probe = max(eps, sigma_hat)
        resid = x_noisy.data - evaluation.denoised.data
        g = 2.0 * (resid - den.jacobian_vjp(x_noisy, sigma_hat, resid))
        acc = np.zeros(x_noisy.n)
        for b in probes:
            shifted = x_noisy.with_data(x_noisy.data + eps * b)
            acc += den.jacobian_vjp(shifted, sigma_probe, b)
            acc -= den.jacobian_vjp(x_noisy, sigma_hat, b)
        g += (2.0 * s2 / (eps * probes.shape[0])) * acc
        return x_noisy.with_data(g)

    h = 1e-4 * (1.0 + float(np.max(np.abs(x_noisy.data))))
    g = np.zeros(x_noisy.n)
    xv = x_noisy.data
    for i in range(x_noisy.n):
        step = np.zeros_like(xv)
        step[i] = h
        fp = _sure_expression(den, xv + step, x_noisy, sigma_hat, eps, probes)
        fm = _sure_expression(den, xv - step, x_noisy, sigma_hat, eps, probes)
        g[i] = (fp - fm) / (2.0 * h)
    return x_noisy.with_data(g)


def sure_update(x: Signal, grad: Signal, alpha: float) -> Signal:
    """Gradient step x - alpha * grad."""
    if x.shape != grad.shape:
        raise SgpsError(f"shape mismatch: {x.shape} vs {grad.shape}")
    if alpha < 0:
        raise SgpsError(f"alpha must be >= 0, got {alpha}")
    return x.with_data(x.data - alpha * grad.data)
