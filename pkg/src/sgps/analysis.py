"""Statistical diagnostics: normality checks, Gaussian divergences, and the
desk-scale validation experiments built from them."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import RngStream, SamplerConfig, SgpsError, Signal
from .guidance import langevin_guide
from .noise_est import PatchConfig, estimate_sigma
from .operators import ForwardOp
from .prior import Denoiser, GmmPrior
from .sampler import denoise_step
from .schedule import build_schedule
from .sure import sure_gradient, sure_update, sure_value


@dataclass(frozen=True)
class NormalityReport:
    count: int
    qq_correlation: float
    skewness: float
    excess_kurtosis: float


def _qq_correlation(sorted_std: np.ndarray) -> float:
    n = sorted_std.size
    # Blom plotting positions for the normal probability plot
    q = ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    return float(np.corrcoef(sorted_std, q)[0, 1])


def normality_report(samples: np.ndarray) -> NormalityReport:
    """Probability-plot correlation, skewness, and excess kurtosis of a
    sample, after standardization.  Needs >= 100 values with spread."""
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size < 100:
        raise SgpsError(f"need at least 100 samples, got {x.size}")
    mu = float(x.mean())
    sd = float(x.std())
    if sd == 0.0:
        raise SgpsError("samples have zero variance")
    z = (x - mu) / sd
    m2 = float(np.mean(z * z))
    m3 = float(np.mean(z**3))
    m4 = float(np.mean(z**4))
    return NormalityReport(
        count=int(x.size),
        qq_correlation=_qq_correlation(np.sort(z)),
        skewness=m3 / m2**1.5,
        excess_kurtosis=m4 / (m2 * m2) - 3.0,
    )


def qq_correlation_threshold(
    n: int, trials: int, quantile: float, rng: RngStream
) -> float:
    """Null-calibrated acceptance threshold: the given quantile of the
    probability-plot correlation over Gaussian samples of matched size."""
    vals = np.empty(trials)
    for t in range(trials):
        z = rng.normal(n)
        z = (z - z.mean()) / z.std()
        vals[t] = _qq_correlation(np.sort(z))
    return float(np.quantile(vals, quantile))


def _as_mean_vector(mean, n: int | None) -> np.ndarray:
    if isinstance(mean, Signal):
        return mean.data
    arr = np.atleast_1d(np.asarray(mean, dtype=np.float64)).reshape(-1)
    if arr.size == 1 and n is not None and n > 1:
        arr = np.full(n, float(arr[0]))
    return arr


def gaussian_w2(mean_a, std_a: float, mean_b, std_b: float, n: int | None = None) -> float:
    """Squared 2-Wasserstein distance between isotropic Gaussians:
    ||mu_a - mu_b||^2 + n (std_a - std_b)^2."""
    if std_a < 0 or std_b < 0:
        raise SgpsError("standard deviations must be nonnegative")
    ma = _as_mean_vector(mean_a, n)
    mb = _as_mean_vector(mean_b, n)
    if ma.size != mb.size:
        raise SgpsError(f"mean lengths differ: {ma.size} vs {mb.size}")
    dim = ma.size if n is None else int(n)
    if dim != ma.size:
        raise SgpsError(f"n={n} does not match mean length {ma.size}")
    d = ma - mb
    return float(d @ d + dim * (std_a - std_b) ** 2)


def kl_gaussian(mean_q, std_q: float, mean_p, std_p: float, n: int | None = None) -> float:
    """KL(N(mu_q, std_q^2 I) || N(mu_p, std_p^2 I)); asymmetric in its
    arguments."""
    if std_q <= 0 or std_p <= 0:
        raise SgpsError("standard deviations must be positive")
    mq = _as_mean_vector(mean_q, n)
    mp = _as_mean_vector(mean_p, n)
    if mq.size != mp.size:
        raise SgpsError(f"mean lengths differ: {mq.size} vs {mp.size}")
    dim = mq.size if n is None else int(n)
    if dim != mq.size:
        raise SgpsError(f"n={n} does not match mean length {mq.size}")
    vq = std_q * std_q
    vp = std_p * std_p
    d = mq - mp
    return float(dim * (math.log(std_p / std_q) + vq / (2.0 * vp) - 0.5) + d @ d / (2.0 * vp))


def fit_isotropic_gaussian(samples: np.ndarray) -> tuple[np.ndarray, float]:
    """Empirical mean vector and pooled scalar standard deviation of an
    (m, n) sample matrix."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise SgpsError("need an (m, n) matrix with m >= 2")
    mu = x.mean(axis=0)
    sd = float(np.sqrt(np.mean((x - mu) ** 2)))
    return mu, sd


def loglog_slope(xs, ys) -> float:
    lx = np.log(np.asarray(xs, dtype=np.float64))
    ly = np.log(np.asarray(ys, dtype=np.float64))
    if lx.size != ly.size or lx.size < 2:
        raise SgpsError("need matching sequences of length >= 2")
    lx = lx - lx.mean()
    return float((lx @ (ly - ly.mean())) / (lx @ lx))


def linear_gaussian_posterior(
    prior: GmmPrior, op: ForwardOp, y: Signal, sigma_y: float
) -> tuple[Signal, np.ndarray]:
    """Exact posterior mean and covariance for a single-component Gaussian
    prior under a linear operator, by dense linear algebra.

    The operator matrix is materialized column by column through apply, so
    this oracle does not rely on the operator's own adjoint.
    """
    if prior.k != 1:
        raise SgpsError("closed-form posterior needs a single-component prior")
    if not op.linear:
        raise SgpsError("closed-form posterior needs a linear operator")
    n = prior.n
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(op.apply(Signal(e, op.input_shape)).data)
    a = np.stack(cols, axis=1)
    s2 = prior.var_scale
    sy2 = sigma_y * sigma_y
    precision = np.eye(n) / s2 + a.T @ a / sy2
    cov = np.linalg.inv(precision)
    mean = cov @ (prior.means[0] / s2 + a.T @ y.data / sy2)
    return Signal(mean, op.input_shape), cov


def smooth_field(rng: RngStream, shape: tuple[int, ...], amplitude: float = 1.0) -> Signal:
    """Low-rank smooth test signal: random planar gradients plus two broad
    bumps.  Its patch covariance has only a handful of nonzero directions,
    which is what the noise-floor scan assumes about clean content."""
    if len(shape) == 1:
        t = np.linspace(-1.0, 1.0, shape[0])
        coef = rng.normal(3)
        field = coef[0] * t + coef[1] * np.exp(-((t - 0.3) ** 2) / 0.08)
        field += coef[2] * np.exp(-((t + 0.4) ** 2) / 0.05)
        return Signal(amplitude * field, shape)
    h, w = shape
    yy, xx = np.meshgrid(
        np.linspace(-1.0, 1.0, h), np.linspace(-1.0, 1.0, w), indexing="ij"
    )
    coef = rng.normal(5)
    field = coef[0] * xx + coef[1] * yy + 0.5 * coef[2] * xx * yy
    field += coef[3] * np.exp(-((xx - 0.2) ** 2 + (yy + 0.1) ** 2) / 0.18)
    field += coef[4] * np.exp(-((xx + 0.4) ** 2 + (yy - 0.3) ** 2) / 0.10)
    return Signal(amplitude * field.reshape(-1), shape)


def sigma_sweep(
    sigmas,
    images: int,
    shape: tuple[int, ...],
    patch: PatchConfig,
    seed: int,
    amplitude: float = 0.5,
) -> list[dict]:
    """Estimator accuracy across noise levels on smooth synthetic images.

    Returns one row per level with the mean estimate and its relative error.
    """
    rows = []
    stream = 0
    for sigma in sigmas:
        ests = []
        for _ in range(images):
            rng = RngStream(seed, stream)
            stream += 1
            base = smooth_field(rng, shape, amplitude)
            noisy = base.with_data(base.data + sigma * rng.normal(base.n))
            ests.append(estimate_sigma(noisy, patch))
        mean_est = float(np.mean(ests))
        rows.append(
            {
                "sigma": float(sigma),
                "mean_estimate": mean_est,
                "rel_error": mean_est / float(sigma) - 1.0,
            }
        )
    return rows


def w2_scaling_curve(
    op: ForwardOp,
    y: Signal,
    anchor: Signal,
    sigma_t: float,
    cfg: SamplerConfig,
    etas,
    samples: int,
    seed: int,
) -> list[tuple[float, float]]:
    """Squared W2 between the one-step guidance residual and the combined
    Gaussian N(0, (sigma_t^2 + 2 eta) I), as a function of the step size.

    Incoming samples are anchor + sigma_t * noise.  Common random numbers
    are used across step sizes so the curve is a smooth function of eta.
    Means and spreads are fit empirically and compared with the closed-form
    Gaussian W2.
    """
    n = anchor.n
    out = []
    for eta in etas:
        step_cfg = cfg.replace(langevin_steps=1, langevin_eta=float(eta))
        resid = np.empty((samples, n))
        for i in range(samples):
            rng = RngStream(seed, i)
            x0 = anchor.with_data(anchor.data + sigma_t * rng.normal(n))
            x1 = langevin_guide(x0, anchor, sigma_t, op, y, step_cfg, rng)
            resid[i] = x1.data - anchor.data
        mu, sd = fit_isotropic_gaussian(resid)
        combined = math.sqrt(sigma_t * sigma_t + 2.0 * float(eta))
        out.append((float(eta), gaussian_w2(mu, sd, np.zeros(n), combined)))
    return out


def chain_prefix(
    den: Denoiser,
    op: ForwardOp,
    y: Signal,
    cfg: SamplerConfig,
    rng: RngStream,
    depth: int,
) -> list[tuple[float, Signal, Signal]]:
    """First `depth` uncorrected steps of the chain: per step the noise
    level, the denoised estimate, and the guided sample.  Uses the same
    substream layout as the full sampler."""
    sched = build_schedule(cfg.steps, cfg.t_min, cfg.t_max, cfg.rho)
    if not (1 <= depth <= len(sched)):
        raise SgpsError(f"depth must be in [1, {len(sched)}], got {depth}")
    rng_init = rng.substream(0)
    rng_lang = rng.substream(1)
    rng_renoise = rng.substream(3)
    n = int(np.prod(op.input_shape))
    x = Signal(float(sched.sigmas[0]) * rng_init.normal(n), op.input_shape)
    states = []
    for k in range(depth):
        sigma_t = float(sched.sigmas[k])
        x0t = denoise_step(den, x, sigma_t, cfg.ode_substeps, sched)
        x0ty = langevin_guide(x0t, x0t, sigma_t, op, y, cfg, rng_lang)
        states.append((sigma_t, x0t, x0ty))
        if k + 1 < depth:
            x = x0ty.with_data(x0ty.data + sched.sigma_after(k) * rng_renoise.normal(n))
    return states


def kl_trend_trials(
    den: Denoiser,
    prior: GmmPrior,
    op: ForwardOp,
    y: Signal,
    cfg: SamplerConfig,
    patch: PatchConfig,
    trials: int,
    samples: int,
    depth: int,
    seed: int,
) -> np.ndarray:
    """KL to the exact posterior before and after one risk-gradient update.

    Each trial runs `samples` independent uncorrected chains down to ladder
    index `depth`, fits isotropic Gaussians to the guided population and to
    the population after a single update, and evaluates the closed-form KL
    against the exact linear-Gaussian posterior.  Returns (trials, 2) with
    columns (kl_before, kl_after).
    """
    post_mean, post_cov = linear_gaussian_posterior(prior, op, y, cfg.sigma_y)
    post_std = float(np.sqrt(np.mean(np.diag(post_cov))))
    out = np.empty((trials, 2))
    for t in range(trials):
        before = np.empty((samples, post_mean.n))
        after = np.empty((samples, post_mean.n))
        for i in range(samples):
            rng = RngStream(seed, (t << 20) + i)
            states = chain_prefix(den, op, y, cfg, rng, depth)
            sigma_t, _, x0ty = states[-1]
            before[i] = x0ty.data
            sigma_hat = estimate_sigma(x0ty, patch) * cfg.sigma_hat_scale
            if sigma_hat < cfg.sigma_floor:
                after[i] = x0ty.data
                continue
            sigma_hat = min(sigma_hat, sigma_t)
            rng_probe = rng.substream(2)
            ev = sure_value(den, x0ty, sigma_hat, cfg, rng_probe)
            grad = sure_gradient(den, x0ty, sigma_hat, cfg, rng_probe, ev)
            after[i] = sure_update(x0ty, grad, cfg.alpha).data
        mu_b, sd_b = fit_isotropic_gaussian(before)
        mu_a, sd_a = fit_isotropic_gaussian(after)
        out[t, 0] = kl_gaussian(mu_b, sd_b, post_mean.data, post_std)
        out[t, 1] = kl_gaussian(mu_a, sd_a, post_mean.data, post_std)
    return out
