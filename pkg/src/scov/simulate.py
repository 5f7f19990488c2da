"""Deterministic Monte Carlo: observation sampling, estimator moment
estimation, and common-random-number finite differences of estimator means.

Sampling is organized in fixed blocks of ``BLOCK_SAMPLES`` observations.
Block ``b`` draws a (block, m) array of standard normals from its own
counter-based substream ``Philox(SeedSequence(seed, spawn_key=(b,)))`` and
maps it through ``y = basis @ (sqrt(x_group + sigma2) * w)``, which has the
exact target distribution N(0, covariance_tilde) and, unlike the latent
signal-plus-noise construction, is a smooth function of ``x`` for the same
draws.  Block statistics are merged in ascending block order, so results are
bit-identical for a given (seed, n_samples) regardless of how many worker
threads process the blocks, and the identical draws reused at every
perturbed parameter point make finite differences of Monte Carlo means
usable even at the boundary of the nonnegative orthant.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    NegativeCoefficientError,
    UnsupportedOrderError,
    ValidationError,
)
from .estimators import Estimator
from .model import SdcmModel, as_coeff_vector

BLOCK_SAMPLES = 8192


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings: sample count, base seed, worker count for block
    processing, and the relative finite-difference step for mean derivatives."""

    n_samples: int
    seed: int
    n_shards: int = 1
    fd_step: float = 1e-3

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.n_shards < 1 or self.n_shards > self.n_samples:
            raise ValidationError(
                f"n_shards must be in [1, n_samples], got {self.n_shards}"
            )
        if self.fd_step <= 0:
            raise ValidationError(f"fd_step must be positive, got {self.fd_step}")


@dataclass(frozen=True)
class McReport:
    """Per-component Monte Carlo moments of an estimator at one parameter point.

    ``var_total`` is the sum of the per-component variances; its standard
    error accounts for correlation between components.
    """

    mean: np.ndarray
    var_per_k: np.ndarray
    var_total: float
    stderr_mean: np.ndarray
    stderr_var: np.ndarray
    stderr_var_total: float
    n: int


def block_generator(seed: int, block_index: int) -> np.random.Generator:
    """Counter-based substream for one sampling block."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block_index),))
    return np.random.Generator(np.random.Philox(ss))


def _column_std(model: SdcmModel, x: np.ndarray) -> np.ndarray:
    lam = np.full(model.m, model.sigma2)
    lam[: model.total_rank] += np.repeat(x, model.ranks)
    return np.sqrt(lam)


def sample_observation(model: SdcmModel, x, rng: np.random.Generator) -> np.ndarray:
    """Draw one observation y ~ N(0, covariance_tilde(model, x)).

    Unassigned basis directions receive the noise variance only.
    """
    x = as_coeff_vector(x, model.n)
    if np.any(x < 0):
        raise NegativeCoefficientError(f"coefficients must be >= 0, got {x}")
    w = rng.standard_normal(model.m)
    return model.basis @ (_column_std(model, x) * w)


def _draw_block(model: SdcmModel, std: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    w = rng.standard_normal((count, model.m))
    return (w * std) @ model.basis.T


@dataclass
class _Moments:
    """Running moments: per-component central sums up to order 4 plus the
    covariance of the estimate vector augmented with its squared norm (used
    for the standard error of the total variance)."""

    n: int
    mean: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    m4: np.ndarray
    amean: np.ndarray
    across: np.ndarray


def _block_moments(est_block: np.ndarray) -> _Moments:
    nb = est_block.shape[0]
    mean = est_block.mean(axis=0)
    d = est_block - mean
    d2 = d * d
    aug = np.concatenate([est_block, (est_block * est_block).sum(axis=1)[:, None]], axis=1)
    amean = aug.mean(axis=0)
    da = aug - amean
    return _Moments(
        n=nb,
        mean=mean,
        m2=d2.sum(axis=0),
        m3=(d2 * d).sum(axis=0),
        m4=(d2 * d2).sum(axis=0),
        amean=amean,
        across=da.T @ da,
    )


def _merge_moments(a: _Moments, b: _Moments) -> _Moments:
    na, nb = a.n, b.n
    n = na + nb
    delta = b.mean - a.mean
    w = na * nb / n
    mean = a.mean + delta * (nb / n)
    m2 = a.m2 + b.m2 + delta**2 * w
    m3 = (
        a.m3
        + b.m3
        + delta**3 * w * (na - nb) / n
        + 3.0 * delta * (na * b.m2 - nb * a.m2) / n
    )
    m4 = (
        a.m4
        + b.m4
        + delta**4 * w * (na * na - na * nb + nb * nb) / (n * n)
        + 6.0 * delta**2 * (na * na * b.m2 + nb * nb * a.m2) / (n * n)
        + 4.0 * delta * (na * b.m3 - nb * a.m3) / n
    )
    adelta = b.amean - a.amean
    amean = a.amean + adelta * (nb / n)
    across = a.across + b.across + np.outer(adelta, adelta) * w
    return _Moments(n=n, mean=mean, m2=m2, m3=m3, m4=m4, amean=amean, across=across)


def _report_from_moments(mom: _Moments) -> McReport:
    n = mom.n
    n_comp = mom.mean.size
    if n < 2:
        zeros = np.zeros(n_comp)
        return McReport(
            mean=mom.mean,
            var_per_k=zeros,
            var_total=0.0,
            stderr_mean=zeros.copy(),
            stderr_var=zeros.copy(),
            stderr_var_total=0.0,
            n=n,
        )
    var = mom.m2 / (n - 1)
    stderr_mean = np.sqrt(var / n)
    m4c = mom.m4 / n
    var_of_var = np.maximum(m4c - (n - 3) / (n - 1) * var**2, 0.0) / n
    stderr_var = np.sqrt(var_of_var)
    # Var of the total-variance estimate via the augmented vector (x, |x|^2):
    # sum_k (x_k - mu_k)^2 = t - 2 mu.x + |mu|^2 with t = |x|^2.
    cov = mom.across / n
    mu = mom.mean
    cov_xx = cov[:n_comp, :n_comp]
    cov_xt = cov[:n_comp, n_comp]
    var_t = cov[n_comp, n_comp]
    var_z = var_t - 4.0 * float(mu @ cov_xt) + 4.0 * float(mu @ cov_xx @ mu)
    stderr_var_total = math.sqrt(max(var_z, 0.0) / n)
    return McReport(
        mean=mom.mean,
        var_per_k=var,
        var_total=float(var.sum()),
        stderr_mean=stderr_mean,
        stderr_var=stderr_var,
        stderr_var_total=stderr_var_total,
        n=n,
    )


def _map_blocks(cfg: McConfig, one_block: Callable[[int], object]) -> list:
    n_blocks = -(-cfg.n_samples // BLOCK_SAMPLES)
    if cfg.n_shards > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_shards) as pool:
            return list(pool.map(one_block, range(n_blocks)))
    return [one_block(b) for b in range(n_blocks)]


def _run_blocks(
    model: SdcmModel,
    x: np.ndarray,
    cfg: McConfig,
    evaluate: Callable[[np.ndarray], np.ndarray],
) -> _Moments:
    if np.any(x < 0):
        raise NegativeCoefficientError(f"coefficients must be >= 0, got {x}")
    std = _column_std(model, x)

    def one_block(b: int) -> _Moments:
        count = min(BLOCK_SAMPLES, cfg.n_samples - b * BLOCK_SAMPLES)
        y = _draw_block(model, std, count, block_generator(cfg.seed, b))
        return _block_moments(evaluate(y))

    stats = _map_blocks(cfg, one_block)
    mom = stats[0]
    for nxt in stats[1:]:
        mom = _merge_moments(mom, nxt)
    return mom


def _run_blocks_mean(
    model: SdcmModel,
    x: np.ndarray,
    cfg: McConfig,
    evaluate: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    """Mean-only block pass with the same draws and merge order as
    ``_run_blocks``; skips the higher-moment accumulation."""
    if np.any(x < 0):
        raise NegativeCoefficientError(f"coefficients must be >= 0, got {x}")
    std = _column_std(model, x)

    def one_block(b: int) -> np.ndarray:
        count = min(BLOCK_SAMPLES, cfg.n_samples - b * BLOCK_SAMPLES)
        y = _draw_block(model, std, count, block_generator(cfg.seed, b))
        return evaluate(y).sum(axis=0)

    sums = _map_blocks(cfg, one_block)
    total = sums[0].copy()
    for nxt in sums[1:]:
        total += nxt
    return total / cfg.n_samples


def mc_mean_variance(est: Estimator, model: SdcmModel, x, cfg: McConfig) -> McReport:
    """Monte Carlo mean/variance report for an estimator at parameter x."""
    x = as_coeff_vector(x, model.n)
    mom = _run_blocks(model, x, cfg, lambda y: est.estimate(model, y))
    return _report_from_moments(mom)


MeanCache = dict[bytes, np.ndarray]


def mc_mean(
    est: Estimator,
    model: SdcmModel,
    x,
    cfg: McConfig,
    cache: MeanCache | None = None,
) -> np.ndarray:
    """Monte Carlo mean vector at parameter x, optionally memoized by point."""
    x = as_coeff_vector(x, model.n)
    key = x.tobytes() if cache is not None else None
    if cache is not None and key in cache:
        return cache[key]
    mean = _run_blocks_mean(model, x, cfg, lambda y: est.estimate(model, y))
    if cache is not None:
        cache[key] = mean
    return mean


def _axis_stencil(order: int, base_val: float, h: float) -> list[tuple[float, float]]:
    """(offset, coefficient) pairs for a second-order accurate derivative
    along one axis; one-sided when a centered point would go below zero."""
    if order == 1:
        if base_val - h >= 0.0:
            return [(-h, -0.5 / h), (h, 0.5 / h)]
        return [(0.0, -1.5 / h), (h, 2.0 / h), (2.0 * h, -0.5 / h)]
    if base_val - h >= 0.0:
        return [(-h, 1.0 / h**2), (0.0, -2.0 / h**2), (h, 1.0 / h**2)]
    return [
        (0.0, 2.0 / h**2),
        (h, -5.0 / h**2),
        (2.0 * h, 4.0 / h**2),
        (3.0 * h, -1.0 / h**2),
    ]


def mean_derivative_fd(
    est: Estimator,
    model: SdcmModel,
    base,
    p: Sequence[int],
    cfg: McConfig,
    cache: MeanCache | None = None,
) -> np.ndarray:
    """Finite-difference partial derivative (multi-index ``p``, |p| <= 2) of
    the Monte Carlo mean vector at ``base``.

    Every stencil point reuses the same seed and draw sequence, so the
    sampling noise largely cancels in the differences.  The step along axis
    j is ``fd_step * (1 + base_j)``; axes where a centered point would leave
    the nonnegative orthant use one-sided second-order stencils.
    """
    base = as_coeff_vector(base, model.n)
    p = tuple(int(v) for v in p)
    if len(p) != model.n or any(v < 0 for v in p):
        raise ValidationError(f"bad multi-index {p} for {model.n} coefficients")
    total = sum(p)
    if total > 2:
        raise UnsupportedOrderError(f"finite differences support |p| <= 2, got {total}")
    if cache is None:
        cache = {}
    if total == 0:
        return mc_mean(est, model, base, cfg, cache)

    stencil: list[tuple[np.ndarray, float]] = [(base.copy(), 1.0)]
    for axis, order in enumerate(p):
        if order == 0:
            continue
        h = cfg.fd_step * (1.0 + float(base[axis]))
        axis_pts = _axis_stencil(order, float(base[axis]), h)
        stencil = [
            (point + off * _unit(model.n, axis), coef * ac)
            for point, coef in stencil
            for off, ac in axis_pts
        ]
    out = np.zeros(model.n)
    for point, coef in stencil:
        out += coef * mc_mean(est, model, point, cfg, cache)
    return out


def _unit(n: int, k: int) -> np.ndarray:
    e = np.zeros(n)
    e[k] = 1.0
    return e
