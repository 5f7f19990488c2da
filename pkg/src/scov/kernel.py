"""Correlation kernel of likelihood ratios for the sparse covariance model.

Two evaluation routes are provided: ``kernel_general`` works for any model
through dense determinants of the tilde covariances, while ``kernel_sdcm``
uses the per-coordinate closed form available when the basis matrices are
orthogonal projections.  ``coord_deriv_factor``/``q_factor`` differentiate
the closed form exactly through its power series; these squared-norm factors
are the denominators of the variance lower bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadIndexSetError,
    DimensionMismatchError,
    DivergentSeriesError,
    DomainViolationError,
    IndefiniteArgumentError,
    SingularCovarianceError,
)
from .model import SdcmModel, as_coeff_vector, covariance_tilde

SERIES_REL_TOL = 1e-14
SERIES_MAX_TERMS = 10_000
_SERIES_QUIET_STREAK = 3

MultiIndex = tuple[int, ...]


def zero_multi(n: int) -> MultiIndex:
    return (0,) * n


def unit_multi(n: int, k: int) -> MultiIndex:
    p = [0] * n
    p[k] = 1
    return tuple(p)


def multi_support(p: Sequence[int]) -> tuple[int, ...]:
    return tuple(i for i, v in enumerate(p) if v != 0)


def check_multi(p: Sequence[int], n: int, k_set: Iterable[int]) -> MultiIndex:
    """Validate a multi-index: length n, entries >= 0, support inside k_set."""
    p = tuple(int(v) for v in p)
    if len(p) != n:
        raise DimensionMismatchError(f"multi-index length {len(p)} != {n}")
    if any(v < 0 for v in p):
        raise BadIndexSetError(f"multi-index orders must be >= 0, got {p}")
    k_set = set(int(i) for i in k_set)
    if not set(multi_support(p)) <= k_set:
        raise BadIndexSetError(f"multi-index support {multi_support(p)} not inside {sorted(k_set)}")
    return p


@dataclass(frozen=True, eq=False)
class KernelContext:
    """Anchor-point data shared by kernel evaluations.

    Holds the model, the anchor ``x0``, and the per-coordinate constants
    ``c_k = (x0_k + sigma2)^2`` and ``m_k = ranks[k] / 2``.
    """

    model: SdcmModel
    x0: np.ndarray

    def __post_init__(self):
        x0 = as_coeff_vector(self.x0, self.model.n)
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    @property
    def c(self) -> np.ndarray:
        return (self.x0 + self.model.sigma2) ** 2

    @property
    def half_ranks(self) -> np.ndarray:
        return np.asarray(self.model.ranks, dtype=float) / 2.0


def _chol_logdet(mat: np.ndarray, err: type[Exception], what: str) -> tuple[np.ndarray, float]:
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise err(f"{what} is not positive definite") from None
    return chol, 2.0 * float(np.sum(np.log(np.diag(chol))))


def kernel_general(ctx: KernelContext, x1, x2) -> float:
    """Determinant form of the kernel, valid for any sparse covariance model.

    Evaluates det(Ct(x0))^{1/2} * [det Ct(x1) det Ct(x2) det G]^{-1/2} with
    G = Ct(x1)^{-1} + Ct(x2)^{-1} - Ct(x0)^{-1}, all through symmetric
    positive-definite factorizations.  A failed factorization of G signals
    that (x1, x2) lies outside the kernel's validity region.
    """
    model = ctx.model
    x1 = as_coeff_vector(x1, model.n)
    x2 = as_coeff_vector(x2, model.n)
    eye = np.eye(model.m)
    invs = []
    logdets = []
    for x in (ctx.x0, x1, x2):
        cov = covariance_tilde(model, x)
        chol, logdet = _chol_logdet(cov, SingularCovarianceError, "tilde covariance")
        inv = np.linalg.solve(chol.T, np.linalg.solve(chol, eye))
        invs.append(0.5 * (inv + inv.T))
        logdets.append(logdet)
    g = invs[1] + invs[2] - invs[0]
    g = 0.5 * (g + g.T)
    _, logdet_g = _chol_logdet(g, IndefiniteArgumentError, "kernel argument matrix")
    log_val = 0.5 * logdets[0] - 0.5 * (logdets[1] + logdets[2] + logdet_g)
    return float(math.exp(log_val))


def kernel_sdcm(ctx: KernelContext, x1, x2) -> float:
    """Closed-form kernel: prod_k [c_k / (c_k - s1_k*s2_k)]^{ranks_k/2}.

    ``s_i = x_i - x0``; requires ``s1_k * s2_k < c_k`` for every k.
    """
    model = ctx.model
    s1 = as_coeff_vector(x1, model.n) - ctx.x0
    s2 = as_coeff_vector(x2, model.n) - ctx.x0
    c = ctx.c
    base = c - s1 * s2
    if np.any(base <= 0):
        bad = int(np.argmax(base <= 0))
        raise DomainViolationError(
            f"kernel factor base <= 0 at coordinate {bad}: c={c[bad]:.6g}, "
            f"s1*s2={s1[bad] * s2[bad]:.6g}"
        )
    return float(np.exp(np.sum(ctx.half_ranks * (np.log(c) - np.log(base)))))


def _rising_factorial(m: float, n: int) -> float:
    out = 1.0
    for i in range(n):
        out *= m + i
    return out


def coord_deriv_factor(p: int, q: int, c: float, m: float, s: float) -> float:
    """Mixed partial d^p_a d^q_b of c^m (c - (a-x0)(b-x0))^{-m} at a = b = x0 + s.

    Summed as the exact series over n >= max(p, q) of
    (m)_n / n! * c^{-n} * p! q! C(n,p) C(n,q) * s^{2n-p-q}; the term ratio
    tends to s^2/c < 1 so convergence is geometric inside the domain.
    """
    if p < 0 or q < 0:
        raise BadIndexSetError("derivative orders must be >= 0")
    if c <= 0:
        raise DomainViolationError(f"coordinate constant c must be positive, got {c}")
    if s * s >= c:
        raise DivergentSeriesError(f"series ratio s^2/c = {s * s / c:.6g} >= 1")
    if s == 0.0:
        if p != q:
            return 0.0
        return _rising_factorial(m, p) * math.factorial(p) * c ** (-p)
    if p == 0 and q == 0:
        # Zeroth derivative is the kernel factor itself; the series would
        # need ~1/(1 - s^2/c) terms near the domain boundary.
        return (c / (c - s * s)) ** m

    n0 = max(p, q)
    term = (
        _rising_factorial(m, n0)
        / math.factorial(n0)
        * c ** (-n0)
        * math.factorial(p)
        * math.factorial(q)
        * math.comb(n0, p)
        * math.comb(n0, q)
        * s ** (2 * n0 - p - q)
    )
    total = term
    s2_over_c = s * s / c
    quiet = 0
    n = n0
    while True:
        ratio = (m + n) * (n + 1) / ((n + 1 - p) * (n + 1 - q)) * s2_over_c
        term *= ratio
        total += term
        n += 1
        if abs(term) < SERIES_REL_TOL * abs(total):
            quiet += 1
            if quiet >= _SERIES_QUIET_STREAK:
                return total
        else:
            quiet = 0
        if n - n0 >= SERIES_MAX_TERMS:
            raise DivergentSeriesError(
                f"series for orders ({p},{q}) did not settle within {SERIES_MAX_TERMS} terms"
            )


def q_factor(ctx: KernelContext, k_set: Iterable[int], p: Sequence[int]) -> float:
    """Squared norm of the derivative function for multi-index ``p``.

    Equal to the p-th mixed partial of the closed-form kernel in both
    arguments, evaluated where both arguments are the anchor restricted to
    ``k_set``; factorizes over coordinates.
    """
    model = ctx.model
    k_set = tuple(sorted(set(int(i) for i in k_set)))
    if k_set and (k_set[0] < 0 or k_set[-1] >= model.n):
        raise BadIndexSetError(f"index set {k_set} out of range for {model.n} coefficients")
    p = check_multi(p, model.n, k_set)
    base = np.zeros_like(ctx.x0)
    base[list(k_set)] = ctx.x0[list(k_set)]
    shift = base - ctx.x0
    c = ctx.c
    half = ctx.half_ranks
    out = 1.0
    for k in range(model.n):
        out *= coord_deriv_factor(p[k], p[k], float(c[k]), float(half[k]), float(shift[k]))
    return out
