"""Variance lower bounds assembled from kernel derivative factors.

``theorem_bound`` evaluates the projection bound
``sum_l |d^{p_l} gamma|^2 / q_l - gamma(x0)^2`` for an estimator component
whose mean function has the supplied value and partial derivatives.
``corollary_unbiased_bound`` is its closed form for unbiased estimation of a
single coefficient with the standard two-term multi-index choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DuplicateMultiIndexError, IndexOutOfRangeError, ValidationError
from .kernel import KernelContext, MultiIndex, check_multi, q_factor, unit_multi, zero_multi
from .model import SdcmModel, as_coeff_vector, restrict_support, xi_and_j0


@dataclass(frozen=True)
class MeanSpec:
    """Mean-function data consumed by the bound: value at the anchor and
    partial derivatives (keyed by multi-index) at the restricted anchor."""

    gamma_at_x0: float
    derivs: Mapping[MultiIndex, float]


@dataclass(frozen=True, eq=False)
class BoundRequest:
    ctx: KernelContext
    k_set: tuple[int, ...]
    multis: tuple[MultiIndex, ...]
    mean: MeanSpec

    def __post_init__(self):
        n = self.ctx.model.n
        k_set = tuple(sorted(set(int(i) for i in self.k_set)))
        object.__setattr__(self, "k_set", k_set)
        multis = tuple(check_multi(p, n, k_set) for p in self.multis)
        object.__setattr__(self, "multis", multis)
        if len(multis) < 1:
            raise ValidationError("at least one multi-index is required")
        if len(set(multis)) != len(multis):
            raise DuplicateMultiIndexError(f"multi-indices must be distinct, got {multis}")
        missing = [p for p in multis if p not in self.mean.derivs]
        if missing:
            raise ValidationError(f"mean spec lacks derivative values for {missing}")


@dataclass(frozen=True)
class BoundResult:
    value: float
    terms: tuple[float, ...]
    gamma0_sq: float


def theorem_bound(req: BoundRequest) -> BoundResult:
    """Projection lower bound on the variance at the anchor point."""
    terms = []
    for p in req.multis:
        q = q_factor(req.ctx, req.k_set, p)
        d = float(req.mean.derivs[p])
        terms.append(d * d / q)
    gamma0_sq = float(req.mean.gamma_at_x0) ** 2
    return BoundResult(value=float(sum(terms) - gamma0_sq), terms=tuple(terms), gamma0_sq=gamma0_sq)


def corollary_index_set(x0, k: int, s: int) -> tuple[int, ...]:
    """Index set {k} plus the s-1 largest entries of x0 with entry k zeroed.

    Ties break toward the lowest index.  This is the index-set choice under
    which the two-term bound for unbiased estimation has its closed form.
    """
    x0 = np.asarray(x0, dtype=float)
    if k < 0 or k >= x0.size:
        raise IndexOutOfRangeError(f"component {k} out of range for length {x0.size}")
    masked = x0.copy()
    masked[k] = 0.0
    order = np.lexsort((np.arange(masked.size), -masked))
    extra = [int(i) for i in order if int(i) != k][: s - 1]
    return tuple(sorted([k] + extra))


def unbiased_mean_spec(x0, k_set: Iterable[int], k: int) -> MeanSpec:
    """Mean data for the identity mean function gamma_k(x) = x_k."""
    x0 = np.asarray(x0, dtype=float)
    k_set = tuple(sorted(set(int(i) for i in k_set)))
    restricted = restrict_support(x0, k_set, len(k_set))
    n = x0.size
    if k < 0 or k >= n:
        raise IndexOutOfRangeError(f"component {k} out of range for length {n}")
    return MeanSpec(
        gamma_at_x0=float(x0[k]),
        derivs={zero_multi(n): float(restricted[k]), unit_multi(n, k): 1.0},
    )


def corollary_unbiased_bound(model: SdcmModel, x0, k: int) -> float:
    """Closed-form lower bound on the variance of unbiased estimators of x_k.

    Inside the support the bound is (2/r_k)(x0_k + sigma2)^2; outside it is
    (2/r_k) sigma2^2 [ (xi+sigma2)^2 - xi^2 ]^{r_j0/2} / (xi+sigma2)^{r_j0}
    with xi, j0 the value and index of the s-th largest entry of x0.  When
    x0 has fewer than s nonzeros, xi = 0 and the bracket collapses, leaving
    (2/r_k) sigma2^2 regardless of r_j0 (r_j0 then defaults to r_k).
    """
    x0 = as_coeff_vector(x0, model.n)
    if k < 0 or k >= model.n:
        raise IndexOutOfRangeError(f"component {k} out of range for {model.n} coefficients")
    sigma2 = model.sigma2
    r_k = model.ranks[k]
    if x0[k] != 0.0:
        return (2.0 / r_k) * (x0[k] + sigma2) ** 2
    xi, j0 = xi_and_j0(x0, model.s)
    r_j0 = model.ranks[j0] if j0 is not None else r_k
    num = ((xi + sigma2) ** 2 - xi**2) ** (r_j0 / 2.0)
    den = (xi + sigma2) ** r_j0
    return (2.0 / r_k) * sigma2**2 * num / den
