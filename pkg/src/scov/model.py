"""Sparse diagonalizable covariance model and parameter-vector algebra.

The model describes an M-dimensional zero-mean Gaussian observation whose
covariance is ``sum_k x_k C_k + sigma2 * I`` with nonnegative coefficients
``x`` of which at most ``s`` are nonzero.  Each ``C_k`` projects onto the
orthogonal subspace spanned by a contiguous block of ``ranks[k]`` basis
columns; columns beyond ``sum(ranks)`` are unassigned and carry noise only.

All indices in this package are 0-based; the CLI converts from the 1-based
convention used in its flags and config files.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadIndexSetError,
    BadNoiseError,
    BadRanksError,
    BadSparsityError,
    ConfigError,
    DimensionMismatchError,
    NonOrthonormalBasisError,
)

ORTHONORMALITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SdcmModel:
    """Validated model instance; immutable after construction.

    Attributes
    ----------
    n : int
        Number of coefficients.
    s : int
        Sparsity degree (max number of nonzero coefficients), 1 <= s <= n.
    sigma2 : float
        Noise variance, > 0.
    ranks : tuple of int
        Subspace dimension of each coefficient group, all >= 1.
    basis : ndarray, shape (m, m)
        Orthonormal columns; group k owns the contiguous column block
        starting at ``group_starts[k]``.
    """

    n: int
    s: int
    sigma2: float
    ranks: tuple[int, ...]
    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        _validate(self)

    @property
    def m(self) -> int:
        return self.basis.shape[0]

    @property
    def total_rank(self) -> int:
        return sum(self.ranks)

    @property
    def group_starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.ranks)[:-1]]).astype(np.intp)

    def group_slice(self, k: int) -> slice:
        start = int(self.group_starts[k])
        return slice(start, start + self.ranks[k])

    @property
    def is_identity_basis(self) -> bool:
        return self.m == self.basis.shape[0] and np.array_equal(self.basis, np.eye(self.m))


def _validate(model: SdcmModel) -> None:
    if model.s < 1 or model.s > model.n:
        raise BadSparsityError(f"sparsity degree s={model.s} outside [1, {model.n}]")
    if model.sigma2 <= 0:
        raise BadNoiseError(f"noise variance must be positive, got {model.sigma2}")
    if len(model.ranks) != model.n:
        raise BadRanksError(f"expected {model.n} ranks, got {len(model.ranks)}")
    if any(r < 1 for r in model.ranks):
        raise BadRanksError(f"all ranks must be >= 1, got {model.ranks}")
    b = model.basis
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise NonOrthonormalBasisError(f"basis must be square, got shape {b.shape}")
    if model.total_rank > b.shape[0]:
        raise BadRanksError(
            f"sum of ranks {model.total_rank} exceeds ambient dimension {b.shape[0]}"
        )
    gram = b.T @ b
    dev = np.max(np.abs(gram - np.eye(b.shape[0])))
    if dev > ORTHONORMALITY_TOL:
        raise NonOrthonormalBasisError(
            f"basis columns not orthonormal (max Gram deviation {dev:.3e})"
        )


def make_model(
    n: int,
    s: int,
    sigma2: float,
    ranks: Sequence[int] | None = None,
    basis: np.ndarray | None = None,
    m: int | None = None,
) -> SdcmModel:
    """Build a validated model; identity basis and unit ranks by default."""
    ranks = tuple(int(r) for r in (ranks if ranks is not None else (1,) * n))
    if m is None:
        m = basis.shape[0] if basis is not None else sum(ranks)
    if basis is None:
        basis = np.eye(m)
    return SdcmModel(n=n, s=s, sigma2=float(sigma2), ranks=ranks, basis=basis)


def validate_model(model: SdcmModel) -> SdcmModel:
    """Re-check all invariants of ``model`` and return it."""
    _validate(model)
    return model


def model_from_dict(doc: dict) -> SdcmModel:
    """Build a model from a config mapping with keys N, S, sigma2, ranks, basis, M.

    ``basis`` is either the string ``"identity"`` (default) or a row-major
    nested array; ``ranks`` defaults to all ones and ``M`` to ``sum(ranks)``.
    """
    try:
        n = int(doc["N"])
        s = int(doc["S"])
        sigma2 = float(doc["sigma2"])
    except KeyError as exc:
        raise ConfigError(f"model config is missing required field {exc}") from None
    ranks = doc.get("ranks")
    basis = doc.get("basis", "identity")
    m = doc.get("M")
    if isinstance(basis, str):
        if basis != "identity":
            raise ConfigError(f'basis must be "identity" or an array, got "{basis}"')
        basis_arr = None
    else:
        basis_arr = np.array(basis, dtype=float)
    return make_model(n, s, sigma2, ranks=ranks, basis=basis_arr, m=int(m) if m else None)


def as_coeff_vector(x: Iterable[float], n: int) -> np.ndarray:
    """Coerce to a length-``n`` float vector."""
    arr = np.asarray(list(x) if not isinstance(x, np.ndarray) else x, dtype=float).ravel()
    if arr.size != n:
        raise DimensionMismatchError(f"expected coefficient vector of length {n}, got {arr.size}")
    return arr


def support(x: np.ndarray) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(x))


def in_sparse_set(x: np.ndarray, s: int) -> bool:
    """True iff ``x`` is entrywise nonnegative with at most ``s`` nonzeros."""
    x = np.asarray(x, dtype=float)
    return bool(np.all(x >= 0) and np.count_nonzero(x) <= s)


def covariance_tilde(model: SdcmModel, x) -> np.ndarray:
    """Signal-plus-noise covariance ``sum_k x_k C_k + sigma2 * I``.

    Eigenvalues are ``x_k + sigma2`` with multiplicity ``ranks[k]`` on group
    k and ``sigma2`` on unassigned directions.
    """
    x = as_coeff_vector(x, model.n)
    lam = np.full(model.m, model.sigma2)
    lam[: model.total_rank] += np.repeat(x, model.ranks)
    cov = (model.basis * lam) @ model.basis.T
    return 0.5 * (cov + cov.T)


def in_domain(x0, x, sigma2: float, s: int) -> bool:
    """True iff ``x`` is s-sparse nonnegative and ``x_k < 2*x0_k + sigma2`` for all k."""
    x0 = np.asarray(x0, dtype=float)
    x = np.asarray(x, dtype=float)
    if x0.shape != x.shape:
        raise DimensionMismatchError(f"shape mismatch: {x0.shape} vs {x.shape}")
    return in_sparse_set(x, s) and bool(np.all(x < 2.0 * x0 + sigma2))


def xi_and_j0(x0, s: int) -> tuple[float, int | None]:
    """Value and index of the s-th largest entry of ``x0``.

    Ties are broken toward the lowest index.  When ``x0`` has fewer than
    ``s`` nonzeros the s-th largest entry is zero and the index is None.
    """
    x0 = np.asarray(x0, dtype=float)
    order = np.lexsort((np.arange(x0.size), -x0))
    idx = int(order[s - 1])
    val = float(x0[idx])
    if val == 0.0:
        return 0.0, None
    return val, idx


def restrict_support(x0, k_set: Iterable[int], s: int) -> np.ndarray:
    """Zero every entry of ``x0`` whose index is not in ``k_set`` (|k_set| = s)."""
    x0 = np.asarray(x0, dtype=float)
    idx = sorted(set(int(i) for i in k_set))
    if len(idx) != s:
        raise BadIndexSetError(f"index set must have exactly {s} distinct indices, got {idx}")
    if idx and (idx[0] < 0 or idx[-1] >= x0.size):
        raise BadIndexSetError(f"index set {idx} out of range for length {x0.size}")
    out = np.zeros_like(x0)
    out[idx] = x0[idx]
    return out
