"""SNR sweep: Monte Carlo variance and matching lower bound per estimator,
emitted as CSV.

For each grid point an anchor with the configured support index and
``xi0 = sigma2 * 10^(snr_db/10)`` is built.  Each estimator row carries its
total Monte Carlo variance and the summed per-component two-term bound,
where the bound's mean data come from the estimator's closed-form mean when
one exists and from common-random-number finite differences otherwise.
Optionally both are normalized by the variance of the oracle estimator that
knows the support index.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import BoundRequest, MeanSpec, corollary_index_set, theorem_bound
from .errors import ConfigError
from .estimators import Estimator
from .kernel import KernelContext, unit_multi, zero_multi
from .model import SdcmModel, model_from_dict, restrict_support
from .simulate import McConfig, McReport, MeanCache, mc_mean, mc_mean_variance, mean_derivative_fd

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "snr_db",
    "estimator",
    "tau",
    "variance",
    "variance_stderr",
    "bound",
    "normalized_variance",
    "normalized_bound",
    "n_samples",
    "seed",
)
CSV_HEADER = ",".join(CSV_COLUMNS)


@dataclass(frozen=True, eq=False)
class SweepConfig:
    model: SdcmModel
    j0: int
    snr_grid_db: tuple[float, ...]
    estimators: tuple[Estimator, ...]
    mc: McConfig
    normalize: bool = True

    def __post_init__(self):
        if self.j0 < 0 or self.j0 >= self.model.n:
            raise ConfigError(f"support index {self.j0} out of range for {self.model.n} coefficients")
        grid = tuple(float(v) for v in self.snr_grid_db)
        if not grid:
            raise ConfigError("snr grid must be nonempty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("snr grid must be strictly increasing")
        object.__setattr__(self, "snr_grid_db", grid)
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        object.__setattr__(self, "estimators", tuple(self.estimators))


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    estimator: str
    tau: float | None
    variance: float
    variance_stderr: float
    bound: float
    normalized_variance: float | None
    normalized_bound: float | None
    n_samples: int
    seed: int


def _resolve_estimator(est: Estimator, j0: int, x0: np.ndarray) -> Estimator:
    if est.kind == "oracle" and est.supp is None:
        return dataclasses.replace(est, supp=(j0,))
    if est.kind == "s1mvu" and est.anchor is None:
        return dataclasses.replace(est, anchor=tuple(x0))
    return est


def estimator_bound(
    est: Estimator,
    model: SdcmModel,
    x0: np.ndarray,
    cfg: McConfig,
    report: McReport | None = None,
) -> float:
    """Sum over components of the two-term bound with the estimator's mean.

    Uses the index set {k} extended to sparsity size by the largest other
    entries, and multi-indices {0, e_k}.  Mean values/derivatives come from
    the closed form when the estimator has one, otherwise from Monte Carlo
    means and their common-random-number finite differences (reusing
    ``report`` for the value at the anchor itself).
    """
    n = model.n
    ctx = KernelContext(model, x0)
    analytic = est.has_analytic_mean()
    cache: MeanCache = {}
    if analytic:
        mean_at_x0 = est.analytic_mean(model, x0)
    elif report is not None:
        mean_at_x0 = report.mean
    else:
        mean_at_x0 = mc_mean(est, model, x0, cfg, cache)
    total = 0.0
    for k in range(n):
        k_set = corollary_index_set(x0, k, model.s)
        base = restrict_support(x0, k_set, model.s)
        if analytic:
            gamma_base = float(est.analytic_mean(model, base)[k])
            dgamma = float(est.analytic_mean_deriv(model, base)[k])
        else:
            gamma_base = float(mc_mean(est, model, base, cfg, cache)[k])
            dgamma = float(mean_derivative_fd(est, model, base, unit_multi(n, k), cfg, cache)[k])
        spec = MeanSpec(
            gamma_at_x0=float(mean_at_x0[k]),
            derivs={zero_multi(n): gamma_base, unit_multi(n, k): dgamma},
        )
        req = BoundRequest(ctx=ctx, k_set=k_set, multis=(zero_multi(n), unit_multi(n, k)), mean=spec)
        total += theorem_bound(req).value
    return total


def _worker_count(max_workers: int | None, n_cells: int) -> int:
    if max_workers is None:
        env = os.environ.get("SCOV_THREADS", "0")
        try:
            max_workers = int(env)
        except ValueError:
            raise ConfigError(f"SCOV_THREADS must be an integer, got {env!r}") from None
    if max_workers <= 0:
        max_workers = os.cpu_count() or 1
    return max(1, min(max_workers, n_cells))


def run_sweep(cfg: SweepConfig, max_workers: int | None = None) -> list[SweepRow]:
    """Evaluate every (snr, estimator) cell and return rows in grid order."""
    model = cfg.model
    sigma2 = model.sigma2
    norm_const_rank = 2.0 / model.ranks[cfg.j0]

    cells = []
    for snr_db in cfg.snr_grid_db:
        xi0 = sigma2 * 10.0 ** (snr_db / 10.0)
        x0 = np.zeros(model.n)
        x0[cfg.j0] = xi0
        for est in cfg.estimators:
            cells.append((snr_db, xi0, x0, _resolve_estimator(est, cfg.j0, x0)))

    def evaluate(cell) -> SweepRow:
        snr_db, xi0, x0, est = cell
        report = mc_mean_variance(est, model, x0, cfg.mc)
        bound = estimator_bound(est, model, x0, cfg.mc, report)
        norm = norm_const_rank * (xi0 + sigma2) ** 2 if cfg.normalize else None
        return SweepRow(
            snr_db=snr_db,
            estimator=est.name,
            tau=est.tau if est.kind == "ht" else None,
            variance=report.var_total,
            variance_stderr=report.stderr_var_total,
            bound=bound,
            normalized_variance=report.var_total / norm if norm else None,
            normalized_bound=bound / norm if norm else None,
            n_samples=cfg.mc.n_samples,
            seed=cfg.mc.seed,
        )

    workers = _worker_count(max_workers, len(cells))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(evaluate, cells))
    else:
        rows = [evaluate(cell) for cell in cells]

    for row in rows:
        if row.bound > row.variance + 3.0 * row.variance_stderr:
            logger.warning(
                "bound %g exceeds variance %g + 3*stderr at snr=%g dB for %s",
                row.bound,
                row.variance,
                row.snr_db,
                row.estimator,
            )
    return rows


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    return format(float(value), ".9g")


def rows_to_csv(rows: list[SweepRow]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                (
                    _fmt(r.snr_db),
                    r.estimator,
                    _fmt(r.tau),
                    _fmt(r.variance),
                    _fmt(r.variance_stderr),
                    _fmt(r.bound),
                    _fmt(r.normalized_variance),
                    _fmt(r.normalized_bound),
                    str(r.n_samples),
                    str(r.seed),
                )
            )
        )
    return "\n".join(lines) + "\n"


def _estimator_from_dict(doc: dict, n: int) -> Estimator:
    if "kind" not in doc:
        raise ConfigError(f'estimator entry missing "kind": {doc}')
    kind = str(doc["kind"]).lower()
    tau = doc.get("tau")
    rule = str(doc.get("rule", "exact"))
    supp = doc.get("supp")
    anchor = doc.get("x0")
    if supp is not None:
        supp = tuple(int(i) - 1 for i in supp)
        if any(i < 0 or i >= n for i in supp):
            raise ConfigError(f"oracle support {doc.get('supp')} out of 1-based range [1, {n}]")
    return Estimator(
        kind=kind,
        tau=float(tau) if tau is not None else None,
        ml_rule=rule,
        supp=supp,
        anchor=tuple(float(v) for v in anchor) if anchor is not None else None,
    )


def sweep_config_from_dict(doc: dict) -> SweepConfig:
    """Build a sweep config from a JSON-style mapping (1-based indices)."""
    for key in ("model", "j0", "snr_grid_db", "estimators", "mc"):
        if key not in doc:
            raise ConfigError(f'sweep config missing required field "{key}"')
    model = model_from_dict(doc["model"])
    j0 = int(doc["j0"]) - 1
    mc_doc = doc["mc"]
    for key in ("n_samples", "seed"):
        if key not in mc_doc:
            raise ConfigError(f'mc config missing required field "{key}"')
    mc = McConfig(
        n_samples=int(mc_doc["n_samples"]),
        seed=int(mc_doc["seed"]),
        n_shards=int(mc_doc.get("n_shards", 1)),
        fd_step=float(mc_doc.get("fd_step", 1e-3)),
    )
    estimators = tuple(_estimator_from_dict(e, model.n) for e in doc["estimators"])
    return SweepConfig(
        model=model,
        j0=j0,
        snr_grid_db=tuple(float(v) for v in doc["snr_grid_db"]),
        estimators=estimators,
        mc=mc,
        normalize=bool(doc.get("normalize", True)),
    )


def load_json(path: str) -> dict:
    """Read a UTF-8 JSON document, reporting the line of any parse error."""
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from None


def load_sweep_config(path: str) -> SweepConfig:
    return sweep_config_from_dict(load_json(path))
