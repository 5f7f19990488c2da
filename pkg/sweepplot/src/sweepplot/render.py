"""Turn a sweep CSV into a variance/bound chart.

Reads only the CSV contract of the sweep tool (exact header below); one
solid curve per estimator for its variance, one dashed curve for the
matching lower bound, plotted against SNR in dB.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

EXPECTED_COLUMNS = (
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

DEFAULT_STYLES = {
    "ml": {"color": "tab:blue"},
    "ht": {"color": "tab:red"},
    "naive": {"color": "tab:green"},
    "oracle": {"color": "tab:gray"},
    "s1mvu": {"color": "tab:purple"},
}


class PlotError(ValueError):
    pass


@dataclass
class PlotSpec:
    csv_path: str
    out_path: str
    ymax: float = 3.0
    styles: dict = field(default_factory=dict)


def load_rows(csv_path: str) -> list[dict]:
    try:
        with open(csv_path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            header = tuple(reader.fieldnames or ())
            missing = [c for c in EXPECTED_COLUMNS if c not in header]
            if missing:
                raise PlotError(f"missing column(s) {', '.join(missing)} in {csv_path}")
            if header != EXPECTED_COLUMNS:
                raise PlotError(
                    f"unexpected header in {csv_path}: expected {','.join(EXPECTED_COLUMNS)}"
                )
            rows = list(reader)
    except FileNotFoundError:
        raise PlotError(f"input CSV not found: {csv_path}") from None
    if not rows:
        raise PlotError(f"no data rows in {csv_path}")
    return rows


def _curve_label(estimator: str, tau: str) -> str:
    return f"{estimator} (tau={tau})" if tau else estimator


def render(spec: PlotSpec):
    """Render the chart and write it to ``spec.out_path``; returns the figure."""
    rows = load_rows(spec.csv_path)
    normalized = all(r["normalized_variance"] != "" for r in rows)
    var_col = "normalized_variance" if normalized else "variance"
    bound_col = "normalized_bound" if normalized else "bound"

    groups: dict[tuple[str, str], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["estimator"], row["tau"]), []).append(row)

    fig, ax = plt.subplots(figsize=(8.0, 5.0))
    for (estimator, tau), group in groups.items():
        group = sorted(group, key=lambda r: float(r["snr_db"]))
        snr = [float(r["snr_db"]) for r in group]
        label = _curve_label(estimator, tau)
        style = {**DEFAULT_STYLES.get(estimator, {}), **spec.styles.get(label, {})}
        ax.plot(snr, [float(r[var_col]) for r in group], linestyle="-", label=label, **style)
        ax.plot(
            snr,
            [float(r[bound_col]) for r in group],
            linestyle="--",
            label=f"bound on {label}",
            **style,
        )
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("normalized variance/bound" if normalized else "variance/bound")
    ax.set_ylim(0.0, spec.ymax)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=150)
    return fig
