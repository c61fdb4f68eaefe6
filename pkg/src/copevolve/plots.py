"""Box-plot rendering for the report path.

Figures mirror the delimited report data: one box per (constraint count,
target solver) cell, one figure per feature and constraint kind.  PNG
metadata is pinned so reruns produce stable bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_LABELS = {"stddev": "coefficient standard deviation",
           "distance": "shortest distance to optimum"}


def render_feature_boxplots(feature_rows: dict[str, list[dict]], out_dir: Path) -> list[Path]:
    """One figure per feature: grouped boxes labelled count/H/target."""
    out_dir = Path(out_dir)
    paths = []
    for feature, rows in feature_rows.items():
        groups: dict[str, dict[tuple[int, str], list[float]]] = {}
        for row in rows:
            if row["value"] is None:
                continue
            kind = row["group"].split("/")[-1]
            key = (int(row["n_constraints"]), str(row["target_solver"]))
            groups.setdefault(kind, {}).setdefault(key, []).append(float(row["value"]))
        for kind, cells in groups.items():
            keys = sorted(cells)
            fig, ax = plt.subplots(figsize=(max(6.0, 0.55 * len(keys) + 2.0), 4.0))
            ax.boxplot([cells[k] for k in keys],
                       tick_labels=[f"{c}/H/{t}" for c, t in keys])
            ax.set_ylabel(_LABELS.get(feature, feature))
            ax.set_title(f"{feature} of {kind} constraints in hard instances")
            ax.tick_params(axis="x", rotation=60)
            fig.tight_layout()
            path = out_dir / f"{feature}_{kind}_boxplot.png"
            fig.savefig(path, dpi=110, metadata={"Software": "copevolve"})
            plt.close(fig)
            paths.append(path)
    return paths
