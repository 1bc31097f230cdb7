"""Figure rendering for sweep results.

One figure per metric: mean with a stddev band per protocol against the
swept axis, written as SVG next to the CSV it was derived from.
"""

import math
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

METRICS = ("total_energy", "lifetime", "alive_nodes")
METRIC_LABELS = {
    "total_energy": "total energy consumed (J)",
    "lifetime": "network lifetime (s)",
    "alive_nodes": "alive nodes (>50% energy left)",
}
PROTOCOL_STYLE = {"AODV": dict(color="tab:red", marker="s"),
                  "EAR": dict(color="tab:green", marker="o")}


def _mean_std(values):
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def sweep_figures(rows: list[dict], axis: str, out_dir: str) -> list[str]:
    """Render one errorbar figure per metric from sweep result rows.

    Rows carry axis value, protocol, seed and the three metrics (the same
    records that go into sweep.csv). Returns the written file paths.
    """
    grouped = defaultdict(lambda: defaultdict(list))
    for row in rows:
        for metric in METRICS:
            grouped[metric][(row["protocol"], row["value"])].append(row[metric])
    paths = []
    for metric in METRICS:
        fig, ax = plt.subplots(figsize=(6, 4))
        for protocol in ("AODV", "EAR"):
            xs = sorted({value for proto, value in grouped[metric]
                         if proto == protocol})
            if not xs:
                continue
            means, stds = [], []
            for x in xs:
                mean, std = _mean_std(grouped[metric][(protocol, x)])
                means.append(mean)
                stds.append(std)
            ax.errorbar(xs, means, yerr=stds, label=protocol, capsize=3,
                        **PROTOCOL_STYLE[protocol])
        ax.set_xlabel(axis)
        ax.set_ylabel(METRIC_LABELS[metric])
        ax.set_title(f"{METRIC_LABELS[metric]} vs {axis}")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = f"{out_dir}/sweep_{metric}.svg"
        fig.savefig(path)
        plt.close(fig)
        paths.append(path)
    return paths
