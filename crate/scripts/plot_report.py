#!/usr/bin/env python3
"""Quick plots from the flat CSV emitted next to each JSON report.

Usage: plot_report.py report.csv [out.png]

The report kind is inferred from the CSV header.
"""

import csv
import sys


def main() -> None:
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    path = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else path.rsplit(".", 1)[0] + ".png"

    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        sys.exit("empty report")
    header = rows[0].keys()

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    if "first_component" in header:
        bs = [int(r["b"]) for r in rows]
        for col in ("first_component", "second_component", "sum", "empirical_variance"):
            ax.plot(bs, [float(r[col]) for r in rows], marker="o", label=col)
        ax.set_xlabel("B")
        ax.set_ylabel("variance")
        ax.set_xscale("log")
        ax.set_yscale("log")
    elif "variance_ratio" in header:
        labels = [f'{r["estimator"]}@p{r["point_index"]}' for r in rows]
        ax.bar(labels, [float(r["variance_ratio"]) for r in rows])
        ax.axhline(1.0, color="k", linewidth=0.8)
        ax.set_ylabel("variance ratio")
        plt.xticks(rotation=45, ha="right")
    elif "mean_estimate" in header:
        labels = [f'{r["estimator"]}@p{r["point_index"]}' for r in rows]
        ax.bar(labels, [float(r["mean_estimate"]) for r in rows], label="mean estimate")
        ax.axhline(float(rows[0]["empirical_variance"]), color="r", label="empirical")
        ax.set_ylabel("variance")
        ax.legend()
        plt.xticks(rotation=45, ha="right")
    elif "proportion" in header:
        metric = [c for c in header if c.endswith("_mean")][0]
        for mode in sorted({r["mode"] for r in rows}):
            sub = [r for r in rows if r["mode"] == mode]
            ax.errorbar(
                [float(r["proportion"]) for r in sub],
                [float(r[metric]) for r in sub],
                yerr=[float(r[metric.replace("_mean", "_se")]) for r in sub],
                marker="o",
                label=mode,
            )
        ax.set_xlabel("subsample proportion")
        ax.set_ylabel(metric.replace("_mean", ""))
        ax.legend()
    else:
        sys.exit(f"unrecognized report columns: {sorted(header)}")

    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
