"""Figure rendering for the CLI report paths (written next to each CSV)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_sweep_figure(rows, path) -> None:
    """Accuracy-vs-k lines, one per transform, from sweep result rows."""
    by_transform: dict[str, list[tuple[int, float]]] = {}
    for row in rows:
        by_transform.setdefault(row["transform"], []).append((int(row["k"]), float(row["accuracy"])))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name in sorted(by_transform):
        pts = sorted(by_transform[name])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=name)
    ax.set_xlabel("number of basis elements k")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_roi_figure(rows, path) -> None:
    """Per-ROI accuracy bars (rows whose accuracy failed are skipped)."""
    labels, values = [], []
    for row in rows:
        try:
            values.append(float(row["accuracy"]))
            labels.append(str(row["roi_label"]))
        except ValueError:
            continue
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, values)
    ax.set_xlabel("ROI label")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_decompose_figure(tube_norms, error_table, path) -> None:
    """Singular-tube decay plus truncation error vs k (formula and measured)."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.semilogy(range(1, len(tube_norms) + 1), tube_norms, marker="o")
    ax1.set_xlabel("tube index i")
    ax1.set_ylabel("singular tube norm")
    ax1.grid(True, alpha=0.3)
    ks = [row[0] for row in error_table]
    measured = [row[2] for row in error_table]
    ax2.plot(ks, measured, marker="s", label="measured")
    if any(row[1] is not None for row in error_table):
        ax2.plot(ks, [row[1] for row in error_table], marker=".", linestyle="--", label="tube-tail formula")
    ax2.set_xlabel("truncation k")
    ax2.set_ylabel("truncation error")
    ax2.grid(True, alpha=0.3)
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
