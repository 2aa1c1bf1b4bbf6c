"""Static SVG figures for experiment reports.

Figures are rendered with matplotlib to SVG files next to the CSV output.
Rendering is deterministic: no timestamps in the output and a fixed hash
salt for element ids, so re-running an experiment overwrites byte-identical
files.
"""

import matplotlib
matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "lace"

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(format="svg", metadata={"Date": None})


def plot_run(path, report, title):
    """Training loss and active width over steps, expansion events marked."""
    fig, ax1 = plt.subplots(figsize=(8, 4))
    steps = np.arange(len(report.loss_trace))
    ax1.plot(steps, report.loss_trace, lw=0.6, color="tab:blue", label="loss")
    ax1.set_xlabel("step")
    ax1.set_ylabel("training loss", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(steps, report.d_active_trace, lw=1.2, color="tab:green",
             label="active dims")
    ax2.set_ylabel("active dimensions", color="tab:green")
    for ev in report.events:
        ax1.axvline(ev.step, color="red", ls="--", lw=0.7, alpha=0.7)
    ax1.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_perdomain(path, steps, acc_matrix, title):
    """Per-domain accuracy heat strip (eval points x domains)."""
    fig, ax = plt.subplots(figsize=(8, 4))
    im = ax.imshow(acc_matrix.T, aspect="auto", origin="lower",
                   vmin=0, vmax=1, cmap="viridis",
                   extent=[steps[0], steps[-1], -0.5, acc_matrix.shape[1] - 0.5])
    ax.set_xlabel("step")
    ax.set_ylabel("domain")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="held-out accuracy")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_ablation(path, rows, title):
    """Accuracy drop per ablation condition."""
    labels = [r[0] for r in rows]
    drops = [r[2] for r in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    colors = ["tab:red" if d > 0.01 else "tab:gray" for d in drops]
    ax.bar(range(len(rows)), drops, color=colors)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("accuracy drop")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_layer_purity(path, rows, title):
    """Purity and cluster count per layer."""
    layers = [r[0] for r in rows]
    purities = [r[1] for r in rows]
    ks = [r[2] for r in rows]
    fig, ax1 = plt.subplots(figsize=(7, 4))
    ax1.plot(layers, purities, "o-", color="tab:blue")
    ax1.set_xlabel("layer")
    ax1.set_ylabel("cluster purity", color="tab:blue")
    ax1.set_ylim(0, 1.05)
    ax2 = ax1.twinx()
    ax2.plot(layers, ks, "s--", color="tab:orange")
    ax2.set_ylabel("clusters found", color="tab:orange")
    ax1.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
