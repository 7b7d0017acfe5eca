"""Figure rendering for analysis/classification bundles.

Reads only the CSV/JSON files written by `analyze` and `classify`, so the
core pipeline stays plotting-free; this module is the single matplotlib
touchpoint.
"""

import csv
import json
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _read_anova(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append((row["feature"], float(row["F"]), float(row["p"]),
                         bool(int(row["kept"]))))
    return rows


def _read_separation(path):
    flags = {}
    pairs = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["pair"] not in pairs:
                pairs.append(row["pair"])
            flags.setdefault(row["feature"], {})[row["pair"]] = bool(int(row["flag"]))
    return flags, pairs


def plot_anova(anova_rows, out_path, alpha=0.05):
    names = [r[0] for r in anova_rows]
    pvals = np.array([max(r[2], 1e-300) for r in anova_rows])
    kept = [r[3] for r in anova_rows]
    fig, ax = plt.subplots(figsize=(10, 4))
    colors = ["tab:blue" if k else "tab:red" for k in kept]
    ax.bar(range(len(names)), -np.log10(pvals), color=colors)
    ax.axhline(-np.log10(alpha), color="k", linestyle="--", linewidth=1,
               label=f"alpha = {alpha}")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=90, fontsize=7)
    ax.set_ylabel("-log10 p")
    ax.set_title("Per-feature ANOVA over emotions")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_separation(flags, pairs, out_path):
    names = list(flags.keys())
    fig, ax = plt.subplots(figsize=(max(8, 0.35 * len(names)),
                                    max(5, 0.3 * len(pairs))))
    for j, name in enumerate(names):
        for i, pair in enumerate(pairs):
            if flags[name].get(pair):
                ax.plot(j, i, "ko", markersize=4)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=90, fontsize=7)
    ax.set_yticks(range(len(pairs)))
    ax.set_yticklabels(pairs, fontsize=7)
    ax.set_xlim(-0.5, len(names) - 0.5)
    ax.set_ylim(-0.5, len(pairs) - 0.5)
    ax.invert_yaxis()
    ax.set_title("Emotion pairs separated per feature")
    ax.grid(alpha=0.2)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_scree(pca_doc, out_path):
    eig = np.array(pca_doc["eigenvalues"])
    explained = np.array(pca_doc["explained"])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(np.arange(1, len(eig) + 1), eig, "o-")
    ax1.axhline(1.0, color="k", linestyle="--", linewidth=1, label="Kaiser")
    ax1.set_xlabel("component")
    ax1.set_ylabel("eigenvalue")
    ax1.legend()
    ax2.plot(np.arange(1, len(explained) + 1), 100 * explained, "o-")
    ax2.set_xlabel("components")
    ax2.set_ylabel("cumulative variance (%)")
    fig.suptitle(f"PCA scree ({pca_doc['n_kaiser']} components above 1)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_confusion(name, doc, out_path):
    counts = np.array(doc["confusion"])
    classes = doc["classes"]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(counts, cmap="Blues")
    for i in range(len(classes)):
        for j in range(len(classes)):
            ax.text(j, i, str(counts[i, j]), ha="center", va="center",
                    fontsize=8,
                    color="white" if counts[i, j] > counts.max() / 2 else "black")
    ax.set_xticks(range(len(classes)))
    ax.set_xticklabels(classes, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(len(classes)))
    ax.set_yticklabels(classes, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"{name}: accuracy {doc['accuracy']:.2f}")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_fscores(comparison, out_path):
    sets = list(comparison.keys())
    classes = comparison[sets[0]]["classes"]
    width = 0.8 / len(sets)
    fig, ax = plt.subplots(figsize=(10, 4))
    x = np.arange(len(classes))
    for k, name in enumerate(sets):
        vals = [comparison[name]["f1"][c] for c in classes]
        ax.bar(x + k * width, vals, width, label=name)
    ax.set_xticks(x + 0.4)
    ax.set_xticklabels(classes)
    ax.set_ylabel("F1")
    ax.set_ylim(0, 1.05)
    ax.set_title("Per-class F-scores by feature set")
    ax.legend(fontsize=7, ncol=len(sets))
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def render_all(analysis_dir, classification_dir, out_dir):
    """Render every figure for which the source files exist."""
    os.makedirs(out_dir, exist_ok=True)
    made = []
    if analysis_dir:
        anova_path = os.path.join(analysis_dir, "anova.csv")
        if os.path.exists(anova_path):
            out = os.path.join(out_dir, "anova.png")
            plot_anova(_read_anova(anova_path), out)
            made.append(out)
        sep_path = os.path.join(analysis_dir, "separation.csv")
        if os.path.exists(sep_path):
            out = os.path.join(out_dir, "separation.png")
            plot_separation(*_read_separation(sep_path), out)
            made.append(out)
        pca_path = os.path.join(analysis_dir, "pca.json")
        if os.path.exists(pca_path):
            with open(pca_path, encoding="utf-8") as fh:
                doc = json.load(fh)
            out = os.path.join(out_dir, "pca_scree.png")
            plot_scree(doc, out)
            made.append(out)
    if classification_dir:
        comp_path = os.path.join(classification_dir, "comparison.json")
        if os.path.exists(comp_path):
            with open(comp_path, encoding="utf-8") as fh:
                comparison = json.load(fh)
            out = os.path.join(out_dir, "fscores.png")
            plot_fscores(comparison, out)
            made.append(out)
            for name, doc in comparison.items():
                out = os.path.join(out_dir, f"confusion_{name}.png")
                plot_confusion(name, doc, out)
                made.append(out)
    return made
