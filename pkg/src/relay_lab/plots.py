"""Figure rendering for evaluation reports (PNG files next to the CSVs)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evalkit import EvalReport


def render_accuracy_curves(report: EvalReport, out_dir: Path) -> list[Path]:
    """One accuracy-vs-length figure per task, one line per model."""
    written = []
    tasks = sorted({r[1] for r in report.rows if r[3] == "final_accuracy"})
    for task in tasks:
        fig, ax = plt.subplots(figsize=(6, 4))
        models = sorted({r[0] for r in report.rows if r[1] == task and r[3] == "final_accuracy"})
        for model in models:
            points = sorted(
                (r[2], r[4]) for r in report.rows
                if r[0] == model and r[1] == task and r[3] == "final_accuracy"
            )
            if points:
                xs, ys = zip(*points)
                ax.plot(xs, ys, marker="o", label=model)
        ax.set_xlabel("problem length")
        ax.set_ylabel("final-answer accuracy")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(f"{task}: accuracy by problem length")
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"accuracy_{task}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_hit_matrices(report: EvalReport, out_dir: Path) -> list[Path]:
    written = []
    for (model, task, length), matrix in sorted(report.hit_matrices.items()):
        fig, ax = plt.subplots(figsize=(5.5, 4))
        im = ax.imshow(np.asarray(matrix), vmin=0.0, vmax=1.0, cmap="viridis", aspect="auto")
        ax.set_xlabel("token position in round")
        ax.set_ylabel("round")
        title = f"{task} length {length}" + (f" ({model})" if model else "")
        ax.set_title(f"hit accuracy: {title}")
        fig.colorbar(im, ax=ax, label="match rate")
        fig.tight_layout()
        suffix = f"__{model}" if model else ""
        path = out_dir / f"hitmatrix_{task}_{length}{suffix}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def render_report_figures(report: EvalReport, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return render_accuracy_curves(report, out_dir) + render_hit_matrices(report, out_dir)
