"""Matplotlib rendering for run reports.

CSV/JSON stay the data contract; every figure here is derived from them
and written next to them. Uses the Agg backend so runs work headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "figure.figsize": (6.0, 3.6),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_trace(records, path: str | Path, title: str = "attack trace") -> Path:
    """Loss per iteration, with validation success overlaid when sampled."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        iters = [r.iteration for r in records]
        ax.plot(iters, [r.loss for r in records], lw=1.2, color="tab:blue", label="loss")
        ax.set_xlabel("iteration")
        ax.set_ylabel("loss")
        ax.set_title(title)
        sampled = [(r.iteration, r.retacc) for r in records if r.retacc is not None]
        if sampled:
            twin = ax.twinx()
            twin.plot(
                [i for i, _ in sampled],
                [1.0 - r for _, r in sampled],
                lw=1.2,
                color="tab:red",
                label="success rate",
            )
            twin.set_ylabel("1 - RetAcc")
            twin.set_ylim(-0.02, 1.02)
            twin.spines.top.set_visible(False)
        return _save(fig, path)


def render_asr(asr: dict, path: str | Path, title: str = "attack success rate") -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ks = sorted(int(k) for k in asr)
        ax.bar([str(k) for k in ks], [asr[k] if k in asr else asr[str(k)] for k in ks], color="tab:blue")
        ax.set_xlabel("top k")
        ax.set_ylabel("ASR")
        ax.set_ylim(0, 1.05)
        ax.set_title(title)
        return _save(fig, path)


def render_quality(report, path: str | Path) -> Path:
    """Mean candidate success and best-candidate containment per strategy."""
    strategies = list(report.mean_success)
    with plt.rc_context(_STYLE):
        fig, (left, right) = plt.subplots(1, 2, figsize=(7.5, 3.4))
        left.bar(strategies, [report.mean_success[s] for s in strategies], color="tab:blue")
        left.set_ylabel("mean candidate success")
        left.set_title("candidate set quality")
        right.bar(strategies, [report.containment_fraction(s) for s in strategies], color="tab:orange")
        right.set_ylabel("best-candidate containment")
        right.set_ylim(0, 1.05)
        right.set_title(f"{report.trials} trials")
        for ax in (left, right):
            ax.grid(True, alpha=0.3)
            ax.spines.top.set_visible(False)
            ax.spines.right.set_visible(False)
        return _save(fig, path)


def render_sweep(series: list[tuple[str, list[int], list[float]]], path: str | Path, axis_label: str) -> Path:
    """Per-axis-value validation success curves over attack iterations."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, iters, success in series:
            ax.plot(iters, success, lw=1.2, label=f"{axis_label}={label}")
        ax.set_xlabel("iteration")
        ax.set_ylabel("1 - RetAcc")
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(f"effect of {axis_label}")
        ax.legend(fontsize=8)
        return _save(fig, path)
