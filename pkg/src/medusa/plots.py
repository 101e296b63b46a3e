"""Figures for simulation reports.

Uses the object-oriented matplotlib API (``Figure`` + Agg canvas) so that
rendering never touches global pyplot state or needs a display.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

GOLDEN = (5**0.5 - 1) / 2


def figsize(width: float = 5.0) -> tuple[float, float]:
    return (width, width * GOLDEN)


def _save(fig: Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    return path


def latency_cdf(latencies_us: Mapping[str, Sequence[int]], path: str | Path) -> Path:
    """Empirical CDF of commit latency, one curve per pipeline."""
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=figsize())
        ax = fig.add_subplot()
        for label, values in latencies_us.items():
            xs = sorted(v / 1000 for v in values)
            if not xs:
                continue
            ys = [(i + 1) / len(xs) for i in range(len(xs))]
            ax.step(xs, ys, where="post", label=f"{label} (n={len(xs)})")
        ax.set_xlabel("commit latency (simulated ms)")
        ax.set_ylabel("fraction of transactions")
        ax.set_ylim(0, 1.02)
        ax.legend(loc="lower right", frameon=False)
        return _save(fig, Path(path))


def execution_counts(counts: Mapping[str, Mapping[str, int]], path: str | Path) -> Path:
    """Grouped bars: chaincode executions per peer, one group per pipeline."""
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=figsize())
        ax = fig.add_subplot()
        peers = sorted({p for per_peer in counts.values() for p in per_peer})
        width = 0.8 / max(len(counts), 1)
        for i, (label, per_peer) in enumerate(counts.items()):
            xs = [j + i * width for j in range(len(peers))]
            ax.bar(xs, [per_peer.get(p, 0) for p in peers], width=width, label=label)
        ax.set_xticks([j + width * (len(counts) - 1) / 2 for j in range(len(peers))])
        ax.set_xticklabels(peers)
        ax.set_ylabel("chaincode executions")
        ax.legend(frameon=False)
        return _save(fig, Path(path))


def render_report(runs: Mapping[str, tuple], out_dir: str | Path) -> list[Path]:
    """``runs`` maps a label to ``(metrics, latencies_us)``; returns written files."""
    out = Path(out_dir)
    return [
        latency_cdf({label: lat for label, (_, lat) in runs.items()}, out / "latency_cdf.png"),
        execution_counts({label: m.executions for label, (m, _) in runs.items()}, out / "executions.png"),
    ]
