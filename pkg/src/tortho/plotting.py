"""Report figures written next to the CSV output of ``tortho eval``."""
from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

# fixed metadata so repeated runs write identical files
_META = {"Software": None}


def _save(fig, path):
    FigureCanvasAgg(fig)
    fig.savefig(path, dpi=120, metadata=_META)


def ratio_figure(summaries, path):
    """Grouped bars of relative error per ratio pair, one group per reference."""
    fig = Figure(figsize=(7, 3.6), tight_layout=True)
    ax = fig.add_subplot(1, 1, 1)
    names = list(summaries)
    width = 0.8 / max(len(names), 1)
    for k, name in enumerate(names):
        s = summaries[name]
        rel = [r.rel_err_percent for r in s.records]
        x = np.arange(1, len(rel) + 1) + (k - (len(names) - 1) / 2) * width
        bars = ax.bar(x, rel, width=width, label=f"{name} (mean {s.mean_rel_percent:.4f}%)")
        ax.axhline(s.mean_rel_percent, color=bars.patches[0].get_facecolor(), lw=0.8, ls="--")
    ax.set_xlabel("pair id")
    ax.set_ylabel("relative error (%)")
    ax.set_xticks(np.arange(1, max((len(summaries[n].records) for n in names), default=0) + 1))
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)


def edge_figure(image, report, path):
    """Edge pixels and fitted lines over the ROI, plus inlier fractions."""
    fig = Figure(figsize=(9, 4), tight_layout=True)
    ax = fig.add_subplot(1, 2, 1)
    x0, y0, x1, y1 = report.roi
    img = np.asarray(image)
    ax.imshow(img[y0:y1, x0:x1], cmap="gray", extent=(x0 - 0.5, x1 - 0.5, y1 - 0.5, y0 - 0.5))
    ys, xs = np.nonzero(report.edges)
    ax.plot(xs + x0, ys + y0, ",", color="tab:orange")
    for k, ln in enumerate(report.lines):
        t = (ln.points - ln.fit.point) @ ln.fit.direction
        ends = ln.fit.point + np.outer([t.min(), t.max()], ln.fit.direction)
        ax.plot(ends[:, 0], ends[:, 1], "-", lw=1.2, color="tab:cyan")
        ax.annotate(str(k), ends.mean(axis=0), fontsize=7, color="white")
    ax.set_title("edges and fitted lines")
    ax.set_axis_off()

    bx = fig.add_subplot(1, 2, 2)
    fr = [ln.inlier_fraction for ln in report.lines]
    bx.bar(np.arange(len(fr)), fr, color="tab:blue")
    bx.set_ylim(0, 1.05)
    bx.set_xlabel("line")
    bx.set_ylabel("inlier fraction")
    _save(fig, path)
