"""Static pictures: an SVG of one packing, and a matplotlib chart of bench rows.

The SVG is hand-written text so the same packing always yields the same
bytes. The y-axis is flipped so y = 0 is the bottom of the strip.
"""
from __future__ import annotations

from pathlib import Path

from .core import Instance, Packing, placed_rects

CLASS_FILL = {
    "L": "#4c72b0",
    "T": "#dd8452",
    "V": "#55a868",
    "H": "#c44e52",
    "S": "#8172b3",
    "M": "#937860",
}
DEFAULT_FILL = "#9db4d0"


def packing_svg(instance: Instance, packing: Packing, classification: dict[int, str] | None = None,
                scale: int = 4) -> str:
    W, H = instance.W, packing.height
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W * scale}" height="{H * scale}" '
        f'viewBox="0 0 {W} {H}" preserveAspectRatio="none">',
        f'<title>strip W={W} height={H}</title>',
    ]
    for r in sorted(placed_rects(instance, packing), key=lambda r: r.id):
        cls = (classification or {}).get(r.id)
        fill = CLASS_FILL.get(cls, DEFAULT_FILL)
        tag = f' data-class="{cls}"' if cls else ""
        lines.append(
            f'<rect id="item-{r.id}" x="{r.x}" y="{H - r.top}" width="{r.w}" height="{r.h}" '
            f'fill="{fill}" stroke="#222" stroke-width="0.05"{tag}/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(instance: Instance, packing: Packing, path, classification=None) -> None:
    Path(path).write_text(packing_svg(instance, packing, classification), encoding="utf-8")


def plot_bench(rows, path) -> None:
    """Bar chart of height / lower bound per instance, one bar per algorithm."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    instances = sorted({r.instance for r in rows})
    algos = sorted({r.algo for r in rows})
    ratio = {(r.instance, r.algo): r.ratio for r in rows}
    width = 0.8 / max(len(algos), 1)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(instances) * max(len(algos), 1)), 3.2))
    for k, algo in enumerate(algos):
        xs = [i + k * width for i in range(len(instances))]
        ax.bar(xs, [ratio.get((name, algo), 0.0) for name in instances], width, label=algo)
    ax.axhline(1.0, color="black", linewidth=0.8)
    ax.set_xticks([i + width * (len(algos) - 1) / 2 for i in range(len(instances))])
    ax.set_xticklabels(instances, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("height / lower bound")
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
