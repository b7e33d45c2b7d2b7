"""Figure rendering. Static images only, so everything runs headless."""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .schemas import (D2D_COLUMNS, THROUGHPUT_COLUMNS, SchemaError,
                      load_rows)

KINDS = ("throughput", "d2d")


@dataclass(frozen=True)
class FigureSpec:
    kind: str            # "throughput" | "d2d"
    in_path: str
    out_path: str        # .png or .svg


@dataclass(frozen=True)
class RenderReport:
    kind: str
    out_path: str
    bars: int = 0        # throughput: bars drawn
    series: int = 0      # d2d: lines per panel
    panels: int = 1


def render(spec: FigureSpec) -> RenderReport:
    if spec.kind not in KINDS:
        raise SchemaError(f"unknown figure kind {spec.kind!r} "
                          f"(expected one of {KINDS})")
    if spec.kind == "throughput":
        return _render_throughput(spec)
    return _render_d2d(spec)


def _render_throughput(spec: FigureSpec) -> RenderReport:
    """Grouped bars per cell and direction.

    Bar height is the across-round mean of the emitted per-user averages;
    whiskers span the per-round range actually present in the file (the
    file carries raw rounds, not intervals, and this tool never recomputes
    statistics).
    """
    rows = load_rows(spec.in_path, THROUGHPUT_COLUMNS)
    cells = sorted({r["cell_id"] for r in rows})
    directions = ["dl", "ul"]

    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    width = 0.38
    bars = 0
    colors = {"dl": "#4878a8", "ul": "#d1894b"}
    for d_idx, direction in enumerate(directions):
        xs, means, err_lo, err_hi = [], [], [], []
        for c_idx, cell in enumerate(cells):
            vals = [r["per_user_avg_bps"] for r in rows
                    if r["cell_id"] == cell and r["direction"] == direction]
            if not vals:
                continue
            mean = sum(vals) / len(vals)
            xs.append(c_idx + (d_idx - 0.5) * width)
            means.append(mean)
            err_lo.append(mean - min(vals))
            err_hi.append(max(vals) - mean)
        ax.bar(xs, means, width=width, label=direction.upper(),
               color=colors[direction],
               yerr=[err_lo, err_hi], capsize=4)
        bars += len(xs)

    ax.set_xticks(range(len(cells)))
    ax.set_xticklabels(cells)
    ax.set_ylabel("average throughput per user [bit/s]")
    ax.set_xlabel("cell")
    ax.legend(title="direction")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.out_path)
    plt.close(fig)
    return RenderReport(kind="throughput", out_path=spec.out_path,
                        bars=bars, panels=1)


def _render_d2d(spec: FigureSpec) -> RenderReport:
    """Success probability and delay versus activity, one line per
    coverage fraction, with the emitted confidence bounds as bands."""
    rows = load_rows(spec.in_path, D2D_COLUMNS)
    phis = sorted({r["phi"] for r in rows})

    fig, (ax_p, ax_d) = plt.subplots(1, 2, figsize=(10.5, 4.2))
    for phi in phis:
        mine = sorted((r for r in rows if r["phi"] == phi),
                      key=lambda r: r["q"])
        qs = [r["q"] for r in mine]
        label = f"phi = {phi:g}"
        line, = ax_p.plot(qs, [r["p_beacon"] for r in mine],
                          marker="o", markersize=3, label=label)
        ax_p.fill_between(qs, [r["p_lo"] for r in mine],
                          [r["p_hi"] for r in mine],
                          color=line.get_color(), alpha=0.25, linewidth=0)
        line_d, = ax_d.plot(qs, [r["delay_ms"] for r in mine],
                            marker="o", markersize=3, label=label)
        ax_d.fill_between(qs, [r["delay_lo"] for r in mine],
                          [r["delay_hi"] for r in mine],
                          color=line_d.get_color(), alpha=0.25, linewidth=0)

    ax_p.set_xlabel("activity probability q")
    ax_p.set_ylabel("beacon success probability")
    ax_p.set_ylim(bottom=0.0)
    ax_p.grid(alpha=0.3)
    ax_p.legend()
    ax_d.set_xlabel("activity probability q")
    ax_d.set_ylabel("discovery delay [ms]")
    ax_d.grid(alpha=0.3)
    ax_d.legend()
    fig.tight_layout()
    fig.savefig(spec.out_path)
    plt.close(fig)
    return RenderReport(kind="d2d", out_path=spec.out_path,
                        series=len(phis), panels=2)
