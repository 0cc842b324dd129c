"""Tiny deterministic SVG plots: trajectory overlays and error curves.

Output is plain hand-assembled SVG with fixed float formatting, so the
same data always produces byte-identical files.
"""

from __future__ import annotations

import os

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")

_W = 720
_TRAJ_H = 460
_ERR_H = 210
_MARGIN = 48


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _path_d(xs: np.ndarray, ys: np.ndarray) -> str:
    pts = [f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys)]
    return "M " + " L ".join(pts)


def _limits(values: np.ndarray, pad: float = 0.05) -> tuple[float, float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    span = hi - lo
    return lo - pad * span, hi + pad * span


class _Panel:
    """Maps data coordinates into one SVG viewport rectangle."""

    def __init__(self, x0, y0, width, height, xlim, ylim, equal_aspect=False):
        if equal_aspect:
            sx = width / (xlim[1] - xlim[0])
            sy = height / (ylim[1] - ylim[0])
            s = min(sx, sy)
            cx, cy = 0.5 * (xlim[0] + xlim[1]), 0.5 * (ylim[0] + ylim[1])
            xlim = (cx - 0.5 * width / s, cx + 0.5 * width / s)
            ylim = (cy - 0.5 * height / s, cy + 0.5 * height / s)
        self.x0, self.y0, self.w, self.h = x0, y0, width, height
        self.xlim, self.ylim = xlim, ylim

    def map(self, xs, ys):
        px = self.x0 + (np.asarray(xs, float) - self.xlim[0]) / (self.xlim[1] - self.xlim[0]) * self.w
        py = self.y0 + self.h - (np.asarray(ys, float) - self.ylim[0]) / (self.ylim[1] - self.ylim[0]) * self.h
        return px, py

    def frame(self, title: str) -> list[str]:
        parts = [f'<rect x="{self.x0}" y="{self.y0}" width="{self.w}" height="{self.h}" '
                 'fill="none" stroke="#888888" stroke-width="1"/>']
        if title:
            parts.append(f'<text x="{self.x0}" y="{self.y0 - 8}" font-family="monospace" '
                         f'font-size="12" fill="#333333">{title}</text>')
        corner = (f"x [{_fmt(self.xlim[0])}, {_fmt(self.xlim[1])}] "
                  f"y [{_fmt(self.ylim[0])}, {_fmt(self.ylim[1])}]")
        parts.append(f'<text x="{self.x0}" y="{self.y0 + self.h + 14}" font-family="monospace" '
                     f'font-size="10" fill="#666666">{corner}</text>')
        return parts


def _legend(panel: _Panel, labels: list[str]) -> list[str]:
    parts = []
    for i, label in enumerate(labels):
        color = PALETTE[i % len(PALETTE)]
        y = panel.y0 + 16 + 14 * i
        x = panel.x0 + panel.w - 150
        parts.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 18}" y2="{y - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{x + 24}" y="{y}" font-family="monospace" font-size="11" '
                     f'fill="#333333">{label}</text>')
    return parts


def render_run_plot(out_path: str, traj_curves: list[tuple[str, np.ndarray]],
                    err_curves: list[tuple[str, np.ndarray, np.ndarray]] | None = None,
                    title: str = "") -> None:
    """Write one SVG: a top-down trajectory overlay (equal aspect) and,
    below it, per-step velocity-error curves.

    traj_curves: (label, positions (n, >=2)); err_curves: (label, t, err).
    """
    err_curves = err_curves or []
    height = _MARGIN * 2 + _TRAJ_H + ((_ERR_H + _MARGIN) if err_curves else 0)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{height}" '
             f'viewBox="0 0 {_W} {height}">',
             f'<rect width="{_W}" height="{height}" fill="#ffffff"/>']

    all_xy = np.concatenate([np.asarray(c[1], float)[:, :2] for c in traj_curves], axis=0)
    traj = _Panel(_MARGIN, _MARGIN, _W - 2 * _MARGIN, _TRAJ_H,
                  _limits(all_xy[:, 0]), _limits(all_xy[:, 1]), equal_aspect=True)
    parts += traj.frame(title or "trajectory (top view, meters)")
    for i, (label, pos) in enumerate(traj_curves):
        pos = np.asarray(pos, float)
        px, py = traj.map(pos[:, 0], pos[:, 1])
        parts.append(f'<path fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.4" '
                     f'd="{_path_d(px, py)}"/>')
    parts += _legend(traj, [label for label, _ in traj_curves])

    if err_curves:
        y0 = _MARGIN + _TRAJ_H + _MARGIN
        all_t = np.concatenate([np.asarray(c[1], float) for c in err_curves])
        all_e = np.concatenate([np.asarray(c[2], float) for c in err_curves])
        err = _Panel(_MARGIN, y0, _W - 2 * _MARGIN, _ERR_H, _limits(all_t), _limits(all_e, 0.1))
        parts += err.frame("velocity error |v_est - v_gt| (m/s) vs time (s)")
        for i, (label, t, e) in enumerate(err_curves):
            px, py = err.map(t, e)
            parts.append(f'<path fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="1.2" '
                         f'd="{_path_d(px, py)}"/>')
        parts += _legend(err, [label for label, _, _ in err_curves])

    parts.append("</svg>")
    os.makedirs(os.path.dirname(os.path.abspath(out_path)) or ".", exist_ok=True)
    with open(out_path, "w") as f:
        f.write("\n".join(parts) + "\n")


def svg_path_data(svg_text: str) -> list[str]:
    """Extract the d= attribute of every path element (test helper)."""
    out = []
    for chunk in svg_text.split("<path ")[1:]:
        d = chunk.split('d="', 1)[1].split('"', 1)[0]
        out.append(d)
    return out
