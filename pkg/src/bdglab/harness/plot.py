"""SVG figures from a sweep report: error versus hbar and conserved-quantity drifts."""
from __future__ import annotations

import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..errors import ReportParseError

W, H = 640, 420
PAD_L, PAD_R, PAD_T, PAD_B = 80, 24, 36, 56
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def slope_label(slope: float, pm: float) -> str:
    return f"slope = {slope:.3f} ± {abs(pm):.3f}"


class _Axes:
    def __init__(self, x0, x1, y0, y1, box=(PAD_L, PAD_T, W - PAD_L - PAD_R, H - PAD_T - PAD_B)):
        if x1 <= x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 <= y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1
        self.bx, self.by, self.bw, self.bh = box

    def px(self, x):
        return self.bx + (x - self.x0) / (self.x1 - self.x0) * self.bw

    def py(self, y):
        return self.by + self.bh - (y - self.y0) / (self.y1 - self.y0) * self.bh

    def frame(self, xlabel, ylabel, xticks, yticks) -> list[str]:
        out = [f'<rect x="{self.bx}" y="{self.by}" width="{self.bw}" height="{self.bh}" '
               'fill="none" stroke="#333"/>']
        for v, lab in xticks:
            x = self.px(v)
            out.append(f'<line x1="{x:.2f}" y1="{self.by + self.bh}" x2="{x:.2f}" '
                       f'y2="{self.by + self.bh + 5}" stroke="#333"/>')
            out.append(f'<text x="{x:.2f}" y="{self.by + self.bh + 18}" text-anchor="middle">'
                       f'{escape(lab)}</text>')
        for v, lab in yticks:
            y = self.py(v)
            out.append(f'<line x1="{self.bx - 5}" y1="{y:.2f}" x2="{self.bx}" y2="{y:.2f}" stroke="#333"/>')
            out.append(f'<text x="{self.bx - 8}" y="{y + 4:.2f}" text-anchor="end">{escape(lab)}</text>')
        if xlabel:
            out.append(f'<text x="{self.bx + self.bw / 2:.2f}" y="{H - 12}" text-anchor="middle">'
                       f'{escape(xlabel)}</text>')
        out.append(f'<text x="16" y="{self.by + self.bh / 2:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {self.by + self.bh / 2:.2f})">{escape(ylabel)}</text>')
        return out


def _doc(title, body) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">')
    return "\n".join([head, f'<title>{escape(title)}</title>',
                      f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
                      *body, "</svg>"]) + "\n"


def _log_ticks(lo, hi):
    ticks = []
    for k in range(math.floor(lo), math.ceil(hi) + 1):
        if lo - 1e-9 <= k <= hi + 1e-9:
            ticks.append((k, f"1e{k}"))
    if len(ticks) < 2:
        ticks = [(v, f"{10 ** v:.2g}") for v in np.linspace(lo, hi, 4)]
    return ticks


def _lin_ticks(lo, hi, n=5):
    return [(v, f"{v:.3g}") for v in np.linspace(lo, hi, n)]


def _validated(report) -> list:
    if not isinstance(report, dict):
        raise ReportParseError("report must be a JSON object")
    if report.get("schema") != 1:
        raise ReportParseError(f"unsupported report schema {report.get('schema')!r}")
    fits = report.get("fits")
    if not isinstance(fits, list) or not fits:
        raise ReportParseError("report has no fits")
    for f in fits:
        if not isinstance(f, dict) or not {"t", "hbar", "total"} <= set(f):
            raise ReportParseError("each fit needs t, hbar and total")
        try:
            x = np.asarray(f["hbar"], float)
            y = np.asarray(f["total"], float)
        except (TypeError, ValueError) as exc:
            raise ReportParseError(f"non-numeric data in fit at t = {f.get('t')}") from exc
        if x.ndim != 1 or x.shape != y.shape:
            raise ReportParseError("hbar and total must be equal-length lists")
    if not any(len(f["hbar"]) for f in fits):
        raise ReportParseError("report holds no data points")
    return fits


def error_plot(report: dict) -> str:
    from .run import fit_slope

    fits = _validated(report)
    pts = []
    for f in fits:
        x = np.asarray(f["hbar"], float)
        y = np.asarray(f["total"], float)
        ok = (x > 0) & (y > 0)
        pts.append((f, np.log10(x[ok]), np.log10(y[ok])))
    allx = np.concatenate([p[1] for p in pts])
    ally = np.concatenate([p[2] for p in pts])
    if allx.size == 0:
        raise ReportParseError("no positive data to plot on log axes")
    ax = _Axes(allx.min() - 0.05, allx.max() + 0.05, ally.min() - 0.2, ally.max() + 0.2)
    body = ax.frame("hbar", "total squared error", _log_ticks(ax.x0, ax.x1), _log_ticks(ax.y0, ax.y1))
    for i, (f, lx, ly) in enumerate(pts):
        col = COLORS[i % len(COLORS)]
        for a, b in zip(lx, ly):
            body.append(f'<circle cx="{ax.px(a):.2f}" cy="{ax.py(b):.2f}" r="4" fill="{col}"/>')
        fit = f.get("fit") or {}
        slope, pm = fit.get("slope"), fit.get("pm")
        icpt = fit.get("intercept")
        if slope is None or pm is None or icpt is None:
            fit = fit_slope(10 ** lx, 10 ** ly) if lx.size >= 2 else {}
            slope, pm, icpt = fit.get("slope"), fit.get("pm"), fit.get("intercept")
        label = f"t = {float(f['t']):g}"
        if slope is not None:
            # intercept is in natural log units
            xa, xb = lx.min(), lx.max()
            ya = slope * xa + icpt / math.log(10)
            yb = slope * xb + icpt / math.log(10)
            body.append(f'<line x1="{ax.px(xa):.2f}" y1="{ax.py(ya):.2f}" x2="{ax.px(xb):.2f}" '
                        f'y2="{ax.py(yb):.2f}" stroke="{col}" stroke-width="1.5"/>')
            label += ": " + slope_label(slope, pm)
        body.append(f'<text x="{PAD_L + 10}" y="{PAD_T + 18 + 16 * i}" fill="{col}">{escape(label)}</text>')
    return _doc("error vs hbar", body)


def conserved_plot(report: dict) -> str:
    _validated(report)
    cells = [c for c in report.get("cells", []) if c.get("ok") and c.get("series", {}).get("t")]
    body = []
    half = (H - PAD_T - PAD_B - 30) / 2
    panels = (("trace_drift", "trace - 1", PAD_T), ("energy_drift", "energy drift", PAD_T + half + 30))
    for key, ylabel, top in panels:
        ys = [np.asarray(c["series"][key], float) for c in cells]
        ts = [np.asarray(c["series"]["t"], float) for c in cells]
        if ys:
            lo = min(float(y.min()) for y in ys)
            hi = max(float(y.max()) for y in ys)
            t1 = max(float(t.max()) for t in ts)
        else:
            lo, hi, t1 = -1.0, 1.0, 1.0
        if hi - lo < 1e-300:
            lo, hi = lo - 1e-16, hi + 1e-16
        ax = _Axes(0.0, max(t1, 1e-12), lo, hi, (PAD_L, top, W - PAD_L - PAD_R, half))
        xlabel = "t" if key == "energy_drift" else None
        body += ax.frame(xlabel, ylabel, _lin_ticks(ax.x0, ax.x1), _lin_ticks(ax.y0, ax.y1, 3))
        for i, (t, y) in enumerate(zip(ts, ys)):
            pts = " ".join(f"{ax.px(a):.2f},{ax.py(b):.2f}" for a, b in zip(t, y))
            body.append(f'<polyline points="{pts}" fill="none" stroke="{COLORS[i % len(COLORS)]}"/>')
    legend = [f'hbar = {c["hbar"]:.4g}' for c in cells]
    for i, lab in enumerate(legend):
        body.append(f'<text x="{W - PAD_R - 8}" y="{PAD_T + 14 + 14 * i}" text-anchor="end" '
                    f'fill="{COLORS[i % len(COLORS)]}">{escape(lab)}</text>')
    return _doc("conserved quantities", body)


def render(report: dict) -> dict:
    """Pure map from a report object to {file name: SVG text}."""
    return {"error_vs_hbar.svg": error_plot(report), "conserved.svg": conserved_plot(report)}


def load_report(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ReportParseError(f"{path}: {exc}") from exc


def plot(report_path, out) -> list[Path]:
    figs = render(load_report(report_path))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in figs.items():
        p = out / name
        p.write_text(text)
        paths.append(p)
    return paths
