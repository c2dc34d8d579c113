"""Dependency-free SVG rendering of traces and success-rate grids.

Output is plain text built with fixed number formatting, so identical input
produces identical bytes.
"""

import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import ConfigurationError
from .harness import read_trace_csv

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=40, bottom=50)
FLOOR = 1e-17


def _fmt(v):
    return f"{v:.2f}"


def _svg(width, height, body):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        '<rect width="100%" height="100%" fill="white"/>\n'
        + "".join(body)
        + "</svg>\n"
    )


def trace_svg(rows, title="rel_error"):
    """Line chart of ``rel_error`` against ``t`` with a log10 y axis.

    One polyline, one vertex per trace row; zero or missing errors are drawn
    at ``FLOOR``.
    """
    if not rows:
        raise ConfigurationError("empty trace")
    ts = [r[0] for r in rows]
    errs = [r[2] if (r[2] is not None and r[2] > 0) else FLOOR for r in rows]
    logs = [math.log10(max(e, FLOOR)) for e in errs]
    lo, hi = math.floor(min(logs)), math.ceil(max(logs))
    if hi == lo:
        hi = lo + 1
    t0, t1 = min(ts), max(ts)
    span = (t1 - t0) or 1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(t):
        return MARGIN["left"] + pw * (t - t0) / span

    def py(lg):
        return MARGIN["top"] + ph * (hi - lg) / (hi - lo)

    body = [f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>\n']
    body.append(f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
                'fill="none" stroke="black"/>\n')
    step = max(1, (hi - lo) // 8)
    for e in range(lo, hi + 1, step):
        y = _fmt(py(e))
        body.append(f'<line x1="{MARGIN["left"] - 4}" y1="{y}" x2="{MARGIN["left"]}" y2="{y}" stroke="black"/>\n')
        body.append(f'<text x="{MARGIN["left"] - 8}" y="{y}" text-anchor="end" font-size="11" '
                    f'dominant-baseline="middle">1e{e}</text>\n')
    for t in (t0, t1):
        x = _fmt(px(t))
        body.append(f'<text x="{x}" y="{HEIGHT - MARGIN["bottom"] + 18}" text-anchor="middle" '
                    f'font-size="11">{t}</text>\n')
    body.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">t</text>\n')
    pts = " ".join(f"{_fmt(px(t))},{_fmt(py(lg))}" for t, lg in zip(ts, logs))
    body.append(f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{pts}"/>\n')
    return _svg(WIDTH, HEIGHT, body)


def _shade(rate):
    # white (0) to dark blue (1)
    r = round(255 - 224 * rate)
    g = round(255 - 177 * rate)
    b = round(255 - 99 * rate)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(cells, title="success rate"):
    """Grid with one rectangle per (N, m) pair, shaded by success rate."""
    Ns = sorted({c["N"] for c in cells})
    ms = sorted({c["m"] for c in cells})
    rate = {(c["N"], c["m"]): c["success_rate"] for c in cells}
    cw, ch = 56, 36
    left, top = 60, 50
    width = left + cw * len(ms) + 20
    height = top + ch * len(Ns) + 50
    body = [f'<text x="{width // 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>\n']
    for i, N in enumerate(reversed(Ns)):
        y = top + i * ch
        body.append(f'<text x="{left - 8}" y="{y + ch // 2}" text-anchor="end" font-size="11" '
                    f'dominant-baseline="middle">N={N}</text>\n')
        for j, m in enumerate(ms):
            x = left + j * cw
            v = rate.get((N, m))
            fill = "#dddddd" if v is None else _shade(v)
            label = "" if v is None else f"{v:.2f}"
            body.append(f'<rect class="cell" x="{x}" y="{y}" width="{cw}" height="{ch}" '
                        f'fill="{fill}" stroke="white"/>\n')
            body.append(f'<text x="{x + cw // 2}" y="{y + ch // 2}" text-anchor="middle" '
                        f'font-size="10" dominant-baseline="middle">{label}</text>\n')
    for j, m in enumerate(ms):
        body.append(f'<text x="{left + j * cw + cw // 2}" y="{top + ch * len(Ns) + 16}" '
                    f'text-anchor="middle" font-size="11">{m}</text>\n')
    body.append(f'<text x="{width // 2}" y="{height - 8}" text-anchor="middle" font-size="12">m</text>\n')
    return _svg(width, height, body)


def _grid_groups(cells):
    # cells that differ only in N and m share one heatmap
    groups = {}
    for c in cells:
        key = tuple((k, c[k]) for k in ("solver", "d", "r", "p_s", "lam", "q"))
        groups.setdefault(key, []).append(c)
    return groups


def plot_results(results_dir, out_dir=None):
    """Render every trace CSV and every (N, m) grid found in ``results_dir``.

    Returns the list of written SVG paths.
    """
    src = Path(results_dir)
    if not src.is_dir():
        raise ConfigurationError(f"{src} is not a directory")
    dst = Path(out_dir) if out_dir is not None else src
    dst.mkdir(parents=True, exist_ok=True)
    csvs = sorted(p for p in src.glob("*.csv"))
    summary_path = src / "summary.json"
    if not csvs and not summary_path.exists():
        raise ConfigurationError(f"no trace CSV or summary.json in {src}")
    written = []
    for p in csvs:
        target = dst / (p.stem + ".svg")
        target.write_text(trace_svg(read_trace_csv(p), title=p.stem))
        written.append(target)
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
        for key, cells in sorted(_grid_groups(summary.get("cells", [])).items(), key=lambda kv: repr(kv[0])):
            if len(cells) < 2:
                continue
            tag = "_".join(f"{k}{v}" for k, v in key)
            target = dst / f"grid_{tag}.svg"
            target.write_text(heatmap_svg(cells, title=" ".join(f"{k}={v}" for k, v in key)))
            written.append(target)
    return written
