"""Self-contained SVG figures: heatmaps (embedded PNG) and line plots.

Heatmap colour ramp, 8-bit input level v in 0..255 mapped by piecewise-linear
interpolation between these anchors (level: R, G, B)::

      0:   0,   0,   0   black
     64:  40,   0, 120   deep violet
    128: 200,  30,  70   crimson
    192: 255, 160,   0   orange
    255: 255, 255, 230   near white

Levels are ``round(255 * I / max(I))`` (linear in intensity).
"""

from __future__ import annotations

import base64
import math
import struct
import zlib
from html import escape

import numpy as np

RAMP_LEVELS = np.array([0, 64, 128, 192, 255], dtype=float)
RAMP_RGB = np.array(
    [[0, 0, 0], [40, 0, 120], [200, 30, 70], [255, 160, 0], [255, 255, 230]], dtype=float
)
MAX_IMAGE_PIXELS = 800
MAX_LINE_POINTS = 4000
PALETTE = ("#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400")


def color_ramp(levels) -> np.ndarray:
    """uint8 RGB for integer levels 0..255."""
    v = np.asarray(levels, dtype=float)
    rgb = np.stack([np.interp(v, RAMP_LEVELS, RAMP_RGB[:, c]) for c in range(3)], axis=-1)
    return np.rint(rgb).astype(np.uint8)


def png_bytes(rgb: np.ndarray) -> bytes:
    """Minimal truecolour PNG (no interlace, filter 0 on every row)."""
    h, w, _ = rgb.shape
    raw = b"".join(b"\x00" + rgb[r].tobytes() for r in range(h))

    def chunk(tag, data):
        return (struct.pack(">I", len(data)) + tag + data
                + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF))

    header = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header)
            + chunk(b"IDAT", zlib.compress(raw, 9)) + chunk(b"IEND", b""))


def _downsample(img: np.ndarray, limit: int) -> np.ndarray:
    """Block-average so neither side exceeds ``limit`` pixels."""
    for axis in (0, 1):
        n = img.shape[axis]
        if n > limit:
            f = math.ceil(n / limit)
            pad = (-n) % f
            if pad:
                widths = [(0, 0), (0, 0)]
                widths[axis] = (0, pad)
                img = np.pad(img, widths, mode="edge")
            shape = list(img.shape)
            shape[axis] = img.shape[axis] // f
            shape.insert(axis + 1, f)
            img = img.reshape(shape).mean(axis=axis + 1)
    return img


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    k = 0
    while start + k * step <= hi + 1e-9 * step:
        ticks.append(round(start + k * step, 12))
        k += 1
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.6g}"


class _Frame:
    """Plot area geometry and axis drawing shared by both figure kinds."""

    def __init__(self, xlim, ylim, width=640, height=480, left=80, right=30, top=40, bottom=60):
        self.xlim, self.ylim = xlim, ylim
        self.width, self.height = width, height
        self.x0, self.x1 = left, width - right
        self.y0, self.y1 = top, height - bottom

    def px(self, x):
        a, b = self.xlim
        return self.x0 + (np.asarray(x, dtype=float) - a) / (b - a) * (self.x1 - self.x0)

    def py(self, y):
        a, b = self.ylim
        return self.y1 - (np.asarray(y, dtype=float) - a) / (b - a) * (self.y1 - self.y0)

    def axes(self, xlabel, ylabel, title) -> list[str]:
        out = [
            f'<rect x="{self.x0}" y="{self.y0}" width="{self.x1 - self.x0}" '
            f'height="{self.y1 - self.y0}" fill="none" stroke="black"/>'
        ]
        for t in nice_ticks(*self.xlim):
            x = float(self.px(t))
            out.append(f'<line x1="{x:.2f}" y1="{self.y1}" x2="{x:.2f}" y2="{self.y1 + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.2f}" y="{self.y1 + 18}" text-anchor="middle">{_fmt(t)}</text>')
        for t in nice_ticks(*self.ylim):
            y = float(self.py(t))
            out.append(f'<line x1="{self.x0 - 5}" y1="{y:.2f}" x2="{self.x0}" y2="{y:.2f}" stroke="black"/>')
            out.append(f'<text x="{self.x0 - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
        cx = 0.5 * (self.x0 + self.x1)
        cy = 0.5 * (self.y0 + self.y1)
        out.append(f'<text x="{cx:.1f}" y="{self.height - 15}" text-anchor="middle">{escape(xlabel)}</text>')
        out.append(
            f'<text x="18" y="{cy:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 18 {cy:.1f})">{escape(ylabel)}</text>'
        )
        out.append(f'<text x="{cx:.1f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>')
        return out

    def document(self, body: list[str]) -> str:
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif" font-size="12">\n'
            + "\n".join(body) + "\n</svg>\n"
        )


def heatmap_svg(z: np.ndarray, x: np.ndarray, y: np.ndarray, xlabel: str, ylabel: str,
                title: str = "") -> str:
    """``z[i, j]`` is plotted at (x[j], y[i]); y increases upwards."""
    z = np.asarray(z, dtype=float)
    zmax = float(z.max()) if z.size else 0.0
    levels = np.rint(255.0 * z / zmax) if zmax > 0 else np.zeros_like(z)
    img = _downsample(levels, MAX_IMAGE_PIXELS)
    rgb = color_ramp(np.rint(img)[::-1])  # first image row is the top
    data = base64.b64encode(png_bytes(rgb)).decode("ascii")
    frame = _Frame((float(x[0]), float(x[-1])), (float(y[0]), float(y[-1])), width=620, height=560)
    body = [
        f'<image x="{frame.x0}" y="{frame.y0}" width="{frame.x1 - frame.x0}" '
        f'height="{frame.y1 - frame.y0}" preserveAspectRatio="none" '
        f'style="image-rendering:pixelated" href="data:image/png;base64,{data}"/>'
    ]
    body += frame.axes(xlabel, ylabel, title)
    return frame.document(body)


def decimate(x, y, limit: int = MAX_LINE_POINTS):
    """Min/max per bucket so narrow peaks survive thinning to about ``limit`` points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size <= limit:
        return x, y
    buckets = limit // 2
    edges = np.linspace(0, x.size, buckets + 1).astype(int)
    keep = []
    for a, b in zip(edges[:-1], edges[1:]):
        seg = y[a:b]
        i, j = a + int(np.argmin(seg)), a + int(np.argmax(seg))
        keep += sorted({i, j})
    idx = np.array(keep)
    return x[idx], y[idx]


def line_plot_svg(series, xlabel: str, ylabel: str, title: str = "", ylim=None,
                  markers: bool = False) -> str:
    """``series`` is a list of ``(label, x, y)``; colours cycle through PALETTE."""
    xs = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    xlim = (float(xs.min()), float(xs.max()))
    if xlim[1] == xlim[0]:
        xlim = (xlim[0] - 0.5, xlim[0] + 0.5)
    if ylim is None:
        lo, hi = float(ys.min()), float(ys.max())
        pad = 0.05 * (hi - lo) or 0.5
        ylim = (lo - pad, hi + pad)
    frame = _Frame(xlim, ylim)
    body = frame.axes(xlabel, ylabel, title)
    for k, (label, x, y) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        x, y = decimate(x, y)
        px, py = frame.px(x), frame.py(y)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if markers:
            body += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.5" fill="{color}"/>'
                     for a, b in zip(px, py)]
        ly = frame.y0 + 16 + 16 * k
        body.append(f'<line x1="{frame.x1 - 150}" y1="{ly - 4}" x2="{frame.x1 - 125}" '
                    f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{frame.x1 - 120}" y="{ly}">{escape(label)}</text>')
    return frame.document(body)
