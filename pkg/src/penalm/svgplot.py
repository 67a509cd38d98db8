"""Minimal static SVG charts for sweep results.

Line charts and stacked area charts with fixed geometry (720x460), nice
tick selection and a simple legend.  Output is plain deterministic text:
the same data renders to the same bytes, which keeps sweep artifacts
reproducible.
"""

from __future__ import annotations

import math

__all__ = ["line_chart", "stacked_area_chart"]

WIDTH, HEIGHT = 720, 460
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 24, 40, 56

# series colors, cycled in order
PALETTE = ("#1f6fb2", "#d1495b", "#3d8f5f", "#8d6cab", "#c98a2b", "#4f5d75")


def _fmt(v: float) -> str:
    return format(v, ".6g")


def _nice_ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        if t >= lo - step * 1e-9:
            ticks.append(round(t, 12))
        t += step
    return ticks


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str, xs: list[float], lo: float, hi: float):
        self.parts: list[str] = []
        self.x_lo, self.x_hi = min(xs), max(xs)
        if self.x_hi <= self.x_lo:
            self.x_hi = self.x_lo + 1.0
        self.y_ticks = _nice_ticks(lo, hi)
        self.y_lo, self.y_hi = self.y_ticks[0], max(self.y_ticks[-1], hi)
        self.parts.append(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">\n'
        )
        self.parts.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n')
        self.parts.append(
            f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="15">{title}</text>\n'
        )
        self.parts.append(
            f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle">{xlabel}</text>\n'
        )
        self.parts.append(
            f'<text x="18" y="{HEIGHT / 2}" text-anchor="middle" '
            f'transform="rotate(-90 18 {HEIGHT / 2})">{ylabel}</text>\n'
        )
        self._axes(xs)

    def px(self, x: float) -> float:
        span = WIDTH - MARGIN_L - MARGIN_R
        return MARGIN_L + (x - self.x_lo) / (self.x_hi - self.x_lo) * span

    def py(self, y: float) -> float:
        span = HEIGHT - MARGIN_T - MARGIN_B
        if self.y_hi <= self.y_lo:
            return HEIGHT - MARGIN_B
        return HEIGHT - MARGIN_B - (y - self.y_lo) / (self.y_hi - self.y_lo) * span

    def _axes(self, xs: list[float]) -> None:
        x0, x1 = MARGIN_L, WIDTH - MARGIN_R
        y0, y1 = HEIGHT - MARGIN_B, MARGIN_T
        for t in self.y_ticks:
            y = self.py(t)
            self.parts.append(
                f'<line x1="{x0}" y1="{_fmt(y)}" x2="{x1}" y2="{_fmt(y)}" stroke="#ddd"/>\n'
            )
            self.parts.append(
                f'<text x="{x0 - 6}" y="{_fmt(y + 4)}" text-anchor="end">{_fmt(t)}</text>\n'
            )
        for t in _nice_ticks(self.x_lo, self.x_hi):
            x = self.px(t)
            self.parts.append(
                f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 4}" stroke="#333"/>\n'
            )
            self.parts.append(
                f'<text x="{_fmt(x)}" y="{y0 + 18}" text-anchor="middle">{_fmt(t)}</text>\n'
            )
        self.parts.append(
            f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
            f'fill="none" stroke="#333"/>\n'
        )

    def legend(self, labels: list[str]) -> None:
        x = MARGIN_L + 10
        y = MARGIN_T + 8
        for i, label in enumerate(labels):
            color = PALETTE[i % len(PALETTE)]
            self.parts.append(
                f'<rect x="{x}" y="{y + 16 * i}" width="12" height="12" fill="{color}"/>\n'
            )
            self.parts.append(
                f'<text x="{x + 18}" y="{y + 16 * i + 10}">{label}</text>\n'
            )

    def render(self) -> str:
        return "".join(self.parts) + "</svg>\n"


def line_chart(
    title: str,
    xlabel: str,
    ylabel: str,
    xs: list[float],
    series: dict[str, list[float]],
) -> str:
    """Polyline chart; one line per named series, legend in draw order."""
    values = [v for ys in series.values() for v in ys if v == v]  # drop NaN
    lo = min(values, default=0.0)
    hi = max(values, default=1.0)
    canvas = _Canvas(title, xlabel, ylabel, xs, min(lo, 0.0) if lo > 0 and lo / max(hi, 1e-30) < 0.2 else lo, hi)
    for i, (label, ys) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(
            f"{_fmt(canvas.px(x))},{_fmt(canvas.py(y))}" for x, y in zip(xs, ys) if y == y
        )
        canvas.parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{points}"/>\n'
        )
    canvas.legend(list(series.keys()))
    return canvas.render()


def stacked_area_chart(
    title: str,
    xlabel: str,
    ylabel: str,
    xs: list[float],
    series: dict[str, list[float]],
) -> str:
    """Stacked areas bottom-up in insertion order; heights must be >= 0."""
    n = len(xs)
    totals = [0.0] * n
    for ys in series.values():
        for i, v in enumerate(ys):
            if v == v:
                totals[i] += v
    canvas = _Canvas(title, xlabel, ylabel, xs, 0.0, max(totals, default=1.0))
    base = [0.0] * n
    for i, (label, ys) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        top = [base[j] + (ys[j] if ys[j] == ys[j] else 0.0) for j in range(n)]
        forward = [f"{_fmt(canvas.px(xs[j]))},{_fmt(canvas.py(top[j]))}" for j in range(n)]
        back = [f"{_fmt(canvas.px(xs[j]))},{_fmt(canvas.py(base[j]))}" for j in reversed(range(n))]
        canvas.parts.append(
            f'<polygon fill="{color}" fill-opacity="0.75" stroke="none" '
            f'points="{" ".join(forward + back)}"/>\n'
        )
        base = top
    canvas.legend(list(series.keys()))
    return canvas.render()
