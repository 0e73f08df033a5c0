"""Trace serialization: CSV rows and a minimal SVG convergence plot."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

from .diagnostics import TraceRecord

CSV_HEADER = "k,v_norm,cos_theta,objective,support_size,rank,extrapolated,cos_vartheta"


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return ""
    return format(value, ".17g")


def trace_rows(trace: Iterable[TraceRecord]):
    """CSV lines (without newline) for ``trace``, header first."""
    yield CSV_HEADER
    for r in trace:
        yield ",".join(_cell(v) for v in (r.k, r.v_norm, r.cos_theta, r.objective,
                                            r.support_size, r.rank, r.extrapolated,
                                            r.cos_vartheta))


def write_trace_csv(path, trace: Sequence[TraceRecord]):
    """Write ``trace`` to ``path``; floats carry 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for line in trace_rows(trace):
            handle.write(line + "\n")


def svg_polyline(trace: Sequence[TraceRecord], width=640, height=400, margin=40, title=""):
    """SVG document plotting ``log10 v_norm`` against ``k`` as one polyline."""
    points = [(r.k, math.log10(r.v_norm)) for r in trace if r.v_norm and r.v_norm > 0]
    body = []
    if points:
        k_lo, k_hi = points[0][0], points[-1][0]
        y_lo = min(p[1] for p in points)
        y_hi = max(p[1] for p in points)
        k_span = max(k_hi - k_lo, 1)
        y_span = max(y_hi - y_lo, 1e-12)
        inner_w, inner_h = width - 2 * margin, height - 2 * margin
        coords = " ".join(
            f"{margin + inner_w * (k - k_lo) / k_span:.2f},"
            f"{margin + inner_h * (y_hi - y) / y_span:.2f}" for k, y in points)
        body.append(f'<polyline fill="none" stroke="black" stroke-width="1" points="{coords}"/>')
        body.append(f'<text x="{margin}" y="{margin - 8}" font-size="12">'
                    f"log10 v_norm from {y_hi:.2f} to {y_lo:.2f}, k = {k_lo}..{k_hi}</text>")
    if title:
        body.append(f'<text x="{margin}" y="{height - 10}" font-size="12">{_escape(title)}</text>')
    body.append(f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
                f'height="{height - 2 * margin}" fill="none" stroke="gray"/>')
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n' + "\n".join(body) + "\n</svg>\n")


def _escape(text):
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_svg(path, trace: Sequence[TraceRecord], title=""):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(svg_polyline(trace, title=title))
