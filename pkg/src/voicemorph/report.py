"""Result rendering: factor-by-language grids, score histograms, summaries.

All renderers are pure text/SVG generators: deterministic bytes for
identical inputs, no timestamps, no environment data.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import IoFailureError
from .evaluation import HistogramData
from .metrics import GmapCapacity, GmapConfig, TrialTable, gmap

GENDER_PAIR_ORDER = ("FF", "MM", "Combined")
ABSENT = "—"  # em dash marks cells with no trials

SERIES_COLORS = {
    "genuine": "#1f8a8c",
    "impostor": "#2e8b57",
    "M25": "#dc143c",
    "M50": "#e0b400",
    "M75": "#ff7f50",
    "M100": "#2060c8",
}


@dataclass(frozen=True)
class ResultGrid:
    """Percentages keyed by (factor, language) rows and (device, gender-pair)
    columns; None marks an explicitly absent cell."""

    row_keys: tuple[tuple[str, str], ...]  # (factor, language)
    col_keys: tuple[tuple[str, str], ...]  # (device, gender_pair)
    cells: dict[tuple[str, str, str, str], float | None]

    def __post_init__(self) -> None:
        for (factor, language) in self.row_keys:
            for (device, pair) in self.col_keys:
                key = (factor, language, device, pair)
                if key not in self.cells:
                    raise ValueError(f"grid cell missing: {key}")
                value = self.cells[key]
                if value is not None and not 0.0 <= value <= 100.0:
                    raise ValueError(f"cell {key}: {value} outside [0, 100]")


def render_grid(grid: ResultGrid, fmt: str = "csv") -> str:
    """Render a grid as CSV or Markdown with fixed 2-decimal formatting."""
    headers = ["factor", "language"] + [f"{d}/{p}" for d, p in grid.col_keys]
    rows = []
    for factor, language in grid.row_keys:
        cells = [
            ABSENT if grid.cells[(factor, language, d, p)] is None
            else f"{grid.cells[(factor, language, d, p)]:.2f}"
            for d, p in grid.col_keys
        ]
        rows.append([factor, language] + cells)
    if fmt == "csv":
        lines = [",".join(headers)] + [",".join(r) for r in rows]
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(headers) + " |",
            "|" + "|".join(["---"] * len(headers)) + "|",
        ]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown grid format {fmt!r}")


def build_gmap_grid(
    trials: TrialTable,
    thresholds: dict[str, float],
    backend: str | None = None,
) -> ResultGrid:
    """Multi-probe G-MAP per (factor, language) x (device, gender pair).

    With a backend name the cell holds that verifier's value; with None it
    holds the minimum across all verifiers present ("multi-SVS"). Combined
    pools the FF and MM trial populations.
    """
    factors = trials.attack_types()
    languages = sorted({r.language for r in trials.rows})
    devices = sorted({r.device for r in trials.rows})
    row_keys = tuple((f.name, lang) for f in factors for lang in languages)
    col_keys = tuple((d, p) for d in devices for p in GENDER_PAIR_ORDER)
    capacity = GmapCapacity.MULTI_PROBE if backend else GmapCapacity.MULTI_PROBE_MULTI_SVS
    cells: dict[tuple[str, str, str, str], float | None] = {}
    for factor in factors:
        for language in languages:
            for device in devices:
                for pair in GENDER_PAIR_ORDER:
                    gender = ("FF", "MM") if pair == "Combined" else pair
                    sub = trials.filter(
                        attack_type=factor,
                        language=language,
                        device=device,
                        gender_pair=gender,
                        backend=backend,
                    )
                    key = (factor.name, language, device, pair)
                    if not sub.rows:
                        cells[key] = None
                    else:
                        cells[key] = gmap(sub, GmapConfig(thresholds, capacity))
    return ResultGrid(row_keys=row_keys, col_keys=col_keys, cells=cells)


def full_gmap_by_device(
    trials: TrialTable, thresholds: dict[str, float]
) -> list[tuple[str, float]]:
    """Full-capacity G-MAP (attempts, verifiers, attack types, FTAR) per device."""
    out = []
    for device in sorted({r.device for r in trials.rows}):
        sub = trials.filter(device=device)
        out.append((device, gmap(sub, GmapConfig(thresholds, GmapCapacity.FULL))))
    return out


def summarize_full_gmap(per_device: list[tuple[str, float]], fmt: str = "csv") -> str:
    """One value per device: a header row of device names over a value row."""
    devices = [d for d, _ in per_device]
    values = [f"{v:.2f}" for _, v in per_device]
    if fmt == "csv":
        return ",".join(devices) + "\n" + ",".join(values) + "\n"
    if fmt == "markdown":
        return (
            "| " + " | ".join(devices) + " |\n"
            + "|" + "|".join(["---"] * len(devices)) + "|\n"
            + "| " + " | ".join(values) + " |\n"
        )
    raise ValueError(f"unknown summary format {fmt!r}")


def render_map_matrix_csv(values, attempts, backends) -> str:
    """MAP matrix as CSV: rows attempts, columns minimum systems fooled."""
    header = ["attempts"] + [f">={c}_systems" for c in range(1, len(backends) + 1)]
    lines = [",".join(header)]
    for ri, attempt in enumerate(attempts):
        lines.append(
            ",".join([str(attempt)] + [f"{values[ri, ci]:.2f}" for ci in range(len(backends))])
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Histogram SVG
# ---------------------------------------------------------------------------

_SVG_W, _SVG_H = 640, 400
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 56, 16, 16, 40


def histogram_svg(hist: HistogramData) -> str:
    """Standalone SVG with one translucent bar series per score population."""
    if not hist.series:
        raise ValueError("at least one series required")
    plot_w = _SVG_W - _MARGIN_L - _MARGIN_R
    plot_h = _SVG_H - _MARGIN_T - _MARGIN_B
    max_count = max((int(c.max()) for c in hist.series.values()), default=0)
    y_top = max(max_count, 1)
    edges = hist.bin_edges

    def x_at(v: float) -> float:
        return _MARGIN_L + (v + 1.0) / 2.0 * plot_w

    def y_at(count: float) -> float:
        return _MARGIN_T + plot_h * (1.0 - count / y_top)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect x="0" y="0" width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
    ]
    for name, counts in hist.series.items():
        color = SERIES_COLORS.get(name, "#888888")
        for i, count in enumerate(counts):
            if count <= 0:
                continue
            x0 = x_at(float(edges[i]))
            x1 = x_at(float(edges[i + 1]))
            y0 = y_at(float(count))
            parts.append(
                f'<rect class="bar" x="{x0:.2f}" y="{y0:.2f}" '
                f'width="{x1 - x0:.2f}" height="{_MARGIN_T + plot_h - y0:.2f}" '
                f'fill="{color}" fill-opacity="0.45"/>'
            )
    axis_y = _MARGIN_T + plot_h
    parts.append(
        f'<line x1="{_MARGIN_L}" y1="{axis_y}" x2="{_SVG_W - _MARGIN_R}" y2="{axis_y}" '
        f'stroke="black" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" y2="{axis_y}" '
        f'stroke="black" stroke-width="1"/>'
    )
    for tick in (-1.0, -0.5, 0.0, 0.5, 1.0):
        x = x_at(tick)
        parts.append(
            f'<line x1="{x:.2f}" y1="{axis_y}" x2="{x:.2f}" y2="{axis_y + 5}" '
            f'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{axis_y + 18}" font-size="11" '
            f'text-anchor="middle">{tick:g}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_L - 8}" y="{_MARGIN_T + 10}" font-size="11" '
        f'text-anchor="end">{y_top}</text>'
    )
    parts.append(
        f'<text x="{(_MARGIN_L + _SVG_W - _MARGIN_R) / 2:.2f}" y="{_SVG_H - 6}" '
        f'font-size="12" text-anchor="middle">match score</text>'
    )
    legend_y = _MARGIN_T + 8
    for name in hist.series:
        color = SERIES_COLORS.get(name, "#888888")
        parts.append(
            f'<rect x="{_SVG_W - _MARGIN_R - 120}" y="{legend_y - 9}" width="12" '
            f'height="12" fill="{color}" fill-opacity="0.45"/>'
        )
        parts.append(
            f'<text x="{_SVG_W - _MARGIN_R - 103}" y="{legend_y + 2}" '
            f'font-size="12">{name}</text>'
        )
        legend_y += 18
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_histogram_svg(hist: HistogramData, path: str | Path) -> None:
    try:
        Path(path).write_text(histogram_svg(hist), encoding="utf-8")
    except OSError as exc:
        raise IoFailureError(f"failed to write {path}: {exc}") from exc


def histogram_csv(hist: HistogramData) -> str:
    """Binned counts as delimited text alongside the rendered figures."""
    names = list(hist.series)
    lines = [",".join(["bin_left", "bin_right"] + names)]
    for i in range(len(hist.bin_edges) - 1):
        row = [f"{hist.bin_edges[i]:.6f}", f"{hist.bin_edges[i + 1]:.6f}"]
        row += [str(int(hist.series[n][i])) for n in names]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
