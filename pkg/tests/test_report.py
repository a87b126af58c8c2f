import csv
import io
from pathlib import Path

import numpy as np
import pytest

from conftest import make_random_table
from voicemorph.evaluation import HistogramData
from voicemorph.metrics import GmapCapacity, GmapConfig, gmap, map_matrix
from voicemorph.morphing import MorphFactor
from voicemorph.report import (
    ResultGrid,
    build_gmap_grid,
    full_gmap_by_device,
    histogram_csv,
    histogram_svg,
    render_grid,
    render_histogram_svg,
    render_map_matrix_csv,
    summarize_full_gmap,
)

GOLDEN = Path(__file__).parent / "golden"


def full_shape_grid() -> ResultGrid:
    factors = ["M25", "M50", "M75", "M100"]
    languages = ["Bengali", "English", "Hindi"]
    devices = ["iPhone11", "SamsungS8"]
    pairs = ["FF", "MM", "Combined"]
    row_keys = tuple((f, l) for f in factors for l in languages)
    col_keys = tuple((d, p) for d in devices for p in pairs)
    cells = {}
    for i, (f, l) in enumerate(row_keys):
        for j, (d, p) in enumerate(col_keys):
            cells[(f, l, d, p)] = round(20.0 + 3.7 * i + 1.3 * j, 2)
    cells[("M25", "English", "iPhone11", "Combined")] = 48.54
    cells[("M100", "Hindi", "SamsungS8", "MM")] = None
    return ResultGrid(row_keys=row_keys, col_keys=col_keys, cells=cells)


class TestRenderGrid:
    def test_single_cell_formatting(self):
        grid = ResultGrid(
            row_keys=(("M25", "English"),),
            col_keys=(("iPhone11", "Combined"),),
            cells={("M25", "English", "iPhone11", "Combined"): 48.54},
        )
        text = render_grid(grid, "csv")
        assert text.splitlines()[1] == "M25,English,48.54"

    def test_matches_golden_csv(self):
        assert render_grid(full_shape_grid(), "csv") == (GOLDEN / "gmap_grid.csv").read_text()

    def test_matches_golden_markdown(self):
        assert render_grid(full_shape_grid(), "markdown") == (GOLDEN / "gmap_grid.md").read_text()

    def test_empty_grid_header_only(self):
        grid = ResultGrid(row_keys=(), col_keys=(("d", "FF"),), cells={})
        assert render_grid(grid, "csv") == "factor,language,d/FF\n"

    def test_deterministic(self):
        grid = full_shape_grid()
        assert render_grid(grid, "csv") == render_grid(grid, "csv")

    def test_absent_cell_rendered_as_dash(self):
        text = render_grid(full_shape_grid(), "csv")
        assert "—" in text

    def test_csv_roundtrips_to_two_decimals(self):
        grid = full_shape_grid()
        reader = csv.DictReader(io.StringIO(render_grid(grid, "csv")))
        for row in reader:
            factor, language = row["factor"], row["language"]
            for col, value in row.items():
                if col in ("factor", "language"):
                    continue
                device, pair = col.split("/")
                expected = grid.cells[(factor, language, device, pair)]
                if expected is None:
                    assert value == "—"
                else:
                    assert float(value) == round(expected, 2)

    def test_missing_cell_rejected(self):
        with pytest.raises(ValueError, match="missing"):
            ResultGrid(row_keys=(("M25", "x"),), col_keys=(("d", "FF"),), cells={})

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            ResultGrid(
                row_keys=(("M25", "x"),),
                col_keys=(("d", "FF"),),
                cells={("M25", "x", "d", "FF"): 104.0},
            )


class TestFullGmapSummary:
    def test_matches_golden(self):
        per_device = [("iPhone-11", 52.08), ("SamsungS8", 56.61)]
        assert summarize_full_gmap(per_device, "csv") == (GOLDEN / "gmap_full.csv").read_text()
        assert summarize_full_gmap(per_device, "markdown") == (GOLDEN / "gmap_full.md").read_text()

    def test_single_device(self):
        assert summarize_full_gmap([("synth", 14.58)], "csv") == "synth\n14.58\n"


class TestGridFromTrials:
    def test_cells_equal_direct_gmap(self):
        rng = np.random.default_rng(9)
        table = make_random_table(
            rng, n_morphs=6, attempts=2, backends=("b1",),
            factors=(MorphFactor.M25, MorphFactor.M100), gender_pairs=("FF", "MM"),
        )
        thresholds = {"b1": 0.2}
        grid = build_gmap_grid(table, thresholds, backend="b1")
        for factor in table.attack_types():
            sub = table.filter(attack_type=factor, gender_pair=("FF", "MM"))
            expected = gmap(sub, GmapConfig(thresholds, GmapCapacity.MULTI_PROBE))
            assert grid.cells[(factor.name, "lang", "dev", "Combined")] == expected

    def test_absent_combination_is_none(self):
        rng = np.random.default_rng(10)
        table = make_random_table(
            rng, n_morphs=3, attempts=2, factors=(MorphFactor.M25,), gender_pairs=("FF",)
        )
        grid = build_gmap_grid(table, {"b1": 0.2}, backend="b1")
        assert grid.cells[("M25", "lang", "dev", "MM")] is None

    def test_full_gmap_by_device(self):
        rng = np.random.default_rng(11)
        table = make_random_table(rng, n_morphs=4, attempts=2, factors=(MorphFactor.M50,))
        [(device, value)] = full_gmap_by_device(table, {"b1": 0.2})
        assert device == "dev"
        assert value == gmap(table, GmapConfig({"b1": 0.2}, GmapCapacity.FULL))


def hist(series: dict[str, list[int]], bins=4) -> HistogramData:
    edges = np.linspace(-1.0, 1.0, bins + 1)
    return HistogramData(
        bin_edges=edges, series={k: np.asarray(v) for k, v in series.items()}
    )


class TestHistogramSvg:
    def test_bar_count(self):
        svg = histogram_svg(hist({"genuine": [1, 2, 3, 4], "impostor": [4, 3, 2, 1]}))
        assert svg.count('class="bar"') == 8

    def test_zero_counts_axis_only(self):
        svg = histogram_svg(hist({"genuine": [0, 0, 0, 0]}))
        assert 'class="bar"' not in svg
        assert "<line" in svg

    def test_byte_identical(self, tmp_path):
        h = hist({"genuine": [1, 0, 2, 1], "M25": [0, 1, 1, 0]})
        render_histogram_svg(h, tmp_path / "a.svg")
        render_histogram_svg(h, tmp_path / "b.svg")
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_legend_names_series(self):
        names = ["genuine", "impostor", "M25", "M50", "M75", "M100"]
        svg = histogram_svg(hist({n: [1, 1, 1, 1] for n in names}))
        for name in names:
            assert f">{name}</text>" in svg


class TestHistogramCsv:
    def test_layout(self):
        text = histogram_csv(hist({"genuine": [1, 2, 3, 4]}))
        lines = text.splitlines()
        assert lines[0] == "bin_left,bin_right,genuine"
        assert len(lines) == 5
        assert lines[1].endswith(",1")


class TestMapMatrixCsv:
    def test_shape_and_values(self):
        rng = np.random.default_rng(12)
        table = make_random_table(rng, n_morphs=3, attempts=2, backends=("b1", "b2"))
        m = map_matrix(table, {"b1": 0.1, "b2": 0.3})
        text = render_map_matrix_csv(m.values, m.attempts, m.backends)
        lines = text.splitlines()
        assert lines[0] == "attempts,>=1_systems,>=2_systems"
        assert len(lines) == 3
        assert lines[1].startswith("1,")
