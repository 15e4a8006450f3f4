"""SVG rendering: determinism, palette mapping, well-formedness."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from critsurf import HeatmapSpec, InputError, emit_heatmap, emit_rank_scatter

NS = "{http://www.w3.org/2000/svg}"


def _cell_fills(path, k):
    root = ET.parse(path).getroot()
    rects = [r for r in root.iter(f"{NS}rect") if r.get("stroke") == "#cccccc"]
    assert len(rects) == k * k
    return [r.get("fill") for r in rects]


def test_render_is_deterministic(tmp_path):
    values = np.array([[0.5, -1.0], [0.0, 2.0]])
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_heatmap(HeatmapSpec(values=values, out_path=str(p1), title="x", annotate=True))
    emit_heatmap(HeatmapSpec(values=values, out_path=str(p2), title="x", annotate=True))
    assert p1.read_bytes() == p2.read_bytes()


def test_zero_matrix_is_uniformly_neutral(tmp_path):
    path = tmp_path / "zero.svg"
    emit_heatmap(HeatmapSpec(values=np.zeros((4, 4)), out_path=str(path)))
    assert set(_cell_fills(path, 4)) == {"#ffffff"}


def test_single_positive_cell_is_the_only_warm_cell(tmp_path):
    values = np.zeros((5, 5))
    values[2, 3] = 1.0
    path = tmp_path / "one.svg"
    emit_heatmap(HeatmapSpec(values=values, out_path=str(path)))
    fills = _cell_fills(path, 5)
    warm = [f for f in fills if f == "#b2182b"]
    assert len(warm) == 1
    assert fills.count("#ffffff") == 24


def test_diverging_scale_is_symmetric(tmp_path):
    values = np.array([[-2.0, 0.0], [0.0, 1.0]])
    path = tmp_path / "sym.svg"
    emit_heatmap(HeatmapSpec(values=values, out_path=str(path)))
    fills = _cell_fills(path, 2)
    assert fills[0] == "#2166ac"  # the extreme negative saturates the cool end
    text = path.read_text()
    assert ">2<" in text and ">-2<" in text and ">0<" in text  # legend labels


def test_annotations_toggle(tmp_path):
    values = np.array([[0.25, -0.5], [0.75, 0.0]])
    bare = tmp_path / "bare.svg"
    noted = tmp_path / "noted.svg"
    emit_heatmap(HeatmapSpec(values=values, out_path=str(bare)))
    emit_heatmap(HeatmapSpec(values=values, out_path=str(noted), annotate=True))
    assert "0.25" not in bare.read_text()
    assert "0.25" in noted.read_text()


def test_svg_is_well_formed_xml(tmp_path):
    rng = np.random.default_rng(3)
    path = tmp_path / "well.svg"
    emit_heatmap(HeatmapSpec(values=rng.normal(size=(7, 7)), out_path=str(path), annotate=True))
    ET.parse(path)
    scatter = tmp_path / "scatter.svg"
    ranks = np.arange(1, 21)
    emit_rank_scatter(ranks, ranks[::-1], str(scatter), title="ranks")
    ET.parse(scatter)
    assert scatter.read_text().count("<circle") == 20


def test_scatter_is_deterministic(tmp_path):
    rng = np.random.default_rng(5)
    r = rng.permutation(30) + 1
    s = rng.permutation(30) + 1
    p1, p2 = tmp_path / "s1.svg", tmp_path / "s2.svg"
    emit_rank_scatter(r, s, str(p1))
    emit_rank_scatter(r, s, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_heatmap_input_validation(tmp_path):
    with pytest.raises(InputError):
        HeatmapSpec(values=np.ones((2, 3)), out_path=str(tmp_path / "x.svg"))
    with pytest.raises(InputError):
        HeatmapSpec(values=np.array([[np.nan]]), out_path=str(tmp_path / "x.svg"))


def test_unwritable_path_raises(tmp_path):
    with pytest.raises(OSError):
        emit_heatmap(HeatmapSpec(values=np.zeros((2, 2)), out_path=str(tmp_path)))
