from fractions import Fraction

import pytest

from kuranishi_atlas.atlas_file import (
    HEADER,
    format_atlas,
    parse_atlas,
    parse_domain,
    parse_matrix,
    read_atlas,
    write_atlas,
)
from kuranishi_atlas.demos import SHIPPED, load_atlas, shipped_path
from kuranishi_atlas.errors import AtlasFileError, DimensionError
from kuranishi_atlas.geometry import Interval

LINE_ATLAS = """kuranishi-atlas v1
# a single chart over one point
atlas line dim 0
space {0}
chart {1} domain (-1,1) obs 1 section <x1> footprint {0} via <x1>
reduction V {1} (-1/2,1/2)
reduction C {1} (-1/4,1/4)
orientation {1} reversed
perturbation seed 7
"""


def test_parse_small_atlas():
    bundle = parse_atlas(LINE_ATLAS)
    assert bundle.atlas.name == "line"
    assert bundle.atlas.dim == 0
    assert [sorted(label) for label in bundle.atlas.labels] == [[1]]
    assert set(bundle.reductions) == {"V", "C"}
    assert bundle.seed == 7
    (element,) = bundle.orientation.values()
    assert element.scale < 0


def test_format_is_stable_on_shipped_atlas():
    text = format_atlas(load_atlas("zero-two-chart"))
    assert text.startswith(HEADER + "\n")
    assert "reduction V {2} empty" in text
    assert format_atlas(parse_atlas(text)) == text


def test_read_and_write(tmp_path, zero_linear):
    path = tmp_path / "zero.atlas"
    write_atlas(str(path), zero_linear)
    bundle = read_atlas(str(path))
    assert bundle.atlas.name == "zero-linear"
    assert bundle.reductions["V"].domains == zero_linear.reductions["V"].domains


def test_bad_header_is_line_one():
    with pytest.raises(AtlasFileError) as info:
        parse_atlas("kuranishi-atlas v2\natlas x dim 0\n")
    assert info.value.line == 1


def test_empty_file():
    with pytest.raises(AtlasFileError):
        parse_atlas("# nothing here\n\n")


def test_expression_error_reports_column():
    text = LINE_ATLAS.replace("section <x1>", "section <x3>")
    with pytest.raises(AtlasFileError) as info:
        parse_atlas(text)
    assert info.value.line == 5
    assert info.value.column == 40


def test_unknown_line():
    with pytest.raises(AtlasFileError) as info:
        parse_atlas(LINE_ATLAS + "frobnicate {1}\n")
    assert info.value.line == 10
    assert "frobnicate" in str(info.value)


def test_change_to_undeclared_chart():
    text = LINE_ATLAS + "change {1} -> {1,2} domain (-1,1) map <x1> linear 1x1 [1]\n"
    with pytest.raises(AtlasFileError) as info:
        parse_atlas(text)
    assert "not declared" in str(info.value)


def test_parse_domain_pieces():
    circle = parse_domain("S1", (True,))
    assert circle.boxes[0].intervals[0] == Interval.circle()
    assert parse_domain("empty", (False, False)).is_empty()
    union = parse_domain("(0,1)x{1/2} u (2,3)x(0,1)", (False, False))
    assert len(union.boxes) == 2
    with pytest.raises(DimensionError):
        parse_domain("(0,1)", (False, False))


def test_parse_matrix_shape():
    assert str(parse_matrix(2, 2, "1 1/2; 0 3")) == "[1 1/2; 0 3]"
    with pytest.raises(DimensionError):
        parse_matrix(2, 2, "1 2 3; 4 5 6")


def _same_bundle(read, built):
    a, b = read.atlas, built.atlas
    assert (a.name, a.dim) == (b.name, b.dim)
    assert a.space.same_set(b.space)
    assert a.labels == b.labels
    for label in b.labels:
        x, y = a.chart(label), b.chart(label)
        assert x.domain.periodic == y.domain.periodic
        assert x.domain.same_set(y.domain)
        assert x.footprint.same_set(y.footprint)
        assert x.obs_dim == y.obs_dim
        assert x.section.texts() == y.section.texts()
        assert x.footprint_map.texts() == y.footprint_map.texts()
    assert set(a.changes) == set(b.changes)
    for key, change in b.changes.items():
        other = a.changes[key]
        assert other.linear == change.linear
        assert len(other.pieces) == len(change.pieces)
        for p, q in zip(other.pieces, change.pieces):
            assert p.domain.same_set(q.domain)
            point = [Fraction(1, 7), Fraction(-2, 5)][:q.embedding.in_dim]
            assert p.embedding.evaluate(point) == q.embedding.evaluate(point)


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_counterexample_files_match_their_builders(name):
    _same_bundle(read_atlas(shipped_path(name)), load_atlas(name))


@pytest.mark.parametrize("name", SHIPPED)
def test_counterexamples_survive_format_and_parse(name):
    built = load_atlas(name)
    text = format_atlas(built)
    _same_bundle(parse_atlas(text), built)
    assert format_atlas(parse_atlas(text)) == text


def test_unknown_shipped_file():
    with pytest.raises(ValueError):
        shipped_path("zero-linear")
