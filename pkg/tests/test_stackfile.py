import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smrkit.bragg import design_mirror
from smrkit.core import Layer, Material, Stack
from smrkit.exceptions import StackFileError
from smrkit.stackfile import parse_materials_file, parse_stack_file, serialize_stack, tokenize

from conftest import stack_text

MATS = """
[materials]
A density=1000 velocity=3000 q=40
B density=5000 velocity=4000
P density=3500 velocity=9000 q=50 e33=1.5 eps33=9e-11
"""

GEOM = "\n[geometry]\narea = 100um2\n"


def doc(stack_body):
    return MATS + "\n[stack]\n" + stack_body + "\nsubstrate = B\n" + GEOM


def test_device_file_layer_count(device_stack):
    s = device_stack
    assert len(s.layers) == 20
    assert [la.material.name for la in s.layers[:4]] == ["Pt", "ScAlN", "Pt", "SiO2"]
    assert s.piezo_index == 1
    assert s.piezo.thickness == pytest.approx(67.6e-9)
    assert s.area == pytest.approx(8.5e-6 * 8.5e-6)
    assert s.substrate.name == "Si"
    assert s.top_load is None


def test_designed_mirror_matches_file(device_stack, library):
    spec = design_mirror(library["SiO2"], library["Ta2O5"], 50e9, 8.5)
    designed = spec.layers()
    parsed = device_stack.mirror
    assert [la.material for la in designed] == [la.material for la in parsed]
    for a, b in zip(designed, parsed):
        # file rounds to 0.1 nm
        assert a.thickness == pytest.approx(b.thickness, abs=0.05e-9)


def test_negative_thickness_reports_position():
    with pytest.raises(StackFileError) as e:
        parse_stack_file(doc("layer A 10nm\nlayer P -5nm piezo"))
    assert (e.value.line, e.value.column) == (9, 9)
    assert "thickness" in str(e.value)


def test_duplicate_piezo():
    with pytest.raises(StackFileError, match="piezo"):
        parse_stack_file(doc("layer P 10nm piezo\nlayer P 10nm piezo"))


def test_missing_piezo():
    with pytest.raises(StackFileError, match="piezo"):
        parse_stack_file(doc("layer A 10nm"))


def test_unknown_material_column():
    with pytest.raises(StackFileError) as e:
        parse_stack_file(doc("layer P 10nm piezo\nlayer Zz 10nm"))
    assert e.value.column == 7
    assert "Zz" in str(e.value)


def test_unclosed_repeat():
    with pytest.raises(StackFileError, match="repeat"):
        parse_stack_file(doc("layer P 10nm piezo\nrepeat 2\nlayer A 1nm"))


def test_library_fallback(library):
    text = "[stack]\nlayer ScAlN 50nm piezo\nsubstrate = Si\n[geometry]\narea = 1e-10\n"
    s = parse_stack_file(text, library)
    assert s.piezo.material == library["ScAlN"]


def test_comments_and_loaded_top():
    s = parse_stack_file(doc("top = loaded A   # water-ish\nlayer P 10nm piezo  # film"))
    assert s.top_load.name == "A"


def test_materials_file_errors():
    with pytest.raises(StackFileError):
        parse_materials_file("[materials]\nX density=abc velocity=1\n")
    with pytest.raises(StackFileError):
        parse_materials_file("[materials]\nX density=1\n")


def test_tokenizer_positions():
    d = tokenize("[stack]\n  layer A 1nm\n")
    stmt = d.sections["stack"][0]
    assert [(t.text, t.line, t.column) for t in stmt.tokens] == [("layer", 2, 3), ("A", 2, 9), ("1nm", 2, 11)]


def test_device_round_trip(device_stack):
    assert parse_stack_file(serialize_stack(device_stack)) == device_stack


positive = st.floats(min_value=1e-3, max_value=1e4, allow_nan=False, allow_infinity=False)
thick = st.floats(min_value=1e-10, max_value=1e-5, allow_nan=False, allow_infinity=False)


@st.composite
def stacks(draw):
    passive = [
        Material(f"M{i}", draw(positive), draw(positive), draw(st.one_of(st.just(float("inf")), positive)))
        for i in range(draw(st.integers(1, 3)))
    ]
    piezo = Material("Pz", draw(positive), draw(positive), draw(positive), draw(positive), draw(positive))
    above = draw(st.lists(st.tuples(st.sampled_from(passive), thick), max_size=3))
    below = draw(st.lists(st.tuples(st.sampled_from(passive), thick), max_size=12))
    layers = [Layer(m, t) for m, t in above] + [Layer(piezo, draw(thick))] + [Layer(m, t) for m, t in below]
    top = draw(st.one_of(st.none(), st.sampled_from(passive)))
    return Stack(tuple(layers), len(above), draw(positive) * 1e-12, draw(st.sampled_from(passive)), top)


@settings(max_examples=150, deadline=None)
@given(stacks())
def test_serialize_parse_identity(s):
    assert parse_stack_file(serialize_stack(s)) == s


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 9))
def test_repeated_pairs_fold(n):
    a = Material("A", 1.0, 2.0)
    b = Material("B", 3.0, 4.0)
    p = Material("P", 1.0, 1.0, 10.0, 1.0, 1e-10)
    layers = (Layer(p, 1e-8),) + (Layer(a, 1e-9), Layer(b, 2e-9)) * n
    s = Stack(layers, 0, 1e-10, b)
    text = serialize_stack(s)
    assert f"repeat {n}" in text
    assert parse_stack_file(text) == s


def test_shipped_file_parses_without_library_for_materials_section():
    # the device file relies on the library; without it the error names the material
    with pytest.raises(StackFileError, match="Pt"):
        parse_stack_file(stack_text())
