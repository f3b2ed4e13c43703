import math

import pytest

from smrkit.core import Layer, Material, Stack, acoustic_impedance, require_valid, validate_stack
from smrkit.exceptions import InputError


def test_mirror_oxide_impedances(library):
    assert acoustic_impedance(library["SiO2"]) == pytest.approx(12.4e6, rel=1e-12)
    assert acoustic_impedance(library["Ta2O5"]) == pytest.approx(33.3e6, rel=1e-12)


def test_unit_material_has_unit_impedance():
    assert acoustic_impedance(Material("unit", 1.0, 1.0)) == 1.0


@pytest.mark.parametrize("c", [0.5, 2.0, 3.7, 1e3])
def test_impedance_scales_with_density(c):
    m = Material("m", 2000.0, 5000.0)
    scaled = Material("m", 2000.0 * c, 5000.0)
    assert acoustic_impedance(scaled) == pytest.approx(c * acoustic_impedance(m), rel=1e-15)


@pytest.mark.parametrize(
    "kwargs",
    [dict(density=-1.0, velocity=1.0), dict(density=1.0, velocity=0.0), dict(density=1.0, velocity=1.0, q_mech=0.0),
     dict(density=math.nan, velocity=1.0)],
)
def test_material_rejects_bad_fields(kwargs):
    with pytest.raises(InputError):
        Material("bad", **kwargs)


def test_complex_velocity_uses_loss():
    m = Material("m", 1.0, 1000.0, q_mech=50.0)
    assert m.complex_velocity == pytest.approx(1000.0 * (1 + 1j / 100))
    assert Material("m", 1.0, 1000.0).complex_velocity == 1000.0


@pytest.mark.parametrize("t", [0.0, -5e-9, math.inf])
def test_layer_rejects_bad_thickness(library, t):
    with pytest.raises(InputError):
        Layer(library["Pt"], t)


def test_device_stack_is_valid(device_stack):
    report = validate_stack(device_stack)
    assert report.ok
    assert len(report) == 0
    assert len(device_stack.layers) == 20
    assert device_stack.mirror_pairs == 8.5


def test_piezo_without_e33_is_an_error(device_stack, library):
    bare = Material("AlNx", 3300.0, 11000.0)
    s = device_stack.with_layer(1, material=bare)
    report = validate_stack(s)
    assert not report.ok
    assert any("e33" in i.message for i in report.errors)
    with pytest.raises(InputError):
        require_valid(s)


def test_equal_neighbours_in_mirror_warn(device_stack, library):
    s = device_stack.with_layer(4, material=library["SiO2"])
    report = validate_stack(s)
    assert report.ok
    assert any("no impedance contrast" in i.message for i in report.warnings)


def test_nonpositive_area_is_an_error(device_stack):
    s = Stack(device_stack.layers, device_stack.piezo_index, -1.0, device_stack.substrate)
    assert not validate_stack(s).ok


@pytest.mark.parametrize("field", ["density", "velocity", "q_mech"])
@pytest.mark.parametrize("value", [0.0, -1.0])
def test_single_field_corruption_is_rejected(device_stack, field, value):
    with pytest.raises(InputError):
        mat = device_stack.layers[0].material
        device_stack.with_layer(0, material=Material(**{**mat.__dict__, field: value}))


@pytest.mark.parametrize("value", [0.0, -1e-9])
def test_thickness_corruption_is_rejected(device_stack, value):
    with pytest.raises(InputError):
        device_stack.with_layer(3, thickness=value)


def test_uniform_q(device_stack):
    s = device_stack.with_uniform_q(200.0)
    assert all(la.material.q_mech == 200.0 for la in s.layers)
    assert s.substrate.q_mech == 200.0
