import numpy as np
import pytest

from smrkit.exceptions import ConversionSingularityError, InputError, NumericError, ParseError, SmrkitError
from smrkit.spectrum import Spectrum


def test_arrays_are_read_only_copies():
    f = np.array([1.0, 2.0])
    sp = Spectrum(f, [1j, 2j])
    f[0] = 5.0
    assert sp.frequencies[0] == 1.0
    with pytest.raises(ValueError):
        sp.values[0] = 0


@pytest.mark.parametrize("f,v", [([1.0, 2.0], [1.0]), ([2.0, 1.0], [1, 1]), ([0.0, 1.0], [1, 1]), ([1.0, 1.0], [1, 1])])
def test_validation(f, v):
    with pytest.raises(ValueError):
        Spectrum(f, v)


def test_derived_views():
    sp = Spectrum([1.0, 2.0], [1j, -2.0])
    assert np.allclose(sp.omega, [2 * np.pi, 4 * np.pi])
    assert np.allclose(sp.magnitude_db, [0.0, 20 * np.log10(2)])
    assert np.allclose(sp.phase_deg, [90.0, 180.0])
    assert len(sp.window(1.5, 3.0)) == 1
    assert not sp.flagged.any()


def test_error_hierarchy():
    assert issubclass(InputError, ValueError) and issubclass(InputError, SmrkitError)
    assert issubclass(NumericError, ArithmeticError)
    e = ParseError("bad token", 3, 7)
    assert str(e) == "line 3, column 7: bad token"
    assert ConversionSingularityError("x", 5e9).frequency == 5e9
