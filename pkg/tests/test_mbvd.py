import math

import numpy as np
import pytest
from scipy.signal import argrelextrema

from smrkit.exceptions import InputError, InsufficientPeaksError
from smrkit.mbvd import (
    WEIGHTS,
    Branch,
    MBVDModel,
    branch_to_rlc,
    fit_mbvd,
    init_mbvd,
    mbvd_admittance,
    objective,
    objective_gradient,
    pack,
    parameter_names,
    parse_fit_report,
    rlc_to_branch,
    unpack,
)
from smrkit.spectrum import Spectrum

from conftest import DEVICE_MODEL


def noisy(sp, rng, level=0.01):
    n = rng.normal(size=len(sp)) + 1j * rng.normal(size=len(sp))
    return sp.with_values(sp.values * (1 + level * n))


def test_branchless_model_is_capacitor():
    f = np.linspace(1e9, 67e9, 100)
    y = mbvd_admittance(MBVDModel(0.0, 0.0, 45e-15), f).values
    w = 2 * np.pi * f
    assert np.array_equal(y, 1j * w * 45e-15)


def test_branch_resonates_at_fs():
    c0 = 45e-15
    b = Branch(40.38e9, 0.0334, 15.0)
    r, l, c = branch_to_rlc(c0, b)
    assert 1 / (2 * math.pi * math.sqrt(l * c)) == pytest.approx(b.fs, rel=1e-10)


def test_branch_map_round_trip(rng):
    for _ in range(100):
        c0 = rng.uniform(1e-15, 1e-12)
        b = Branch(rng.uniform(1e8, 1e11), rng.uniform(1e-4, 0.5), rng.uniform(1, 5000))
        back = rlc_to_branch(c0, *branch_to_rlc(c0, b))
        assert back.fs == pytest.approx(b.fs, rel=1e-12)
        assert back.k2 == pytest.approx(b.k2, rel=1e-12)
        assert back.q == pytest.approx(b.q, rel=1e-12)


def test_branch_map_preserves_admittance(wide_grid):
    m = DEVICE_MODEL
    rebuilt = MBVDModel(m.rs, m.ls, m.c0, tuple(rlc_to_branch(m.c0, *rlc) for rlc in m.motional()))
    a = mbvd_admittance(m, wide_grid).values
    b = mbvd_admittance(rebuilt, wide_grid).values
    assert np.max(np.abs(a - b) / np.abs(a)) < 1e-12


def test_small_coupling_matches_first_order_bridge():
    cm = branch_to_rlc(45e-15, Branch(62.59e9, 0.008, 125))[2]
    assert cm == pytest.approx(0.29e-15, rel=0.05)
    assert (math.pi**2 / 8) * cm / 45e-15 == pytest.approx(0.008, rel=0.01)


def test_device_model_extremes_near_top_mode():
    f = np.linspace(55e9, 70e9, 1501)
    mag = np.abs(mbvd_admittance(DEVICE_MODEL, f).values)
    (peaks,) = argrelextrema(mag, np.greater)
    (dips,) = argrelextrema(mag, np.less)
    assert len(peaks) == len(dips) == 1
    # routing Rs and Ls pull both local extremes about 1.5 % below 62.6 / 63.8 GHz
    assert f[peaks[0]] == pytest.approx(62.6e9, rel=0.02)
    assert f[dips[0]] == pytest.approx(63.8e9, rel=0.02)
    assert f[peaks[0]] < f[dips[0]]


def test_model_validation():
    with pytest.raises(InputError):
        Branch(1e9, 1.2, 10)
    with pytest.raises(InputError):
        Branch(1e9, 0.1, 0)
    with pytest.raises(InputError):
        MBVDModel(-1.0, 0.0, 1e-15)
    with pytest.raises(InputError):
        MBVDModel(0.0, 0.0, 0.0)
    m = MBVDModel(1.0, 0.0, 1e-15, ((2e9, 0.01, 10), (1e9, 0.02, 20)))
    assert [b.fs for b in m.branches] == [1e9, 2e9]


def test_pack_unpack():
    back = unpack(pack(DEVICE_MODEL), 3)
    assert back.c0 == pytest.approx(DEVICE_MODEL.c0, rel=1e-15)
    for b, t in zip(back.branches, DEVICE_MODEL.branches):
        assert (b.fs, b.k2, b.q) == pytest.approx((t.fs, t.k2, t.q), rel=1e-15)
        assert type(b.fs) is float
    assert parameter_names(1) == ["rs", "ls", "c0", "fs1", "k2_1", "q1"]


def test_init_single_branch():
    f = np.linspace(1e9, 20e9, 2000)
    truth = MBVDModel(3.0, 0.0, 80e-15, (Branch(9e9, 0.05, 60),))
    seed = init_mbvd(mbvd_admittance(truth, f), 1)
    assert seed.branches[0].fs == pytest.approx(9e9, rel=0.01)


def test_init_capacitor():
    f = np.linspace(1e9, 67e9, 500)
    seed = init_mbvd(Spectrum(f, 1j * 2 * np.pi * f * 45e-15), 0)
    assert seed.branches == ()
    assert seed.c0 == pytest.approx(45e-15, rel=0.01)


def test_init_device_seeds(wide_grid):
    seed = init_mbvd(mbvd_admittance(DEVICE_MODEL, wide_grid), 3)
    for b, t in zip(seed.branches, DEVICE_MODEL.branches):
        assert b.fs == pytest.approx(t.fs, rel=0.05)


def test_init_needs_enough_peaks():
    f = np.linspace(1e9, 67e9, 500)
    with pytest.raises(InsufficientPeaksError):
        init_mbvd(Spectrum(f, 1j * 2 * np.pi * f * 45e-15), 1)


@pytest.mark.parametrize("weights", WEIGHTS)
def test_round_trip_device_model(wide_grid, weights):
    rep = fit_mbvd(mbvd_admittance(DEVICE_MODEL, wide_grid), 3, weights)
    assert rep.converged
    for b, t in zip(rep.model.branches, DEVICE_MODEL.branches):
        assert b.fs == pytest.approx(t.fs, rel=1e-3)
        assert b.k2 == pytest.approx(t.k2, rel=0.05)
        assert b.q == pytest.approx(t.q, rel=0.10)
    assert rep.model.rs == pytest.approx(52.0, rel=0.01)
    assert rep.model.c0 == pytest.approx(45e-15, rel=0.01)


@pytest.mark.parametrize("seed", range(4))
def test_round_trip_with_noise(wide_grid, seed):
    sp = noisy(mbvd_admittance(DEVICE_MODEL, wide_grid), np.random.default_rng(seed))
    rep = fit_mbvd(sp, 3)
    for b, t in zip(rep.model.branches, DEVICE_MODEL.branches):
        assert b.fs == pytest.approx(t.fs, rel=5e-3)


def test_round_trip_separated_branches(rng):
    f = np.linspace(0.5e9, 40e9, 1500)
    for _ in range(3):
        fs1 = rng.uniform(3e9, 8e9)
        truth = MBVDModel(
            rng.uniform(1, 30), rng.uniform(0, 0.05e-9), rng.uniform(20e-15, 200e-15),
            (Branch(fs1, rng.uniform(0.02, 0.08), rng.uniform(20, 200)),
             Branch(fs1 * rng.uniform(1.6, 3.5), rng.uniform(0.01, 0.05), rng.uniform(20, 200))),
        )
        rep = fit_mbvd(mbvd_admittance(truth, f), 2)
        for b, t in zip(rep.model.branches, truth.branches):
            assert b.fs == pytest.approx(t.fs, rel=1e-3)
            assert b.k2 == pytest.approx(t.k2, rel=0.05)
            assert b.q == pytest.approx(t.q, rel=0.10)


def test_capacitor_fit():
    rng = np.random.default_rng(7)
    f = np.linspace(1e9, 67e9, 400)
    sp = noisy(Spectrum(f, 1j * 2 * np.pi * f * 45e-15), rng, 1e-4)
    rep = fit_mbvd(sp, 0)
    assert rep.model.c0 == pytest.approx(45e-15, rel=1e-3)
    assert rep.residual_rms < 3e-4


@pytest.mark.parametrize("weights", WEIGHTS)
def test_gradient_matches_finite_differences(wide_grid, rng, weights):
    sp = noisy(mbvd_admittance(DEVICE_MODEL, wide_grid), rng)
    x0 = pack(DEVICE_MODEL)
    for _ in range(5):
        x = x0 * rng.uniform(0.9, 1.1, x0.size)
        x[1] = abs(x[1]) + 0.01  # ls interior
        g = objective_gradient(x, sp, 3, weights)
        fd = np.empty_like(g)
        for i in range(x.size):
            h = 1e-6 * max(abs(x[i]), 1e-3)
            e = np.zeros_like(x)
            e[i] = h
            fd[i] = (objective(x + e, sp, 3, weights) - objective(x - e, sp, 3, weights)) / (2 * h)
        assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(fd)


def test_fit_is_deterministic(wide_grid, rng):
    sp = noisy(mbvd_admittance(DEVICE_MODEL, wide_grid), rng)
    assert fit_mbvd(sp, 3).to_text() == fit_mbvd(sp, 3).to_text()


def test_report_text_round_trip(wide_grid):
    rep = fit_mbvd(mbvd_admittance(DEVICE_MODEL, wide_grid), 3)
    d = parse_fit_report(rep.to_text())
    assert d["converged"] == "true"
    assert d["branches"] == "3"
    for name, value in rep.parameters.items():
        assert float(d[name]) == value
    assert rep.overlay_csv(mbvd_admittance(DEVICE_MODEL, wide_grid)).count("\n") == wide_grid.size + 1


def test_fit_input_errors(wide_grid):
    sp = mbvd_admittance(DEVICE_MODEL, wide_grid)
    with pytest.raises(InputError):
        fit_mbvd(sp, 3, "cubic")
    with pytest.raises(InputError):
        fit_mbvd(sp, 2, initial=DEVICE_MODEL)
    with pytest.raises(InputError):
        fit_mbvd(sp.with_values(np.zeros(len(sp), dtype=complex)), 1)
