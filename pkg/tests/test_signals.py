import math

import numpy as np
import pytest

from attenuspec.attenuation import (
    custom,
    linear,
    modified_szabo,
    nachman_smith_waag,
    power_law,
    propagation_speed,
    thermo_viscous,
)
from attenuspec.geometry import BallGeometry
from attenuspec.signals import (
    Source,
    SynthesisGrid,
    TimeTrace,
    ball_source,
    causality_check,
    front_speed_check,
    front_time,
    fwhm,
    parse_source,
    point_source,
    synthesize,
    window_allowance,
)

GRID = SynthesisGrid()
DET = np.array([0.0, 0.0, 1.0])


def test_grid_layout():
    assert GRID.dt == pytest.approx(math.pi / 128)
    assert len(GRID.t) == 4096
    assert GRID.t[2048] == 0.0
    assert np.allclose(np.diff(GRID.t), GRID.dt)
    w = GRID.window()
    assert w[2048] == 0.0 and w[0] == 0.0
    assert np.all(w[np.abs(GRID.omega) <= 0.9 * 128][1:] >= 0)
    assert np.allclose(w[1:], w[1:][::-1])


def test_grid_validation():
    with pytest.raises(ValueError):
        SynthesisGrid(128.0, 1000)
    with pytest.raises(ValueError):
        SynthesisGrid(128.0, 4096, 1.0)


def test_zero_source():
    src = point_source(strength=0.0)
    tr = synthesize(linear(1), src, DET)
    assert np.all(tr.values == 0)
    assert causality_check(tr) == 0.0


def test_matches_direct_sum():
    grid = SynthesisGrid(16.0, 64)
    m = power_law()
    tr = synthesize(m, point_source(), DET, grid)
    w, win = grid.omega, grid.window()
    k = np.asarray(m.kappa(w))
    spec = -1j * w / (4 * math.pi * math.sqrt(2 * math.pi)) * np.exp(1j * k) * win
    for i in (0, 17, 32, 50):
        direct = np.sum(spec * np.exp(-1j * w * grid.t[i])) * grid.d_omega / math.sqrt(2 * math.pi)
        assert tr.values[i] == pytest.approx(direct.real, abs=1e-14)


def test_lossless_arrival():
    tr = synthesize(linear(1), point_source(), DET)
    peak_t = tr.t[np.argmax(np.abs(tr.values))]
    assert abs(peak_t - 1.0) <= 2 * tr.dt


def test_dissipation_lowers_and_broadens():
    src = ball_source(0.1)
    a = synthesize(linear(1), src, DET)
    b = synthesize(thermo_viscous(1), src, DET)
    assert np.max(np.abs(b.values)) < np.max(np.abs(a.values))
    assert fwhm(b) > fwhm(a)


@pytest.mark.parametrize("model", [linear(1), power_law(1, 0.5), modified_szabo(1, 0.5), nachman_smith_waag(1, 2, 1),
                                   thermo_viscous(1)], ids=lambda m: m.name)
def test_real_and_causal(model):
    tr = synthesize(model, point_source(), DET)
    assert tr.imag_residue <= 1e-8
    assert causality_check(tr) <= 1e-3


@pytest.mark.parametrize("model", [linear(1), power_law(1, 0.5), modified_szabo(1, 0.5), nachman_smith_waag(1, 2, 1)],
                         ids=lambda m: m.name)
def test_front_speed(model):
    tr = synthesize(model, point_source(), DET)
    rep = front_speed_check(tr, 1.0, propagation_speed(model), GRID)
    assert not rep.skipped
    assert rep.ok, rep


def test_front_skipped_for_infinite_speed():
    tr = synthesize(thermo_viscous(1), point_source(), DET)
    rep = front_speed_check(tr, 1.0, propagation_speed(thermo_viscous(1)))
    assert rep.skipped and rep.ok
    assert "infinite" in rep.notice


def test_front_violation_detected():
    tr = synthesize(linear(1), point_source(), DET)
    # claiming twice the true speed moves the earliest allowed arrival to 0.5 - allowance
    assert front_speed_check(tr, 1.0, 0.5).ok is False


def test_window_allowance_is_positive():
    a = window_allowance(GRID)
    assert 0 < a < 1
    assert window_allowance(SynthesisGrid(256.0, 8192)) < a


def test_linearity():
    src = ball_source(0.1)
    rng = np.random.default_rng(0)
    h1 = Source(src.points, src.weights, rng.normal(size=len(src.values)))
    h2 = Source(src.points, src.weights, rng.normal(size=len(src.values)))
    m = power_law()
    a = synthesize(m, h1 + h2, DET).values
    b = synthesize(m, h1, DET).values + synthesize(m, h2, DET).values
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))


def test_energy_decreases_with_damping():
    energies = []
    for kinf in (0.0, 0.2, 0.5, 1.0):
        m = custom(lambda w, k=kinf: w + 1j * k, lambda z, k=kinf: z + 1j * k, name=f"damped{kinf}")
        energies.append(synthesize(m, point_source(), DET).energy())
    assert all(a > b for a, b in zip(energies, energies[1:]))


def test_detector_on_sphere_check():
    with pytest.raises(ValueError):
        synthesize(linear(1), point_source(), [0, 0, 0.9], geom=BallGeometry())
    with pytest.raises(ValueError):
        synthesize(linear(1), point_source(), [0, 0, 0])


def test_sources():
    ball = ball_source(0.1)
    assert np.all(np.linalg.norm(ball.points, axis=1) < 0.1)
    assert ball.weights.sum() == pytest.approx(4 / 3 * math.pi * 1e-3, rel=0.1)
    assert np.array_equal(parse_source("point:0,0.1,0").points, [[0, 0.1, 0]])
    assert len(parse_source("ball:0.1").points) == len(ball.points)
    with pytest.raises(ValueError):
        parse_source("cube:1")
    with pytest.raises(ValueError):
        point_source() + ball


def test_front_time_and_fwhm():
    t = np.arange(-8, 8) * 0.5
    v = np.zeros(16)
    v[10] = 1.0
    v[9] = v[11] = 0.6
    tr = TimeTrace(t, v, DET, 0.0)
    assert front_time(tr) == t[9]
    assert fwhm(tr) == pytest.approx(1.5)
