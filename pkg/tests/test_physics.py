import numpy as np
import pytest

from pdnet.errors import DomainError
from pdnet.physics import (Geometry, Medium, cascade_matrix, frequency_grid, scattering,
                           segment_matrix, spectrum_error, transmission)

GEO = Geometry()
AIR = Medium()


def random_structures(n, seed):
    return np.random.default_rng(seed).uniform(GEO.radius_min, GEO.radius_max, (n, 5))


def test_default_grid():
    grid = frequency_grid()
    assert grid.size == 250
    assert grid[0] == 20 and grid[-1] == 5000
    assert np.all(np.diff(grid) == 20)


@pytest.mark.parametrize("radius,length,freq", [(0.002, 0.02, 20.0), (0.0145, 0.1, 5000.0),
                                                 (0.00725, 0.013, 1234.5)])
def test_segment_determinant(radius, length, freq):
    t = segment_matrix(radius, length, freq, AIR)
    assert abs(np.linalg.det(t) - 1) < 1e-9


def test_segment_zero_length_limit():
    r = 0.005
    t = segment_matrix(r, 1e-12, 3000.0, AIR)
    zc = AIR.density * AIR.sound_speed / (np.pi * r * r)
    # compare in impedance-normalized form so both off-diagonals are O(kL)
    normalized = np.array([[t[0, 0], t[0, 1] / zc], [t[1, 0] * zc, t[1, 1]]])
    np.testing.assert_allclose(normalized, np.eye(2), atol=1e-9)


def test_segment_quarter_wave():
    r, length = 0.00725, 0.020
    t = segment_matrix(r, length, AIR.sound_speed / (4 * length), AIR)
    zc = AIR.density * AIR.sound_speed / (np.pi * r * r)
    assert abs(t[0, 0]) < 1e-9 and abs(t[1, 1]) < 1e-9
    assert abs(t[0, 1] - 1j * zc) < 1e-9 * zc
    assert abs(t[1, 0] - 1j / zc) < 1e-9 / zc


@pytest.mark.parametrize("bad", [(0, 0.02, 100), (0.01, -1, 100), (0.01, 0.02, 0)])
def test_segment_rejects_nonpositive(bad):
    with pytest.raises(DomainError):
        segment_matrix(*bad, AIR)


def test_uniform_structure_is_transparent():
    tau = transmission([GEO.tube_radius] * 5)
    np.testing.assert_allclose(tau, 1.0, atol=1e-12, rtol=0)


def test_single_constriction_quarter_wave():
    # closed form for one area step of ratio m at kL = pi/2
    m = (GEO.tube_radius / 0.00725) ** 2
    expected = 4 / (m + 1 / m) ** 2
    f = AIR.sound_speed / (4 * GEO.layer_length)
    tau = transmission([GEO.tube_radius, GEO.tube_radius, 0.00725, GEO.tube_radius,
                        GEO.tube_radius], [f])
    assert expected == pytest.approx(0.221453, abs=1e-6)
    assert tau[0] == pytest.approx(expected, abs=1e-12)


def test_reversal_reciprocity_brute_force():
    s = random_structures(100, 1)
    forward = transmission(s)
    for i in range(100):
        np.testing.assert_allclose(transmission(s[i, ::-1]), forward[i], atol=1e-9, rtol=0)


def test_energy_conservation():
    t, r = scattering(random_structures(50, 2), frequency_grid())
    np.testing.assert_allclose(np.abs(t) ** 2 + np.abs(r) ** 2, 1.0, atol=1e-9)


def test_cascade_determinant_and_range():
    s = random_structures(1, 3)[0]
    mats = cascade_matrix(s, frequency_grid())
    np.testing.assert_allclose(np.linalg.det(mats), 1.0, atol=1e-9)
    tau = transmission(s)
    assert np.all(tau >= 0) and np.all(tau <= 1 + 1e-9)


def test_batch_matches_single_bitwise():
    s = random_structures(7, 4)
    batch = transmission(s)
    for i in range(7):
        assert np.array_equal(batch[i], transmission(s[i]))


def test_monotone_limit_to_tube():
    errs = []
    for eps in (1e-2, 1e-3, 1e-4):
        r = GEO.tube_radius * (1 - eps)
        errs.append(np.max(1 - transmission([r] * 5)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-6


def test_invalid_structure():
    with pytest.raises(DomainError):
        transmission([0.001] * 5)
    with pytest.raises(DomainError):
        transmission([0.005] * 4)


def test_cutoff_warning():
    geo = Geometry()
    assert geo.cutoff_frequency(AIR) == pytest.approx(6931.8, abs=1)
    with pytest.warns(UserWarning, match="cutoff"):
        transmission([0.01] * 5, [100.0, 8000.0])


def test_spectrum_error_examples():
    a = np.linspace(0, 1, 250)
    assert spectrum_error(a, a) == 0
    assert spectrum_error(np.zeros(250), np.ones(250)) == 1.0
    shifted = a.copy()
    shifted[::2] += 0.1
    assert spectrum_error(shifted, a) == pytest.approx(0.05, abs=1e-12)
    with pytest.raises(DomainError):
        spectrum_error(a, a[:-1])
