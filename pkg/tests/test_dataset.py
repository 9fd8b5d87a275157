import numpy as np
import pytest

from pdnet.dataset import (export_csv, from_bytes, generate_grid, generate_random, grid_values,
                           import_csv, load, save, to_bytes)
from pdnet.errors import CapacityError, DomainError, FormatError
from pdnet.physics import Geometry, transmission

GEO = Geometry()


def test_grid_values_eight():
    mm = grid_values(8) * 1e3
    np.testing.assert_allclose(mm, [1.8125, 3.625, 5.4375, 7.25, 9.0625, 10.875, 12.6875, 14.5],
                               rtol=0, atol=1e-12)


def test_grid_values_small_counts():
    np.testing.assert_allclose(grid_values(1) * 1e3, [14.5], atol=1e-12)
    np.testing.assert_allclose(grid_values(4) * 1e3, [3.625, 7.25, 10.875, 14.5], atol=1e-12)
    with pytest.raises(DomainError):
        grid_values(0)


def test_single_value_grid():
    d = generate_grid(1)
    assert len(d) == 1
    np.testing.assert_allclose(d.radii, GEO.radius_max)
    np.testing.assert_allclose(d.spectra, 1.0, atol=1e-12)


def test_grid_v4_enumeration(grid4):
    assert len(grid4) == 1024
    rows = {tuple(r) for r in np.round(grid4.radii * 1e4, 6)}
    assert len(rows) == 1024
    # lexicographic order: flattening the base-4 digit indices counts 0..1023
    digits = np.rint(grid4.radii / GEO.radius_max * 4).astype(int) - 1
    codes = digits @ (4 ** np.arange(4, -1, -1))
    assert np.array_equal(codes, np.arange(1024))
    s = np.array([3.625, 7.25, 10.875, 14.5, 14.5])
    assert tuple(np.round(s * 10, 6)) in rows and tuple(np.round(s[::-1] * 10, 6)) in rows


def test_stored_spectra_match_oracle(grid4):
    pick = np.arange(0, 1024, 37)
    np.testing.assert_allclose(grid4.spectra[pick], transmission(grid4.radii[pick]),
                               atol=1e-12, rtol=0)


def test_capacity_guard():
    with pytest.raises(CapacityError):
        generate_grid(8, max_pairs=1000)


def test_random_dataset():
    a = generate_random(1000, 5)
    assert len(a) == 1000
    assert np.all(a.radii > GEO.radius_min) and np.all(a.radii < GEO.radius_max)
    # uniform mean within 4 standard errors
    mean = (GEO.radius_min + GEO.radius_max) / 2
    se = (GEO.radius_max - GEO.radius_min) / np.sqrt(12 * a.radii.size)
    assert abs(a.radii.mean() - mean) < 4 * se
    assert a == generate_random(1000, 5)
    assert a != generate_random(1000, 6)
    with pytest.raises(DomainError):
        generate_random(0, 1)


def test_binary_round_trip(grid4, tmp_path):
    path = tmp_path / "d.pdnd"
    save(grid4, path)
    back = load(path)
    assert back == grid4
    assert to_bytes(back) == path.read_bytes()
    r = generate_random(3, 2**63 + 5)
    assert from_bytes(to_bytes(r)) == r


def test_truncated_and_bad_magic(grid4):
    data = to_bytes(grid4)
    with pytest.raises(FormatError, match="length mismatch") as info:
        from_bytes(data[:-8])
    assert info.value.offset is not None
    with pytest.raises(FormatError, match="PDND"):
        from_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        from_bytes(data[:20])


def test_newer_version_rejected(grid4):
    data = bytearray(to_bytes(grid4))
    data[4] = 99
    with pytest.raises(FormatError, match="newer"):
        from_bytes(bytes(data))


def test_csv_export(tmp_path):
    one = generate_random(1, 3)
    path = tmp_path / "one.csv"
    export_csv(one, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert len(lines[0].split(",")) == 255 and len(lines[1].split(",")) == 255
    assert lines[0].startswith("r1,r2,r3,r4,r5,t20,t40,")
    assert lines[0].endswith(",t5000")


def test_csv_round_trip(grid4, tmp_path):
    path = tmp_path / "g.csv"
    sub = grid4.subset(np.arange(0, 1024, 101))
    export_csv(sub, path)
    radii, spectra, grid = import_csv(path)
    np.testing.assert_allclose(radii, sub.radii, atol=5e-10)
    np.testing.assert_allclose(spectra, sub.spectra, atol=5e-10)
    np.testing.assert_array_equal(grid, sub.grid)
