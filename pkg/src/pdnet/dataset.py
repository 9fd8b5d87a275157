"""Labelled (structure, spectrum) datasets: generation, binary and CSV I/O.

Binary ``.pdnd`` layout (little-endian)::

    magic     4s   b"PDND"
    version   u32
    layers    u32
    grid_len  u32
    pairs     u64
    geometry  5 x f64  tube_radius, layer_length, radius_min, radius_max, (layer_count as f64)
    medium    2 x f64  sound_speed, density
    provenance u8      0 = grid_uniform, 1 = random_continuous
    seed      u64
    grid      grid_len x f64
    body      pairs x (layers + grid_len) x f64, radii then transmittances per pair
"""

import csv
import hashlib
import io
import itertools
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CapacityError, DomainError, FormatError
from .physics import Geometry, Medium, check_grid, frequency_grid, transmission

MAGIC = b"PDND"
VERSION = 1
MAX_PAIRS = 10_000_000
_HEADER = struct.Struct("<4sIIIQ5d2dBQ")
_PROVENANCE = ("grid_uniform", "random_continuous")


@dataclass
class Dataset:
    geometry: Geometry
    medium: Medium
    grid: np.ndarray
    radii: np.ndarray  # (n, L) metres
    spectra: np.ndarray  # (n, F)
    provenance: str = "grid_uniform"
    seed: int = 0

    def __len__(self):
        return self.radii.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.geometry == other.geometry
            and self.medium == other.medium
            and self.provenance == other.provenance
            and self.seed == other.seed
            and np.array_equal(self.grid, other.grid)
            and np.array_equal(self.radii, other.radii)
            and np.array_equal(self.spectra, other.spectra)
        )

    def subset(self, index) -> "Dataset":
        return Dataset(self.geometry, self.medium, self.grid, self.radii[index],
                       self.spectra[index], self.provenance, self.seed)

    def fingerprint(self) -> str:
        return hashlib.sha256(to_bytes(self)).hexdigest()[:16]


def grid_values(count, geometry: Geometry = Geometry()) -> np.ndarray:
    """Top-anchored sequence k * radius_max / count for k = 1..count (metres)."""
    if int(count) != count or count < 1:
        raise DomainError("count must be a positive integer")
    return np.arange(1, count + 1) * geometry.radius_max / count


def generate_grid(values_per_layer, geometry: Geometry = Geometry(), medium: Medium = Medium(),
                  grid=None, max_pairs=MAX_PAIRS) -> Dataset:
    """Cartesian product of per-layer radii in lexicographic order."""
    grid = frequency_grid() if grid is None else check_grid(grid)
    values = grid_values(values_per_layer, geometry)
    total = len(values) ** geometry.layer_count
    if max_pairs is not None and total > max_pairs:
        raise CapacityError(
            f"{len(values)}^{geometry.layer_count} = {total} pairs exceeds the "
            f"{max_pairs} pair guard"
        )
    radii = np.array(list(itertools.product(values, repeat=geometry.layer_count)))
    radii = radii.reshape(total, geometry.layer_count)
    return Dataset(geometry, medium, grid, radii,
                   transmission(radii, grid, geometry, medium), "grid_uniform", 0)


def generate_random(n, seed, geometry: Geometry = Geometry(), medium: Medium = Medium(),
                    grid=None) -> Dataset:
    """n structures with radii iid uniform on [radius_min, radius_max]."""
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    grid = frequency_grid() if grid is None else check_grid(grid)
    rng = np.random.default_rng(seed)
    radii = rng.uniform(geometry.radius_min, geometry.radius_max,
                        size=(int(n), geometry.layer_count))
    return Dataset(geometry, medium, grid, radii,
                   transmission(radii, grid, geometry, medium), "random_continuous",
                   int(seed))


def to_bytes(dataset: Dataset) -> bytes:
    g, m = dataset.geometry, dataset.medium
    header = _HEADER.pack(
        MAGIC, VERSION, g.layer_count, dataset.grid.size, len(dataset),
        g.tube_radius, g.layer_length, g.radius_min, g.radius_max, float(g.layer_count),
        m.sound_speed, m.density,
        _PROVENANCE.index(dataset.provenance), dataset.seed & 0xFFFFFFFFFFFFFFFF,
    )
    body = np.hstack([dataset.radii, dataset.spectra]).astype("<f8")
    return header + dataset.grid.astype("<f8").tobytes() + body.tobytes()


def from_bytes(data: bytes) -> Dataset:
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", offset=0)
    if len(data) < _HEADER.size:
        raise FormatError("truncated header", offset=len(data))
    (_, version, layers, grid_len, pairs, tube, length, rmin, rmax, _,
     speed, density, prov, seed) = _HEADER.unpack_from(data)
    if version > VERSION:
        raise FormatError(
            f"dataset format version {version} is newer than supported {VERSION}; "
            "upgrade pdnet to read it", offset=4)
    if prov >= len(_PROVENANCE):
        raise FormatError(f"unknown provenance tag {prov}", offset=_HEADER.size - 9)
    offset = _HEADER.size
    expected = offset + 8 * (grid_len + pairs * (layers + grid_len))
    if len(data) != expected:
        raise FormatError(
            f"length mismatch: expected {expected} bytes, found {len(data)}",
            offset=min(len(data), expected))
    try:
        geometry = Geometry(tube, length, layers, rmin, rmax)
        medium = Medium(speed, density)
    except DomainError as exc:
        raise FormatError(f"invalid header values: {exc}", offset=16) from exc
    grid = np.frombuffer(data, "<f8", grid_len, offset).astype(np.float64)
    offset += 8 * grid_len
    body = np.frombuffer(data, "<f8", pairs * (layers + grid_len), offset)
    body = body.astype(np.float64).reshape(pairs, layers + grid_len)
    return Dataset(geometry, medium, grid, body[:, :layers].copy(), body[:, layers:].copy(),
                   _PROVENANCE[prov], seed)


def save(dataset: Dataset, path):
    Path(path).write_bytes(to_bytes(dataset))


def load(path) -> Dataset:
    return from_bytes(Path(path).read_bytes())


def _freq_label(f):
    return f"t{f:g}"


def export_csv(dataset: Dataset, path):
    """Radii in mm (6 dp) then transmittances (9 dp), one row per pair."""
    layers = dataset.geometry.layer_count
    header = [f"r{i + 1}" for i in range(layers)] + [_freq_label(f) for f in dataset.grid]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for radii, spectrum in zip(dataset.radii, dataset.spectra):
        writer.writerow([f"{r * 1e3:.6f}" for r in radii] + [f"{t:.9f}" for t in spectrum])
    Path(path).write_text(buf.getvalue())


def import_csv(path):
    """Read an exported CSV back as (radii in metres, spectra, grid)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError("empty CSV")
    header = rows[0]
    layers = sum(1 for h in header if h.startswith("r"))
    grid = np.array([float(h[1:]) for h in header[layers:]])
    values = np.array([[float(x) for x in row] for row in rows[1:]]).reshape(-1, len(header))
    return values[:, :layers] * 1e-3, values[:, layers:], grid
