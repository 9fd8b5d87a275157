"""Target spectra from CSV files or named templates.

Templates:

``bandgap:LO-HI``
    transmittance 0 for LO <= f <= HI, 1 elsewhere.
``peak:F0[:WIDTH]``
    Gaussian unity peak at F0 on a zero floor; WIDTH is the full width at
    half maximum in Hz (default from ``target.peak_width_hz``).
``structure:R1,R2,...``
    oracle spectrum of the given radii in millimetres.

Anything else is read as a CSV of ``frequency_hz,transmittance`` rows and
linearly resampled onto the model grid.
"""

import csv
from pathlib import Path

import numpy as np

from .errors import IncompatibleError, UsageError
from .physics import Geometry, Medium, transmission


def bandgap(grid, low, high):
    grid = np.asarray(grid)
    return np.where((grid >= low) & (grid <= high), 0.0, 1.0)


def peak(grid, center, width=100.0):
    grid = np.asarray(grid)
    return np.exp(-4.0 * np.log(2.0) * ((grid - center) / width) ** 2)


def _numbers(text, what):
    try:
        return [float(x) for x in text.replace("-", " ").replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"bad {what} template arguments {text!r}") from exc


def read_target_csv(path, grid):
    grid = np.asarray(grid)
    freqs, values = [], []
    try:
        with open(path, newline="") as fh:
            for number, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                if number == 1 and not _is_number(row[0]):
                    continue
                if len(row) != 2:
                    raise UsageError(f"{path}: line {number}: expected 2 fields, got {len(row)}")
                try:
                    freqs.append(float(row[0]))
                    values.append(float(row[1]))
                except ValueError as exc:
                    raise UsageError(f"{path}: line {number}: {exc}") from exc
    except OSError as exc:
        raise UsageError(f"cannot read target {path}: {exc}") from exc
    freqs, values = np.array(freqs), np.array(values)
    if freqs.size < 2 or np.any(np.diff(freqs) <= 0):
        raise UsageError(f"{path}: need >= 2 rows with strictly increasing frequency")
    tol = 1e-9 * grid[-1]
    if freqs[0] > grid[0] + tol or freqs[-1] < grid[-1] - tol:
        raise IncompatibleError(
            f"{path}: target covers {freqs[0]:g}-{freqs[-1]:g} Hz but the model grid "
            f"spans {grid[0]:g}-{grid[-1]:g} Hz")
    return np.interp(grid, freqs, values)


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def resolve_target(spec, grid, geometry: Geometry = Geometry(), medium: Medium = Medium(),
                   peak_width=100.0):
    """Target spectrum on ``grid``, clipped to [0, 1]."""
    kind, sep, args = spec.partition(":")
    if sep and kind == "bandgap":
        lo_hi = _numbers(args, "bandgap")
        if len(lo_hi) != 2 or lo_hi[0] >= lo_hi[1]:
            raise UsageError("bandgap template is bandgap:LOW-HIGH with LOW < HIGH")
        values = bandgap(grid, *lo_hi)
    elif sep and kind == "peak":
        parts = [p for p in args.split(":") if p]
        nums = [float(p) for p in parts] if all(_is_number(p) for p in parts) else []
        if len(nums) not in (1, 2) or (len(nums) == 2 and nums[1] <= 0):
            raise UsageError("peak template is peak:CENTER[:WIDTH]")
        values = peak(grid, nums[0], nums[1] if len(nums) == 2 else peak_width)
    elif sep and kind == "structure":
        radii = np.array(_numbers(args, "structure")) * 1e-3
        values = transmission(radii, grid, geometry, medium)
    elif Path(spec).exists():
        values = read_target_csv(spec, grid)
    else:
        raise UsageError(f"target {spec!r} is neither a template nor an existing CSV file")
    return np.clip(values, 0.0, 1.0)


def write_target_csv(grid, values, path):
    lines = ["frequency_hz,transmittance"]
    lines += [f"{f:.17g},{t:.17g}" for f, t in zip(grid, values)]
    Path(path).write_text("\n".join(lines) + "\n")
