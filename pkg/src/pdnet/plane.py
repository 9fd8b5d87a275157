"""Two-dimensional PCA view of the design-space density.

The density shown on the plane is a slice: every grid point (u, v) is lifted
back to ``center + u * axis1 + v * axis2`` and the full mixture density is
evaluated there, so maxima lying in the plane appear at their projected
positions.
"""

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError
from .mixture import MixtureParams, log_density

GRID_MARGIN = 0.1


@dataclass
class Projection:
    center: np.ndarray  # (d,)
    axes: np.ndarray  # (2, d), orthonormal rows
    explained_variance: np.ndarray  # (2,), descending


@dataclass
class DensityGrid:
    u: np.ndarray  # (res,)
    v: np.ndarray  # (res,)
    density: np.ndarray  # (res_v, res_u); density[j, i] is at (u[i], v[j])
    markers: list = field(default_factory=list)  # (label, u, v)

    @property
    def resolution(self):
        return self.u.size


def fit_projection(points) -> Projection:
    """Top-2 principal axes of the sample covariance.

    Each axis is signed so that its largest-magnitude entry is positive.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 3:
        raise DomainError("need at least 3 points of shape (n, d)")
    if points.shape[1] < 2:
        raise DomainError("need at least 2 dimensions to project onto a plane")
    center = points.mean(axis=0)
    cov = np.cov(points - center, rowvar=False)
    values, vectors = np.linalg.eigh(cov)
    if values[-1] <= 0:
        raise DomainError("points have zero variance in every direction")
    top = np.argsort(values)[::-1][:2]
    axes = vectors[:, top].T.copy()
    for axis in axes:
        if axis[np.argmax(np.abs(axis))] < 0:
            axis *= -1
    return Projection(center, axes, np.maximum(values[top], 0.0))


def project(projection: Projection, point):
    """(u, v) coordinates of a point (d,) or points (k, d)."""
    point = np.asarray(point, dtype=np.float64)
    if point.shape[-1] != projection.center.size:
        raise DomainError(f"point dimension {point.shape[-1]} != {projection.center.size}")
    return (point - projection.center) @ projection.axes.T


def lift(projection: Projection, uv):
    uv = np.asarray(uv, dtype=np.float64)
    return projection.center + uv @ projection.axes


def density_grid(params: MixtureParams, projection: Projection, resolution=64,
                 points=None, modes=None, labels=None) -> DensityGrid:
    """Mixture density on a planar slice spanned by the projection axes.

    Bounds cover the projected ``points`` and ``modes`` (design-unit arrays)
    plus a 10 % margin of the span on each side.
    """
    if resolution < 16:
        raise DomainError("resolution must be at least 16 per axis")
    anchors = [np.zeros((1, 2)), project(projection, params.means)]
    marks = np.zeros((0, 2))
    if points is not None:
        anchors.append(project(projection, np.atleast_2d(points)))
    if modes is not None and len(modes):
        marks = project(projection, np.atleast_2d(modes))
        anchors.append(marks)
    uv = np.vstack(anchors)
    lo, hi = uv.min(axis=0), uv.max(axis=0)
    span = np.maximum(hi - lo, 1e-6)
    lo, hi = lo - GRID_MARGIN * span, hi + GRID_MARGIN * span
    u = np.linspace(lo[0], hi[0], resolution)
    v = np.linspace(lo[1], hi[1], resolution)
    uu, vv = np.meshgrid(u, v)
    lifted = lift(projection, np.column_stack([uu.ravel(), vv.ravel()]))
    dens = np.exp(log_density(params, lifted)).reshape(resolution, resolution)
    if labels is None:
        labels = [f"A{i + 1}" for i in range(len(marks))]
    markers = [(lab, float(a), float(b)) for lab, (a, b) in zip(labels, marks)]
    return DensityGrid(u, v, dens, markers)


def emit_grid(grid: DensityGrid, path):
    """CSV rows ``u,v,density`` after a ``#`` header line recording bounds."""
    buf = io.StringIO()
    buf.write(f"# pdn-grid v1 u_min={grid.u[0]:.17g} u_max={grid.u[-1]:.17g} "
              f"v_min={grid.v[0]:.17g} v_max={grid.v[-1]:.17g} resolution={grid.resolution}\n")
    for label, a, b in grid.markers:
        buf.write(f"# marker {label} {a:.17g} {b:.17g}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["u", "v", "density"])
    for j, vj in enumerate(grid.v):
        for i, ui in enumerate(grid.u):
            writer.writerow([f"{ui:.17g}", f"{vj:.17g}", f"{grid.density[j, i]:.17g}"])
    Path(path).write_text(buf.getvalue())


def read_grid(path) -> DensityGrid:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# pdn-grid"):
        raise FormatError(f"{path}: missing '# pdn-grid' header line")
    meta = dict(re.findall(r"(\w+)=(\S+)", lines[0]))
    res = int(meta["resolution"])
    markers = []
    body = []
    for line in lines[1:]:
        if line.startswith("# marker"):
            _, _, label, a, b = line.split()
            markers.append((label, float(a), float(b)))
        elif line and not line.startswith("u,"):
            body.append([float(x) for x in line.split(",")])
    data = np.array(body)
    if data.shape != (res * res, 3):
        raise FormatError(f"{path}: expected {res * res} rows, found {data.shape[0]}")
    return DensityGrid(data[:res, 0].copy(), data[::res, 1].copy(),
                       data[:, 2].reshape(res, res), markers)
