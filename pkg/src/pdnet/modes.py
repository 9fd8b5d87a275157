"""Local maxima of diagonal Gaussian mixtures by mean-shift ascent.

For a mixture with diagonal covariances the fixed-point update

    x_d <- sum_i w_i mu_id / sigma_id^2  /  sum_i w_i / sigma_id^2,
    w_i  = responsibility of component i at x,

is an EM step on the density and never decreases it. Ascents start from every
component mean; converged points closer than the merge radius are fused.
"""

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError
from .mixture import MixtureParams, component_terms, logsumexp


@dataclass(frozen=True)
class SeekerConfig:
    max_iterations: int = 500
    tolerance: float = 1e-8
    merge_radius: float = 0.02
    density_floor: float = 1e-3
    max_modes: int = 16

    def __post_init__(self):
        if min(self.max_iterations, self.tolerance, self.merge_radius,
               self.density_floor, self.max_modes) <= 0:
            raise DomainError("seeker settings must all be positive")
        if self.merge_radius <= self.tolerance:
            raise DomainError("merge radius must exceed the convergence tolerance")


@dataclass
class Mode:
    location: np.ndarray  # design units
    log_density: float
    density: float
    basin_components: list = field(default_factory=list)
    rank: int = 0
    converged: bool = True
    iterations: int = 0
    radii: np.ndarray = None  # metres, clamped to the physical range
    boundary: bool = False


@dataclass
class Ascent:
    point: np.ndarray
    log_density: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)


def _shift(params: MixtureParams, x):
    """One mean-shift update for a stack of points x (k, d)."""
    terms = component_terms(params, x)  # (k, m)
    w = np.exp(terms - logsumexp(terms, axis=1, keepdims=True))
    prec = 1.0 / params.deviations ** 2  # (m, d)
    num = w @ (params.means * prec)
    den = w @ prec
    return num / den, logsumexp(terms, axis=1)


def _ascend_many(params: MixtureParams, starts, config: SeekerConfig, keep_trace=False):
    x = np.array(starts, dtype=np.float64)
    k = x.shape[0]
    active = np.ones(k, dtype=bool)
    iterations = np.zeros(k, dtype=int)
    logp = logsumexp(component_terms(params, x), axis=1)
    traces = [[v] for v in logp] if keep_trace else None
    for _ in range(config.max_iterations):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        new, _ = _shift(params, x[idx])
        step = np.linalg.norm(new - x[idx], axis=1)
        x[idx] = new
        iterations[idx] += 1
        logp[idx] = logsumexp(component_terms(params, new), axis=1)
        if keep_trace:
            for j in idx:
                traces[j].append(logp[j])
        active[idx[step < config.tolerance]] = False
    return x, logp, iterations, ~active, traces


def ascend(params: MixtureParams, start, config: SeekerConfig = SeekerConfig()) -> Ascent:
    """Mean-shift from ``start`` until the step norm drops below tolerance."""
    params.validate()
    start = np.asarray(start, dtype=np.float64)
    if start.shape != (params.d,):
        raise DomainError(f"start must have shape ({params.d},)")
    x, logp, iters, conv, traces = _ascend_many(params, start[None], config, keep_trace=True)
    return Ascent(x[0], float(logp[0]), int(iters[0]), bool(conv[0]), traces[0])


def find_modes(params: MixtureParams, config: SeekerConfig = SeekerConfig(),
               scaler=None, geometry=None):
    """All distinct local maxima, ranked by descending density.

    With ``scaler`` and ``geometry`` the modes also carry clamped physical
    radii and a ``boundary`` flag when clamping moves the density by > 1 %.
    """
    params.validate()
    x, logp, iters, conv, _ = _ascend_many(params, params.means, config)
    # highest density first; stable sort keeps lower component index on ties
    order = np.argsort(-logp, kind="stable")
    modes = []
    for i in order:
        for mode in modes:
            if np.linalg.norm(x[i] - mode.location) <= config.merge_radius:
                mode.basin_components.append(int(i))
                break
        else:
            modes.append(Mode(x[i].copy(), float(logp[i]), float(np.exp(logp[i])), [int(i)],
                              converged=bool(conv[i]), iterations=int(iters[i])))
    assert modes, "mode search returned nothing"
    top = modes[0].log_density
    modes = [md for md in modes if md.log_density - top >= np.log(config.density_floor)]
    modes = modes[:config.max_modes]
    for rank, mode in enumerate(modes, start=1):
        mode.rank = rank
        mode.basin_components.sort()
        if scaler is not None:
            radii = scaler.to_physical(mode.location)
            if geometry is not None:
                clamped = np.clip(radii, geometry.radius_min, geometry.radius_max)
                if not np.array_equal(clamped, radii):
                    moved = logsumexp(component_terms(params, scaler.to_design(clamped)))
                    mode.boundary = bool(abs(np.expm1(moved - mode.log_density)) > 0.01)
                radii = clamped
            mode.radii = radii
    return modes


def emit_designs(modes, path, projection=None):
    """Ranked designs CSV; radii in mm with two decimals."""
    if not modes:
        raise DomainError("no modes to write")
    layers = len(modes[0].radii)
    header = ["rank", "density", "log_density", "converged", "boundary"]
    header += [f"r{i + 1}_mm" for i in range(layers)]
    if projection is not None:
        from .plane import project
        header += ["u", "v"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for mode in modes:
        row = [mode.rank, f"{mode.density:.10e}", f"{mode.log_density:.10f}",
               int(mode.converged), int(mode.boundary)]
        row += [f"{r * 1e3:.2f}" for r in mode.radii]
        if projection is not None:
            u, v = project(projection, mode.location)
            row += [f"{u:.6f}", f"{v:.6f}"]
        writer.writerow(row)
    Path(path).write_text(buf.getvalue())


def read_designs(path):
    """Parse a designs CSV into a list of dicts with radii in metres."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["rank", "density"]:
        raise FormatError(f"{path}: not a designs CSV (missing rank,density header)")
    header = rows[0]
    radius_cols = [i for i, h in enumerate(header) if h.startswith("r") and h.endswith("_mm")]
    designs = []
    for line, row in enumerate(rows[1:], start=2):
        try:
            designs.append({
                "rank": int(row[0]),
                "density": float(row[1]),
                "radii": np.array([float(row[i]) for i in radius_cols]) * 1e-3,
            })
        except (ValueError, IndexError) as exc:
            raise FormatError(f"{path}: line {line}: {exc}") from exc
    return designs
