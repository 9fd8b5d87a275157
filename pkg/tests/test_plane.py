import numpy as np
import pytest

from pdnet.errors import DomainError
from pdnet.mixture import MixtureParams
from pdnet.modes import find_modes
from pdnet.plane import density_grid, emit_grid, fit_projection, lift, project, read_grid


def planar_points(n=200, seed=0):
    rng = np.random.default_rng(seed)
    basis = np.linalg.qr(rng.normal(size=(5, 2)))[0].T
    return rng.normal(size=5) + rng.normal(size=(n, 2)) * [3.0, 1.0] @ basis


def test_orthonormal_axes_and_order():
    proj = fit_projection(np.random.default_rng(1).normal(size=(100, 5)) * [1, 2, 3, 4, 5])
    np.testing.assert_allclose(proj.axes @ proj.axes.T, np.eye(2), atol=1e-10)
    assert proj.explained_variance[0] >= proj.explained_variance[1] >= 0
    for axis in proj.axes:
        assert axis[np.argmax(np.abs(axis))] > 0


def test_rank_two_reconstruction():
    pts = planar_points()
    proj = fit_projection(pts)
    rebuilt = lift(proj, project(proj, pts))
    assert np.max(np.linalg.norm(rebuilt - pts, axis=1)) < 1e-9


def test_isotropic_cloud():
    proj = fit_projection(np.random.default_rng(2).standard_normal((10_000, 5)))
    a, b = proj.explained_variance
    assert a / b < 1.1


def test_project_examples():
    pts = np.random.default_rng(3).normal(size=(50, 5))
    proj = fit_projection(pts)
    assert np.array_equal(project(proj, proj.center), np.zeros(2))
    np.testing.assert_allclose(project(proj, proj.center + proj.axes[0]), [1, 0], atol=1e-12)
    uv = project(proj, pts)
    assert np.all(np.linalg.norm(uv, axis=1) <= np.linalg.norm(pts - proj.center, axis=1) + 1e-12)
    with pytest.raises(DomainError):
        project(proj, np.zeros(4))


def test_fit_errors():
    with pytest.raises(DomainError):
        fit_projection(np.zeros((2, 5)))
    with pytest.raises(DomainError):
        fit_projection(np.ones((10, 5)))


def test_translation_and_permutation_invariance():
    pts = np.random.default_rng(4).normal(size=(300, 5)) * [3, 2, 1, 0.5, 0.2]
    base = project(fit_projection(pts), pts)
    shifted = pts + np.array([10.0, -3.0, 2.0, 0.5, 7.0])
    np.testing.assert_allclose(project(fit_projection(shifted), shifted), base, atol=1e-10)
    perm = np.random.default_rng(5).permutation(300)
    np.testing.assert_allclose(project(fit_projection(pts[perm]), pts), base, atol=1e-10)


def test_grid_single_gaussian_peak_at_origin():
    params = MixtureParams(np.array([1.0]), np.array([[0.2, 0.1, 0.0, -0.3, 0.4]]),
                           np.full((1, 5), 0.3))
    pts = np.random.default_rng(6).normal(params.means[0], 0.3, (2000, 5))
    proj = fit_projection(pts)
    proj.center = params.means[0].copy()
    grid = density_grid(params, proj, 33, points=pts)
    j, i = np.unravel_index(np.argmax(grid.density), grid.density.shape)
    cell = (grid.u[1] - grid.u[0], grid.v[1] - grid.v[0])
    assert abs(grid.u[i]) <= cell[0] and abs(grid.v[j]) <= cell[1]


def test_grid_max_tracks_in_plane_mode():
    rng = np.random.default_rng(7)
    center = rng.normal(0, 0.2, 5)
    axes = np.linalg.qr(rng.normal(size=(5, 2)))[0].T
    uv = np.array([[0.6, -0.2], [-0.5, 0.4], [0.1, 0.7]])
    means = center + uv @ axes
    params = MixtureParams(np.array([0.5, 0.3, 0.2]), means, np.full((3, 5), 0.15))
    pts = np.vstack([rng.normal(mu, 0.15, (1000, 5)) for mu in means])
    proj = fit_projection(pts)
    modes = find_modes(params)
    grid = density_grid(params, proj, 64, points=pts, modes=[m.location for m in modes])
    target = project(proj, modes[0].location)
    j, i = np.unravel_index(np.argmax(grid.density), grid.density.shape)
    assert abs(grid.u[i] - target[0]) <= grid.u[1] - grid.u[0]
    assert abs(grid.v[j] - target[1]) <= grid.v[1] - grid.v[0]
    assert np.all(np.isfinite(grid.density)) and np.all(grid.density >= 0)
    assert [m[0] for m in grid.markers] == [f"A{k + 1}" for k in range(len(modes))]
    # bounds keep every marker inside with a margin
    for _, a, b in grid.markers:
        assert grid.u[0] < a < grid.u[-1] and grid.v[0] < b < grid.v[-1]


def test_grid_resolution_guard():
    params = MixtureParams(np.array([1.0]), np.zeros((1, 2)), np.ones((1, 2)))
    proj = fit_projection(np.random.default_rng(0).normal(size=(10, 2)))
    with pytest.raises(DomainError):
        density_grid(params, proj, 8)


def test_emit_and_read_grid(tmp_path):
    params = MixtureParams(np.array([0.5, 0.5]), np.array([[-0.5, -0.5, 0], [0.5, 0.5, 0]]),
                           np.full((2, 3), 0.2))
    proj = fit_projection(np.random.default_rng(8).normal(size=(100, 3)))
    grid = density_grid(params, proj, 20, modes=params.means)
    path = tmp_path / "grid.csv"
    emit_grid(grid, path)
    rows = [ln for ln in path.read_text().splitlines() if ln and ln[0] not in "#u"]
    assert len(rows) == 400
    back = read_grid(path)
    assert np.array_equal(back.u, grid.u) and np.array_equal(back.v, grid.v)
    assert np.array_equal(back.density, grid.density)
    assert back.markers == grid.markers and len(back.markers) == 2
