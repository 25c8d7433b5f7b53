import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plasticdiff.algebra import EMB, star_array
from plasticdiff.cocycle import f_vector
from plasticdiff.inflation import SUBSTITUTION_MATRIX, densities
from plasticdiff.windows import (
    cloud_counts,
    estimate_volumes,
    exact_volumes,
    exact_volumes_polynomial,
    ft_grid,
    iterate_ifs,
    read_pgm,
    window_ft_oracle,
    write_clouds_csv,
    write_grid_csv,
    write_grid_pgms,
    write_pgm,
)


@pytest.fixture(scope="module")
def clouds20():
    return iterate_ifs(20)


def test_depth_one():
    cl = iterate_ifs(1)
    assert cl["a"].points.tolist() == [[0.0, 0.0]]
    assert cl["b"].points.tolist() == [[0.0, 0.0], [1.0, 0.0]]
    assert cl["c"].points.tolist() == [[0.0, 0.0]]


@pytest.mark.parametrize("depth", [0, 1, 5, 12, 20])
def test_counts_follow_matrix(depth):
    expected = np.ones(3, dtype=np.int64)
    for _ in range(depth):
        expected = SUBSTITUTION_MATRIX @ expected
    cl = iterate_ifs(depth)
    assert tuple(len(cl[l]) for l in "abc") == tuple(expected) == cloud_counts(depth)


def test_dedupe_removes_only_exact_repeats():
    a, b = iterate_ifs(18), iterate_ifs(18, dedupe=True)
    for l in "abc":
        assert len(b[l]) <= len(a[l])
        assert len(np.unique(b[l].coords, axis=0)) == len(b[l])
        assert len(np.unique(a[l].coords, axis=0)) == len(b[l])


def test_points_are_star_images(clouds20):
    for cl in clouds20.values():
        assert np.abs(star_array(cl.coords) - cl.points).max() < 1e-9


def test_clouds_bounded(clouds20):
    # |alpha| < 1 and digits in {0, 1} bound every expansion by 1 / (1 - |alpha|^3)
    bound = 1.0 / (1.0 - abs(EMB.alpha) ** 3)
    for cl in clouds20.values():
        assert np.hypot(*cl.points.T).max() <= bound


def test_volume_forms_agree():
    assert np.allclose(exact_volumes(), exact_volumes_polynomial(), atol=1e-14)
    dens_lat = 2 / np.sqrt(23)
    assert np.allclose(dens_lat * exact_volumes(), densities()[1:], atol=1e-14)
    assert exact_volumes()[1] == pytest.approx(0.744862, abs=1e-6)


def test_sparse_cells_warn(clouds20):
    with pytest.warns(RuntimeWarning):
        estimate_volumes(clouds20, 0.001)
    with pytest.raises(ValueError):
        estimate_volumes(clouds20, 0.0)


def test_oracle_against_cocycle(clouds20):
    rng = np.random.default_rng(11)
    big = iterate_ifs(26)
    for y in rng.uniform(-1, 1, size=(5, 2)):
        f = f_vector(y)
        for i, l in enumerate("abc"):
            assert abs(window_ft_oracle(big[l], y) - f[i]) < 1e-2
    ys = rng.uniform(-1, 1, size=(4, 2))
    batch = window_ft_oracle(clouds20["b"], ys)
    assert np.allclose(batch, [window_ft_oracle(clouds20["b"], y) for y in ys])
    assert window_ft_oracle(clouds20["a"], (0.0, 0.0)) == pytest.approx(exact_volumes()[0])


def test_memory_cap():
    with pytest.raises(MemoryError):
        iterate_ifs(70)


@pytest.fixture(scope="module")
def grid():
    return ft_grid((-4, 4, -4, 4), 65, "b")


def test_grid_centre_and_bound(grid):
    assert grid.converged.all()
    c = grid.magnitude.shape[0] // 2
    assert grid.xs[c] == 0.0 and grid.ys[c] == 0.0
    assert np.unravel_index(grid.magnitude.argmax(), grid.magnitude.shape) == (c, c)
    assert grid.magnitude[c, c] == pytest.approx(EMB.alpha_im * EMB.beta, abs=1e-9)
    assert (grid.magnitude <= exact_volumes()[1] + 1e-9).all()


def test_grid_point_symmetry(grid):
    assert np.abs(grid.values[::-1, ::-1] - np.conj(grid.values)).max() < 1e-10


def test_grid_layout():
    g = ft_grid((0, 1, 2, 4), (3, 2), "a")
    assert g.values.shape == (2, 3)
    assert g.xs.tolist() == [0.0, 0.5, 1.0] and g.ys.tolist() == [2.0, 4.0]
    assert g.values[1, 2] == pytest.approx(f_vector((1.0, 4.0))[0], abs=1e-11)
    with pytest.raises(ValueError):
        ft_grid((1, 0, 0, 1), 4)


def test_grid_io(grid, tmp_path):
    write_grid_csv(grid, tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "yx,yy,re,im,abs,arg"
    assert len(lines) == 1 + 65 * 65
    mag, arg = write_grid_pgms(grid, tmp_path / "g")
    pix = read_pgm(mag)
    assert pix.shape == (65, 65) and pix[32, 32] == 255
    assert read_pgm(arg).shape == (65, 65)


@given(st.lists(st.lists(st.floats(0, 1), min_size=3, max_size=3), min_size=1, max_size=5))
@settings(max_examples=25, deadline=None)
def test_pgm_round_trip(rows):
    layer = np.array(rows)
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "x.pgm"
        write_pgm(layer, 0.0, 1.0, path)
        assert np.array_equal(read_pgm(path), np.rint(layer * 255).astype(np.uint8))


def test_clouds_csv(tmp_path):
    cl = iterate_ifs(4)
    write_clouds_csv(list(cl.values()), tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "x,y,letter"
    assert len(lines) == 1 + sum(cloud_counts(4))
