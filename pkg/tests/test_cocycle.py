import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plasticdiff.algebra import EMB
from plasticdiff.cocycle import (
    PEAK_COLUMNS,
    NonConvergenceError,
    amplitudes,
    c_matrix,
    c_vector,
    c_vectors,
    cocycle_product,
    contraction,
    f_vector,
    fourier_matrix,
    intensity,
    peak_list,
    peak_record,
    taylor_seed,
    write_peaks_csv,
    write_peaks_json,
)
from plasticdiff.inflation import SUBSTITUTION_MATRIX, densities, pf_data
from plasticdiff.windows import exact_volumes

coord = st.floats(-3, 3, allow_nan=False)
points = st.tuples(coord, coord)
B_ = EMB.beta


def test_fourier_matrix_examples():
    assert np.array_equal(fourier_matrix((0.0, 0.0)), SUBSTITUTION_MATRIX.astype(complex))
    B = fourier_matrix((0.5, 7.0))
    assert B[1, 2] == pytest.approx(-1.0)
    mask = np.ones((3, 3), dtype=bool)
    mask[1, 2] = False
    assert np.array_equal(B[mask], SUBSTITUTION_MATRIX[mask].astype(complex))
    assert fourier_matrix((1.25, 0.0))[1, 2] == pytest.approx(fourier_matrix((0.25, 3.0))[1, 2])


def test_contraction_is_alpha_bar():
    R = contraction()
    y = np.array([0.3, -0.7])
    z = complex(*(R @ y))
    assert z == pytest.approx(np.conj(EMB.alpha) * complex(*y), abs=1e-15)


@given(points, st.integers(1, 8), st.integers(1, 8))
@settings(max_examples=40)
def test_cocycle_identity(y, n, m):
    y = np.array(y)
    Rn = np.linalg.matrix_power(contraction(), n)
    lhs = cocycle_product(y, n + m)
    rhs = cocycle_product(y, n) @ cocycle_product(Rn @ y, m)
    assert np.abs(lhs - rhs).max() < 1e-9 * max(1.0, np.abs(lhs).max())


def test_product_at_zero_is_projector():
    b = B_
    P = (3 + b + 7 * b * b) / 23 * np.array([
        [2 - b * b, b - 1, b * b - b],
        [b * b - b, 1 + b - b * b, b * b - 1],
        [b - 1, b * b - b, 1 + b - b * b],
    ])
    C, _ = c_matrix((0.0, 0.0))
    assert np.abs(C - P).max() < 1e-10
    assert np.abs(cocycle_product((0, 0), 80) / b**80 - P).max() < 1e-12


def test_c_at_zero():
    v = pf_data().v
    for order in (0, 8):
        c, _ = c_vector((0.0, 0.0), order=order)
        assert np.abs(c - v).max() < 1e-12


def test_taylor_seed_against_plain_product():
    rng = np.random.default_rng(3)
    # seeds are evaluated at R^n y, which is ~0.02 by the time iterates settle
    ys = rng.uniform(-0.02, 0.02, size=(20, 2))
    # the plain product from v, run long enough that its error is ~1e-15
    plain = c_vectors(ys, tol=1e-15, order=0, min_steps=300, max_steps=320)
    w = ys[:, 0] + 1j * ys[:, 1]
    errs = [np.abs(taylor_seed(w, o) - plain.c).max() for o in (2, 4, 6, 8)]
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < 5e-12


@given(st.floats(0, 10), st.floats(0, 2 * np.pi))
@settings(max_examples=60, deadline=None)
def test_step_count_window(r, phi):
    res = c_vectors(np.array([[r * np.cos(phi), r * np.sin(phi)]]))
    assert res.converged[0]
    assert 30 <= res.steps[0] <= 120


@given(points)
@settings(max_examples=40, deadline=None)
def test_functional_equation(y):
    y = np.array(y)
    f = f_vector(y)
    g = fourier_matrix(y) @ f_vector(contraction() @ y) / B_
    assert np.abs(f - g).max() < 1e-9


@given(points)
@settings(max_examples=40, deadline=None)
def test_conjugate_symmetry_and_bound(y):
    f = f_vector(y)
    g = f_vector(-np.array(y))
    assert np.abs(g - np.conj(f)).max() < 1e-10
    assert (np.abs(f) <= exact_volumes() + 1e-9).all()


def test_seeded_matches_long_plain_product():
    rng = np.random.default_rng(4)
    ys = rng.uniform(-3, 3, size=(30, 2))
    ref = c_vectors(ys, tol=1e-15, order=0, min_steps=300, max_steps=320)
    b = c_vectors(ys)
    assert b.converged.all()
    assert np.abs(ref.c - b.c).max() < 1e-11


@given(points)
@settings(max_examples=20, deadline=None)
def test_rank_one(y):
    C, _ = c_matrix(y)
    s = np.linalg.svd(C, compute_uv=False)
    assert s[1] < 1e-8 * s[0]


def test_nonconvergence_raises():
    with pytest.raises(NonConvergenceError):
        c_vector((2.0, 1.0), max_steps=35, order=0)
    res = c_vectors(np.array([[2.0, 1.0]]), order=0, max_steps=35)
    assert not res.converged[0] and res.steps[0] == 35


def test_amplitudes_at_origin():
    A = amplitudes((0, 0, 0))
    assert np.allclose(A, densities()[1:], atol=1e-12)
    assert intensity((0, 0, 0)) == pytest.approx(densities()[0] ** 2, rel=1e-12)


def test_peak_list_properties():
    peaks = peak_list(2.0, imin=1e-4)
    ks = [p.k for p in peaks]
    assert ks == sorted(ks)
    assert peaks[0].miller == (0, 0, 0)
    assert all(0 <= k <= 2.0 for k in ks)
    assert all(p.intensity >= 1e-4 and p.converged for p in peaks)
    full = peak_list(2.0, imin=0.0)
    assert len(full) > len(peaks)
    rec = next(p for p in full if p.miller == (1, 2, 2))
    ref = peak_record((1, 2, 2))
    assert rec.intensity == pytest.approx(ref.intensity, rel=1e-9)
    assert rec.k == pytest.approx(1.267240014, abs=1e-8)


def test_peak_list_workers_identical():
    a = peak_list(1.5, imin=1e-6, chunk=256)
    b = peak_list(1.5, imin=1e-6, chunk=256, workers=3)
    assert [p.row() for p in a] == [p.row() for p in b]


def test_peak_outputs(tmp_path):
    peaks = peak_list(1.0, imin=1e-3)
    csv_path, json_path = tmp_path / "p.csv", tmp_path / "p.json"
    write_peaks_csv(peaks, csv_path)
    write_peaks_json(peaks, json_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == ",".join(PEAK_COLUMNS)
    assert len(lines) == len(peaks) + 1
    rows = json.loads(json_path.read_text())
    assert rows[0]["n0"] == 0 and rows[0]["intensity"] == pytest.approx(peaks[0].intensity)
    assert float(lines[1].split(",")[-1]) == peaks[0].intensity
