import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plasticdiff.algebra import EMB, real_embed, wave_number
from plasticdiff.cocycle import amplitudes
from plasticdiff.finite import (
    FiniteScan,
    amplitude_estimate,
    exponential_sum,
    intensity_scan,
    recursive_exponential_sums,
    streamed_exponential_sum,
)
from plasticdiff.inflation import densities, inflate, inflate_points, letter_counts, patch_length


def test_sum_at_zero_counts_points():
    p = inflate(20, "a")
    assert exponential_sum(p, 0.0) == pytest.approx(len(p))
    h = (1.0, 2.0, 3.0)
    assert exponential_sum(p, 0.0, h) == pytest.approx(float(np.dot(letter_counts(20, "a"), h)))


def test_input_forms_agree():
    pts = inflate_points(12, "b")
    p = inflate(12, "b")
    k = 0.731
    a = exponential_sum(pts, k)
    b = exponential_sum(p, k)
    c = exponential_sum((p.positions(), p.letters), k)
    assert a == pytest.approx(b, abs=1e-12) and b == pytest.approx(c, abs=1e-12)
    direct = sum(np.exp(-2j * np.pi * k * pt.position.real()) for pt in pts)
    assert a == pytest.approx(direct, abs=1e-10)


def test_single_tile():
    assert exponential_sum(inflate(0, "c"), 0.4, (0, 0, 2j)) == pytest.approx(2j)
    with pytest.raises(ValueError):
        exponential_sum(inflate(0, "a"), 0.1, (1, 1))


@given(st.integers(0, 32), st.floats(0, 3), st.sampled_from("abc"))
@settings(max_examples=40, deadline=None)
def test_recursion_matches_direct(m, k, seed):
    h = (1.0, 0.5 - 0.25j, 2.0)
    direct = exponential_sum(inflate(m, seed), k, h)
    rec = recursive_exponential_sums(m, k, h)["abc".index(seed)]
    assert abs(direct - rec) < 1e-9 * max(1, len(inflate(m, seed)))


def test_streamed_matches_recursion():
    for m, k in [(44, 1.267240014), (47, 0.5)]:
        s = streamed_exponential_sum(m, "a", k)
        r = recursive_exponential_sums(m, k)[0]
        assert abs(s - r) < 1e-9 * abs(patch_length(m).real())
        assert s == pytest.approx(exponential_sum(inflate(m, "a"), k), abs=1e-6)


def test_normalisation():
    m = 30
    L = real_embed(patch_length(m, "a"))
    assert L == pytest.approx(EMB.beta**m, rel=1e-12)
    est = amplitude_estimate(m, "a", (0, 0, 0))
    assert est.real == pytest.approx(densities()[0], rel=1e-3)
    scan = intensity_scan(m, "a", 0.0, 0.1, 3)
    assert scan.intensities[0] == pytest.approx(len(inflate(m, "a")) ** 2 / L, rel=1e-12)


def test_scan_methods_agree():
    a = intensity_scan(24, "b", 0.1, 2.0, 60)
    b = intensity_scan(24, "b", 0.1, 2.0, 60, method="recursive")
    c = intensity_scan(24, "b", 0.1, 2.0, 60, workers=3)
    assert np.allclose(a.intensities, b.intensities, rtol=1e-9, atol=1e-12)
    assert np.array_equal(a.intensities, c.intensities)
    with pytest.raises(ValueError):
        intensity_scan(24, "b", 1.0, 0.5, 10)
    with pytest.raises(ValueError):
        intensity_scan(24, "b", 0.0, 1.0, 10, method="fft")


def test_scan_example_grid():
    scan = intensity_scan(18, "a", 0.0, 2.5, 5)
    assert scan.k_values.tolist() == [0.0, 0.625, 1.25, 1.875, 2.5]
    assert scan.intensities[0] == pytest.approx(114**2 / EMB.beta**18, rel=1e-12)


def test_local_maximum_near_strong_peak():
    k0 = wave_number((1, 2, 2)).k
    scan = intensity_scan(42, "a", k0 - 2e-4, k0 + 2e-4, 401)
    spacing = scan.k_values[1] - scan.k_values[0]
    top = scan.k_values[np.argmax(scan.intensities)]
    assert abs(top - 1.267240014) <= spacing
    assert len(scan.local_maxima()) >= 1


def test_estimate_approaches_amplitude():
    exact = amplitudes((1, 2, 2)).sum()
    d18 = abs(amplitude_estimate(18, "a", (1, 2, 2)) - exact)
    d42 = abs(amplitude_estimate(42, "a", (1, 2, 2)) - exact)
    assert d42 < d18 / 10


def test_scan_csv(tmp_path):
    scan = intensity_scan(10, "a", 0.0, 1.0, 11)
    scan.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "k,intensity,log10_intensity"
    assert len(lines) == 12


def test_local_maxima_interior_only():
    s = FiniteScan(1, "a", np.arange(5.0), np.array([3.0, 1.0, 2.0, 1.0, 5.0]))
    assert s.local_maxima().tolist() == [2]


@pytest.mark.slow
def test_deepest_patch_sum():
    # 82,938,844 control points, streamed
    k = 1.267240014
    s = streamed_exponential_sum(66, "a", k)
    r = recursive_exponential_sums(66, k)[0]
    assert abs(s - r) < 1e-7 * abs(r)
