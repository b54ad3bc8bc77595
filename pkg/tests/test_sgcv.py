import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import seasonal_sim, standardized
from oracles import sgcv_oracle
from seasonal_dfm.exceptions import LagTooLarge, MissingDataError, SymmetryError
from seasonal_dfm.panel import Panel
from seasonal_dfm.sgcv import (
    GENERAL,
    SYMMETRIZE,
    EigenSequence,
    eigen_sequence,
    eigen_symmetric,
    sgcv,
    symmetrize,
)


def test_zero_panel_gives_zero_matrix():
    z = np.zeros((3, 30))
    for h in (0, 5, 12):
        assert np.all(sgcv(z, h).matrix == 0)


def test_constant_ones_hand_sum():
    x = np.ones((1, 24))
    assert sgcv(x, 0, d=1, S=12).matrix[0, 0] == pytest.approx(6.0, abs=1e-14)
    assert sgcv(x, 12, d=1, S=12).matrix[0, 0] == pytest.approx(3.0, abs=1e-14)


def test_bilinear_scaling(rng):
    x = rng.standard_normal((4, 40))
    for h in (0, 3, 12):
        np.testing.assert_allclose(sgcv(2.5 * x, h).matrix, 6.25 * sgcv(x, h).matrix, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("h,d,S", [(0, 1, 12), (1, 1, 12), (7, 2, 4), (12, 1, 12)])
def test_matches_bruteforce(rng, h, d, S):
    x = rng.standard_normal((3, 29))
    ref = np.array(sgcv_oracle(x.tolist(), h, d, S))
    np.testing.assert_allclose(sgcv(x, h, d, S).matrix, ref, rtol=1e-12, atol=1e-14)


def test_lag_and_missing_errors(rng):
    x = rng.standard_normal((2, 10))
    with pytest.raises(LagTooLarge):
        sgcv(x, 10)
    x[0, 3] = np.nan
    with pytest.raises(MissingDataError):
        sgcv(Panel.from_array(x), 1)


def test_c0_symmetric_psd(rng):
    x = rng.standard_normal((6, 50))
    c = sgcv(x, 0).matrix
    assert np.max(np.abs(c - c.T)) <= 1e-10
    ev = np.linalg.eigvalsh(c)
    assert ev.min() >= -1e-8 * ev.max()


def test_c0_eigen_matches_covariance_style_bruteforce(rng):
    for n, T in [(2, 10), (3, 20), (4, 30)]:
        x = rng.standard_normal((n, T))
        ref = np.array(sgcv_oracle(x.tolist(), 0, 1, 12))
        vals, _ = eigen_symmetric(sgcv(x, 0).matrix)
        np.testing.assert_allclose(np.sort(vals), np.sort(np.linalg.eigvalsh(ref)), atol=1e-10)


def test_symmetrize():
    np.testing.assert_array_equal(symmetrize([[0, 2], [0, 0]]), [[0, 1], [1, 0]])
    a = np.array([[1.0, 2.0], [2.0, 5.0]])
    np.testing.assert_array_equal(symmetrize(a), a)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6)).map(lambda t: (t[0], t[0])),
              elements=st.floats(-100, 100, allow_nan=False)))
def test_symmetrize_idempotent(a):
    s = symmetrize(a)
    np.testing.assert_array_equal(symmetrize(s), s)


def test_eigen_diagonal():
    vals, vecs = eigen_symmetric(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(vals, [3.0, 1.0])
    np.testing.assert_allclose(np.abs(vecs), np.eye(2), atol=1e-12)


def test_eigen_projector(rng):
    v = rng.standard_normal(5)
    v /= np.linalg.norm(v)
    vals, vecs = eigen_symmetric(np.outer(v, v))
    np.testing.assert_allclose(vals, [1, 0, 0, 0, 0], atol=1e-12)
    assert abs(abs(vecs[:, 0] @ v) - 1) <= 1e-12


def test_eigen_orders_by_magnitude():
    vals, _ = eigen_symmetric(np.diag([1.0, -4.0, 2.0]))
    np.testing.assert_allclose(vals, [-4.0, 2.0, 1.0])


def test_eigen_ties_are_stable():
    vals, vecs = eigen_symmetric(np.diag([-2.0, 2.0, 1.0]))
    # eigh returns ascending (-2, 1, 2); equal magnitudes keep that order
    np.testing.assert_allclose(vals, [-2.0, 2.0, 1.0])
    for _ in range(3):
        v2, w2 = eigen_symmetric(np.diag([-2.0, 2.0, 1.0]))
        np.testing.assert_array_equal(v2, vals)
        np.testing.assert_array_equal(w2, vecs)


def test_eigen_random_reconstruction(rng):
    a = symmetrize(rng.standard_normal((5, 5)))
    vals, vecs = eigen_symmetric(a)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(5), atol=1e-8)
    np.testing.assert_allclose(vecs @ np.diag(vals) @ vecs.T, a, atol=1e-8)
    for lam, v in zip(vals, vecs.T):
        assert np.linalg.norm(a @ v - lam * v) <= 1e-8 * np.linalg.norm(a, 2)


def test_eigen_rejects_nonsymmetric():
    with pytest.raises(SymmetryError):
        eigen_symmetric([[0.0, 1.0], [0.0, 0.0]])


def test_scale_invariance_of_directions(rng):
    x = rng.standard_normal((5, 60))
    for h in (0, 12):
        v1, w1 = eigen_symmetric(symmetrize(sgcv(x, h).matrix))
        v2, w2 = eigen_symmetric(symmetrize(sgcv(3.0 * x, h).matrix))
        np.testing.assert_allclose(v2, 9.0 * v1, rtol=1e-10, atol=1e-14)
        for a, b in zip(w1.T, w2.T):
            assert abs(abs(a @ b) - 1) <= 1e-8


def test_scale_factor_leaves_ratios_and_vectors(rng):
    x = rng.standard_normal((6, 80))
    for h in (0, 5, 12):
        v1, w1 = eigen_symmetric(symmetrize(sgcv(x, h, d=1).matrix))
        v2, w2 = eigen_symmetric(symmetrize(sgcv(x, h, d=2).matrix))
        np.testing.assert_allclose(v1 / v1[0], v2 / v2[0], atol=1e-10)
        for a, b in zip(w1.T, w2.T):
            assert abs(abs(a @ b) - 1) <= 1e-10


def test_eigen_sequence_defaults_and_shape(sim_r2):
    seq = eigen_sequence(standardized(sim_r2))
    assert seq.lags.tolist() == list(range(37))
    assert seq.magnitudes.shape == (37, 5)
    assert np.all(np.diff(seq.magnitudes, axis=1) <= 0)
    assert np.all(seq.magnitudes >= 0)


def test_eigen_sequence_zero_panel():
    seq = eigen_sequence(np.zeros((4, 50)), H=10, k=3, mode=GENERAL)
    assert np.all(seq.magnitudes == 0)


def test_two_dominant_at_seasonal_lags(sim_r2):
    seq = eigen_sequence(standardized(sim_r2))
    for h in (12, 24, 36):
        m = seq.at(h)
        assert m[2] / m[1] < 0.2


def test_general_mode_differs_but_runs(sim_r2):
    z = standardized(sim_r2)
    s = eigen_sequence(z, H=13, k=3, mode=SYMMETRIZE)
    g = eigen_sequence(z, H=13, k=3, mode=GENERAL)
    np.testing.assert_allclose(s.at(0), g.at(0), rtol=1e-8)  # C(0) is symmetric
    assert g.magnitudes.shape == s.magnitudes.shape


def test_rank_structure_with_nonseasonal_factor():
    # r1 = 1, r2 = 1: seasonal lags show r1 + r2 large magnitudes, other lags r1
    z = standardized(seasonal_sim(n=20, T=600, r1=1, r2=1, seed=3))
    seq = eigen_sequence(z, H=36, k=4)
    for h in (12, 24, 36):
        m = seq.at(h)
        assert m[2] < 0.1 * m[1]
    for h in (5, 7, 17):
        m = seq.at(h)
        assert m[1] < 0.1 * m[0]


def test_csv_round_trip(sim_r2):
    seq = eigen_sequence(standardized(sim_r2), H=6, k=3)
    text = seq.to_csv_text()
    assert text.splitlines()[0] == "h,rank,magnitude"
    assert len(text.splitlines()) == 1 + 7 * 3
    back = EigenSequence.from_csv_text(text)
    np.testing.assert_array_equal(back.magnitudes, seq.magnitudes)


def test_svg_has_one_polyline_per_rank(sim_r2):
    seq = eigen_sequence(standardized(sim_r2), H=36, k=5)
    svg = seq.to_svg()
    assert svg.count("<polyline") == 5
    first = svg[svg.index("<polyline"):]
    pts = first[first.index('points="') + 8:].split('"')[0].split()
    assert len(pts) == 37
