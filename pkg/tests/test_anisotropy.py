import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finsler_pohozaev import anisotropy as an
from finsler_pohozaev.errors import DegenerateGradient, NotUniformlyElliptic


def fd_gradient(f, xi, h=1e-6):
    out = np.zeros_like(xi)
    for k in range(xi.size):
        e = np.zeros_like(xi)
        e[k] = h
        out[k] = (f(xi + e) - f(xi - e)) / (2 * h)
    return out


NORMS = [
    an.Euclidean(),
    an.Ellipsoidal([[2.0, 0.0], [0.0, 1.0]]),
    an.Ellipsoidal([[2.0, 0.5], [0.5, 1.0]]),
    an.SmoothedLq(4.0, 0.0),
    an.SmoothedLq(3.0, 0.1),
    an.Euclidean(dim=3),
]


def test_euclidean_values():
    a = an.Euclidean()
    H, g, D = a.evaluate(np.array([3.0, 4.0]))
    assert H == 5.0
    np.testing.assert_allclose(g, [0.6, 0.8])
    np.testing.assert_allclose(D, (np.eye(2) - np.outer(g, g)) / 5.0)


def test_ellipsoidal_matches_quadratic_form():
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    a = an.Ellipsoidal(A)
    xi = np.array([0.7, -1.1])
    assert a.value(xi) == pytest.approx(np.sqrt(xi @ A @ xi), rel=1e-15)
    np.testing.assert_allclose(a.gradient(xi), A @ xi / np.sqrt(xi @ A @ xi), rtol=1e-14)


def test_ellipsoidal_rejects_indefinite_or_asymmetric():
    with pytest.raises(ValueError):
        an.Ellipsoidal([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        an.Ellipsoidal([[1.0, 0.1], [0.0, 1.0]])


@pytest.mark.parametrize("a", NORMS, ids=lambda a: a.kind + str(getattr(a, "q", "")))
def test_gradient_and_hessian_match_finite_differences(a, rng):
    for _ in range(5):
        xi = rng.standard_normal(a.dim)
        np.testing.assert_allclose(a.gradient(xi), fd_gradient(a.value, xi), rtol=1e-6, atol=1e-8)
        D = np.array([fd_gradient(lambda z: a.gradient(z)[k], xi) for k in range(a.dim)])
        np.testing.assert_allclose(a.hessian(xi), D, rtol=1e-5, atol=1e-6)


def test_batch_evaluation_matches_single():
    a = an.Ellipsoidal([[2.0, 0.5], [0.5, 1.0]])
    xi = np.random.default_rng(1).standard_normal((4, 3, 2))
    H = a.value(xi)
    assert H.shape == (4, 3)
    assert H[2, 1] == pytest.approx(a.value(xi[2, 1]))
    assert a.hessian(xi).shape == (4, 3, 2, 2)


def test_degenerate_gradient_is_reported():
    with pytest.raises(DegenerateGradient):
        an.Euclidean().evaluate(np.zeros(2))
    with pytest.raises(DegenerateGradient):
        an.Euclidean().evaluate(np.array([1e-10, 0.0]), scale=1e6)


@pytest.mark.parametrize("a", NORMS[:4], ids=lambda a: a.kind)
def test_homogeneity_and_euler_exact_for_homogeneous_norms(a):
    assert an.check_homogeneity(a) <= 1e-10
    assert an.check_euler(a) <= 1e-10
    assert an.check_hessian_annihilates(a) <= 1e-8


def test_smoothing_breaks_homogeneity_and_is_reported():
    assert an.check_homogeneity(an.SmoothedLq(4.0, 0.1)) > 1e-3


def test_smoothed_lq_vanishes_at_origin_and_is_smooth():
    a = an.SmoothedLq(4.0, 0.2)
    assert a.value(np.zeros(2)) == 0.0
    np.testing.assert_allclose(a.gradient(np.zeros(2)), 0.0)
    assert a.value(np.array([1e-4, 0.0])) < 1e-6


def test_ellipticity_euclidean_is_one():
    assert an.estimate_ellipticity(an.Euclidean()) == pytest.approx(1.0, abs=1e-8)


def test_ellipticity_ellipsoidal_brute_force():
    A = np.diag([2.0, 1.0])
    a = an.Ellipsoidal(A)
    # on H = 1, the tangential curvature of sqrt(x.Ax) is det(A)/|A xi|^3 * ... ;
    # brute force over a dense parametrization of the unit ellipse
    th = np.linspace(0, 2 * np.pi, 200_001)
    xi = np.stack([np.cos(th) / np.sqrt(2.0), np.sin(th)], axis=-1)
    g = a.gradient(xi)
    v = np.stack([-g[:, 1], g[:, 0]], -1)
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    brute = np.einsum("ki,kij,kj->k", v, a.hessian(xi), v).min()
    assert an.estimate_ellipticity(a) == pytest.approx(brute, rel=1e-8)


def test_unsmoothed_lq_is_not_uniformly_elliptic():
    with pytest.raises(NotUniformlyElliptic):
        an.estimate_ellipticity(an.SmoothedLq(4.0, 0.0))


def test_smoothed_lq_ellipticity_small_positive():
    lam = an.estimate_ellipticity(an.SmoothedLq(4.0, 0.1))
    assert 0 < lam < 1


def test_norm_equivalence_diag():
    c1, c2 = an.estimate_norm_equivalence(an.Ellipsoidal(np.diag([2.0, 1.0])))
    assert c1 == pytest.approx(1.0, abs=1e-8)
    assert c2 == pytest.approx(np.sqrt(2.0), abs=1e-8)


def test_norm_equivalence_three_dimensions():
    c1, c2 = an.estimate_norm_equivalence(an.Ellipsoidal(np.diag([4.0, 1.0, 9.0])), n_samples=2000)
    assert c1 == pytest.approx(1.0, abs=1e-6)
    assert c2 == pytest.approx(3.0, abs=1e-6)


def test_check_hypotheses_is_seed_reproducible():
    a = an.Ellipsoidal([[2.0, 0.4], [0.4, 1.0]])
    r1 = an.check_hypotheses(a, n_samples=500, seed=3)
    r2 = an.check_hypotheses(a, n_samples=500, seed=3)
    assert r1 == r2


def test_from_config():
    a = an.from_config({"kind": "ellipsoidal", "matrix": ["2", "0", "0", "1"]})
    assert isinstance(a, an.Ellipsoidal) and a.dim == 2
    assert isinstance(an.from_config({"kind": "smoothed-lq", "q": "3", "eps": "0.1"}), an.SmoothedLq)
    with pytest.raises(ValueError):
        an.from_config({"kind": "crystalline"})
    with pytest.raises(ValueError):
        an.from_config({"kind": "ellipsoidal", "matrix": ["1", "0", "1"]})


spd = st.tuples(
    st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(-0.9, 0.9)
).map(lambda t: np.array([[t[0], t[2] * np.sqrt(t[0] * t[1])], [t[2] * np.sqrt(t[0] * t[1]), t[1]]]))


@settings(max_examples=40, deadline=None)
@given(A=spd, xi=st.tuples(st.floats(-10, 10), st.floats(-10, 10)), s=st.floats(1e-3, 1e3))
def test_ellipsoidal_properties(A, xi, s):
    a = an.Ellipsoidal(A)
    xi = np.array(xi)
    if np.linalg.norm(xi) < 1e-6:
        return
    H = a.value(xi)
    assert a.value(s * xi) == pytest.approx(s * H, rel=1e-12)
    assert a.value(-xi) == pytest.approx(H, rel=1e-12)
    assert np.dot(a.gradient(xi), xi) == pytest.approx(H, rel=1e-12)
    assert np.linalg.norm(a.hessian(xi) @ xi) <= 1e-10 * np.linalg.norm(a.hessian(xi)) * np.linalg.norm(xi) + 1e-14
    # convexity: the Hessian is positive semidefinite
    assert np.linalg.eigvalsh(a.hessian(xi)).min() >= -1e-10 * np.abs(a.hessian(xi)).max()
