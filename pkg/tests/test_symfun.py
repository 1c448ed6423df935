import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from curveflow import symfun
from curveflow.errors import DegenerateEigenvaluesError, DomainError, EigenDecompositionError
from curveflow.sampling import sample_unit_slice
from curveflow.symfun import ConeSpec, SpectralDerivatives, SpeedFunction

from oracles import fd_gradient, fd_hessian, matrix_fun, random_rotation, speed_value

SPEEDS = ["mean", "pow2", "pow3"]
pos = st.floats(0.05, 20.0)


def _f(name):
    return SpeedFunction.parse(name)


def _kind(f):
    return ("mean", 1.0) if f.kind == "mean" else ("power", f.p)


# --- eval / gradient / hessian_form -----------------------------------------


def test_normalization_examples():
    assert symfun.eval(_f("mean"), [1, 1, 1]) == 1.0
    assert symfun.eval(_f("pow2"), [1, 1, 1, 1]) == pytest.approx(1.0, rel=1e-15)
    assert symfun.eval(_f("mean"), [0, 0, 1, 1, 1]) == pytest.approx(3 / 5, rel=1e-15)


def test_descriptor_parsing():
    assert _f("mean").name == "mean"
    assert _f("pow3").p == 3.0
    assert SpeedFunction.parse("pow", p=2.5).p == 2.5
    with pytest.raises(ValueError):
        SpeedFunction.parse("harmonic")
    with pytest.raises(ValueError):
        SpeedFunction("power", 0.5)


def test_domain_violation():
    with pytest.raises(DomainError):
        symfun.eval(_f("pow2"), [1.0, 0.0, 2.0])
    with pytest.raises(DomainError):
        symfun.gradient(_f("pow3"), [1.0, -1.0])
    with pytest.raises(DomainError):
        symfun.eval(_f("mean"), [1.0, np.nan])


def test_gradient_examples():
    np.testing.assert_allclose(symfun.gradient(_f("mean"), [3, -1, 2, 7]), [0.25] * 4)
    np.testing.assert_allclose(symfun.gradient(_f("pow2"), [1, 1]), [0.5, 0.5], rtol=1e-15)
    f = _f("pow2")
    ref = fd_gradient(lambda z: speed_value("power", 2, z), [3.0, 4.0], h=1e-5)
    np.testing.assert_allclose(symfun.gradient(f, [3.0, 4.0]), ref, rtol=1e-7)


def test_hessian_form_examples():
    assert symfun.hessian_form(_f("mean"), [1, 2, 3], [4, -1, 2]) == 0.0
    f = _f("pow2")
    z, v = np.array([1.0, 1.0]), np.array([1.0, -1.0])
    h = 1e-4
    ref = (speed_value("power", 2, z + h * v) - 2 * speed_value("power", 2, z)
           + speed_value("power", 2, z - h * v)) / h ** 2
    assert symfun.hessian_form(f, z, v) == pytest.approx(ref, rel=1e-6)
    for name in SPEEDS:
        z = np.array([0.7, 1.3, 2.0])
        assert abs(symfun.hessian_form(_f(name), z, z)) < 1e-14


@pytest.mark.parametrize("name", SPEEDS)
def test_gradient_and_hessian_match_finite_differences(name):
    f = _f(name)
    kind, p = _kind(f)
    rng = np.random.default_rng(1)
    for _ in range(20):
        z = rng.uniform(0.3, 3.0, 4)
        np.testing.assert_allclose(f.gradient(z), fd_gradient(lambda y: speed_value(kind, p, y), z),
                                   rtol=1e-7, atol=1e-9)
        np.testing.assert_allclose(f.hessian(z), fd_hessian(lambda y: speed_value(kind, p, y), z),
                                   rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("name", SPEEDS)
@given(z=st.lists(pos, min_size=2, max_size=7), lam=st.floats(0.01, 100.0))
def test_homogeneity_euler_symmetry(name, z, lam):
    f = _f(name)
    z = np.array(z)
    fz = f.value(z)
    assert f.value(lam * z) == pytest.approx(lam * fz, rel=1e-12)
    assert f.gradient(z) @ z == pytest.approx(fz, rel=1e-10)
    for perm in itertools.islice(itertools.permutations(range(z.size)), 24):
        assert f.value(z[list(perm)]) == pytest.approx(fz, rel=1e-14)


@pytest.mark.parametrize("name", SPEEDS)
@given(z=st.lists(pos, min_size=2, max_size=6), v=st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_monotone_and_convex(name, z, v):
    f = _f(name)
    z = np.array(z)
    v = np.array(v[: z.size])
    assert np.all(f.gradient(z) > 0)
    scale = f.value(z) / np.linalg.norm(z) ** 2
    assert symfun.hessian_form(f, z, v) >= -1e-10 * (v @ v) * scale


def test_euler_relation_on_cone_samples():
    rng = np.random.default_rng(3)
    for name in SPEEDS:
        f = _f(name)
        cone = ConeSpec("parametric", 0.1, 0.1, 1)
        Z = sample_unit_slice(cone, f, 5, 10_000, rng)
        fz = f.value(Z)
        assert np.all(np.abs(np.sum(f.gradient(Z) * Z, axis=1) - fz) <= 1e-10 * np.abs(fz))


# --- cones -------------------------------------------------------------------


def test_cone_membership():
    f = _f("mean")
    cone = ConeSpec("parametric", eta=0.1, beta=0.5, m=1)
    assert cone.contains(f, [1, 1, 1, 1])
    assert not cone.contains(f, [-0.5, 1, 1, 1])  # min below -eta f
    assert not cone.contains(f, [0.0, 0.05, 1, 1])  # smallest pair below beta f
    assert ConeSpec("full-space").contains(f, [-3.0, 1.0])
    assert not ConeSpec("positive-orthant").contains(f, [0.0, 1.0])
    assert not cone.contains(_f("pow2"), [-0.01, 1, 1, 1])  # outside f's domain


@pytest.mark.parametrize("name", ["mean", "pow2"])
def test_parametric_cone_is_convex(name):
    f = _f(name)
    cone = ConeSpec("parametric", 0.2, 0.3, 1)
    rng = np.random.default_rng(5)
    Z = sample_unit_slice(cone, f, 4, 4000, rng)
    a, b = Z[:2000], Z[2000:]
    t = rng.random((2000, 1))
    assert np.all(cone.contains(f, t * a + (1 - t) * b))


# --- spectral lift -------------------------------------------------------------


def test_spectral_value_examples():
    f = _f("mean")
    assert symfun.spectral_value(f, np.diag([1.0, 5.0, 3.0])) == pytest.approx(3.0)
    R = random_rotation(3, np.random.default_rng(0))
    assert symfun.spectral_value(f, R @ np.diag([1.0, 2.0, 3.0]) @ R.T) == pytest.approx(2.0, rel=1e-14)
    g = _f("pow2")
    rng = np.random.default_rng(1)
    for _ in range(20):
        R = random_rotation(4, rng)
        A = (R * rng.uniform(0.5, 3.0, 4)) @ R.T
        assert symfun.spectral_value(g, A) == pytest.approx(g.value(np.linalg.eigvalsh(A)), rel=1e-13)


def test_spectral_value_basis_invariance():
    rng = np.random.default_rng(11)
    for name in SPEEDS:
        f = _f(name)
        A = symfun.random_spectrum_matrix(f, 5, rng)
        ref = symfun.spectral_value(f, A)
        for _ in range(1000 // len(SPEEDS)):
            R = random_rotation(5, rng)
            assert symfun.spectral_value(f, R @ A @ R.T) == pytest.approx(ref, rel=1e-9)


def test_spectral_value_errors():
    with pytest.raises(EigenDecompositionError):
        symfun.spectral_value(_f("mean"), np.array([[1.0, np.inf], [np.inf, 1.0]]))
    with pytest.raises(DomainError):
        symfun.spectral_value(_f("pow2"), np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        symfun.spectral_value(_f("mean"), np.ones((2, 3)))


def test_storage_is_triangular():
    A = np.array([[2.0, 1.0], [7.0, 3.0]])  # upper entry ignored
    S = np.array([[2.0, 7.0], [7.0, 3.0]])
    shift = 10 * np.eye(2)
    assert symfun.spectral_value(_f("pow2"), A + shift) == pytest.approx(
        symfun.spectral_value(_f("pow2"), S + shift), rel=1e-14)


def test_spectral_gradient_examples():
    np.testing.assert_allclose(symfun.spectral_gradient(_f("mean"), np.diag([1.0, 2.0, 3.0])),
                               np.eye(3) / 3, atol=1e-15)
    g = _f("pow3")
    z = np.array([0.5, 1.0, 2.0, 4.0])
    np.testing.assert_allclose(symfun.spectral_gradient(g, np.diag(z)), np.diag(g.gradient(z)),
                               atol=1e-15)
    rng = np.random.default_rng(2)
    f = _f("pow2")
    G = matrix_fun(f.value)
    for _ in range(50):
        A = symfun.random_spectrum_matrix(f, 4, rng)
        B = rng.standard_normal((4, 4))
        B = (B + B.T) / 2
        h = 1e-5
        fd = (G(A + h * B) - G(A - h * B)) / (2 * h)
        assert np.sum(symfun.spectral_gradient(f, A) * B) == pytest.approx(fd, rel=1e-6)


def test_spectral_hessian_diagonal_direction_reduces():
    for name in SPEEDS:
        f = _f(name)
        z = np.array([0.4, 1.1, 2.5])
        b = np.array([0.3, -1.0, 0.7])
        assert symfun.spectral_hessian_form(f, np.diag(z), np.diag(b)) == pytest.approx(
            symfun.hessian_form(f, z, b), rel=1e-13, abs=1e-15)


def test_spectral_hessian_convex_and_fd():
    rng = np.random.default_rng(4)
    f = _f("pow2")
    G = matrix_fun(f.value)
    for _ in range(200):
        z = np.sort(rng.uniform(0.5, 3.0, 4))
        if np.min(np.diff(z)) < 0.1:
            continue
        B = rng.standard_normal((4, 4))
        B = (B + B.T) / 2
        val = symfun.spectral_hessian_form(f, np.diag(z), B)
        assert val >= -1e-10 * np.sum(B * B) * f.value(z) / np.sum(z * z)
        h = 1e-4
        fd = (G(np.diag(z) + h * B) - 2 * G(np.diag(z)) + G(np.diag(z) - h * B)) / h ** 2
        assert val == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_spectral_hessian_degenerate_gap():
    f = _f("pow3")
    A = np.diag([1.0, 1.0, 2.0])
    B = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(DegenerateEigenvaluesError):
        symfun.spectral_hessian_form(f, A, B, strict=True)
    # the limiting value is continuous in the gap
    limit = symfun.spectral_hessian_form(f, A, B)
    near = symfun.spectral_hessian_form(f, np.diag([1.0, 1.0 + 1e-4, 2.0]), B)
    assert limit == pytest.approx(near, rel=1e-3)


def test_hessian_bilinear_is_symmetric_polarization():
    rng = np.random.default_rng(8)
    f = _f("pow2")
    d = SpectralDerivatives(f, symfun.random_spectrum_matrix(f, 4, rng))
    X, Y = (rng.standard_normal((4, 4)) for _ in range(2))
    X, Y = X + X.T, Y + Y.T
    assert d.hessian_bilinear(X, Y) == pytest.approx(d.hessian_bilinear(Y, X), rel=1e-12)
    assert d.hessian_bilinear(X, X) == pytest.approx(d.hessian_form(X), rel=1e-12)


def test_fd_check_speed_functions():
    for name in SPEEDS:
        g_err, h_err = symfun.fd_check(_f(name), 3, 50, rng=0)
        assert g_err < 1e-5 and h_err < 1e-5


# --- degree-zero bounds and parabolicity ------------------------------------------


def test_degree_zero_examples():
    n = 4
    f = _f("mean")
    cone = ConeSpec("parametric", 0.1, 0.1, 1)
    lo, hi = symfun.check_degree_zero_bounds(lambda Z: f.gradient(Z)[:, 0], cone, f, n, 2000, 0)
    assert lo == pytest.approx(1 / n) and hi == pytest.approx(1 / n)
    lo, hi = symfun.check_degree_zero_bounds(lambda Z: f.value(Z) / f.value(Z), cone, f, n, 2000, 0)
    assert lo == 1.0 and hi == 1.0
    lo, _ = symfun.check_degree_zero_bounds(lambda Z: Z.min(axis=1) / f.value(Z), cone, f, n, 5000, 0)
    assert lo >= -0.1 - 1e-9


def test_degree_zero_reports_infinities():
    f = _f("mean")
    lo, hi = symfun.check_degree_zero_bounds(lambda Z: np.full(len(Z), math.inf),
                                             ConeSpec("full-space"), f, 3, 10, 0)
    assert hi == math.inf


def test_uniform_parabolicity():
    # mean: exactly 1/n; power means with m = 0 and beta > 0: min z >= beta f,
    # so f'_k = (z_k/f)^(p-1)/n >= beta^(p-1)/n
    assert symfun.parabolicity_constant(_f("mean"), ConeSpec("parametric", 0.1, 0.1, 1), 4,
                                        10_000, 0) == pytest.approx(0.25)
    for name in ("pow2", "pow3"):
        f = _f(name)
        c = symfun.parabolicity_constant(f, ConeSpec("parametric", 0.0, 0.2, 0), 4, 10_000, 0)
        assert c >= 0.2 ** (f.p - 1) / 4 - 1e-12
        assert c > 0
