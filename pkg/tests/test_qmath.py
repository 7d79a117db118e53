import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from qotm.qmath import (
    BlochVector,
    HermitianOp2,
    InvalidEffect,
    InvalidState,
    NotPsd,
    QubitPovm,
    born_prob,
    eig_hermitian2,
    post_measurement_mixture,
    principal_sqrt,
    trace_distance,
    trace_product,
)

real = st.floats(-2, 2, allow_nan=False)
unit = st.floats(-1, 1, allow_nan=False)


@st.composite
def hermitian(draw):
    return HermitianOp2(draw(real), draw(real), complex(draw(real), draw(real)))


@st.composite
def density(draw):
    v = np.array([draw(unit), draw(unit), draw(unit)])
    r = np.linalg.norm(v)
    if r > 1:
        v = v / r
    return HermitianOp2.from_bloch(0.5, BlochVector(*(0.5 * v)))


@st.composite
def effect(draw):
    a0 = draw(st.floats(0, 1))
    v = np.array([draw(unit), draw(unit), draw(unit)])
    r = np.linalg.norm(v)
    rmax = min(a0, 1 - a0)
    if r > 0:
        v = v / r * rmax * draw(st.floats(0, 1))
    return HermitianOp2.from_bloch(a0, BlochVector(*v))


def test_pauli_convention():
    m = HermitianOp2.from_bloch(0.25, BlochVector(0.1, 0.2, 0.3)).matrix()
    X = np.array([[0, 1], [1, 0]])
    Y = np.array([[0, -1j], [1j, 0]])
    Z = np.diag([1, -1])
    assert np.allclose(m, 0.25 * np.eye(2) + 0.1 * X + 0.2 * Y + 0.3 * Z)


@given(hermitian())
def test_eigvals_match_numpy(h):
    ref = np.linalg.eigvalsh(h.matrix())
    assert np.allclose(h.eigvals(), ref, atol=1e-10)


@given(hermitian())
def test_eigenvectors_orthonormal_and_correct(h):
    (l0, l1), (e0, e1) = eig_hermitian2(h)
    m = h.matrix()
    assert abs(np.vdot(e0, e1)) < 1e-10
    assert np.isclose(np.linalg.norm(e0), 1) and np.isclose(np.linalg.norm(e1), 1)
    assert np.allclose(m @ e0, l0 * e0, atol=1e-9)
    assert np.allclose(m @ e1, l1 * e1, atol=1e-9)


def test_eigvecs_degenerate_identity():
    (l0, l1), (e0, e1) = eig_hermitian2(HermitianOp2.identity())
    assert l0 == l1 == 1.0
    assert np.allclose(e0, [1, 0]) and np.allclose(e1, [0, 1])


@given(effect())
def test_principal_sqrt_squares_back_and_matches_scipy(e):
    s = principal_sqrt(e)
    assert np.allclose(s.matrix() @ s.matrix(), e.matrix(), atol=1e-9)
    assert np.allclose(s.matrix(), scipy.linalg.sqrtm(e.matrix()), atol=1e-6)
    assert s.is_psd()


def test_sqrt_rejects_negative_and_clamps_round_off():
    with pytest.raises(NotPsd):
        principal_sqrt(HermitianOp2.diag(-0.1, 1.0))
    s = principal_sqrt(HermitianOp2.diag(-1e-12, 1.0))
    assert s.a00 == 0.0


@given(density(), density())
def test_trace_distance_matches_nuclear_norm(a, b):
    ref = 0.5 * np.linalg.norm(a.matrix() - b.matrix(), ord="nuc")
    assert math.isclose(trace_distance(a, b), ref, abs_tol=1e-10)
    assert 0 <= trace_distance(a, b) <= 1 + 1e-12
    assert math.isclose(trace_distance(a, b), trace_distance(b, a), abs_tol=1e-15)


@given(density())
def test_trace_distance_zero_on_self(a):
    assert trace_distance(a, a) == 0


@given(effect(), density())
def test_born_prob_matches_trace(e, rho):
    ref = np.trace(e.matrix() @ rho.matrix()).real
    assert math.isclose(born_prob(e, rho), min(1, max(0, ref)), abs_tol=1e-12)
    assert math.isclose(trace_product(e, rho), ref, abs_tol=1e-12)


def test_born_prob_validation():
    rho = HermitianOp2.diag(1, 0)
    with pytest.raises(InvalidEffect):
        born_prob(HermitianOp2.diag(1.5, 0), rho)
    with pytest.raises(InvalidState):
        born_prob(HermitianOp2.diag(1, 0), HermitianOp2.diag(0.7, 0.7))


def test_povm_validation():
    with pytest.raises(InvalidEffect):
        QubitPovm(HermitianOp2.diag(1, 0), HermitianOp2.diag(0, 0.5))
    QubitPovm.from_effect(HermitianOp2.diag(0.3, 0.9))


@given(effect(), density())
def test_post_measurement_mixture_is_density_and_matches_kraus(e, rho):
    povm = QubitPovm.from_effect(e)
    out = post_measurement_mixture(povm, rho)
    assert out.is_density(tol=1e-8)
    k0 = scipy.linalg.sqrtm(povm.e0.matrix())
    k1 = scipy.linalg.sqrtm(povm.e1.matrix())
    ref = k0 @ rho.matrix() @ k0 + k1 @ rho.matrix() @ k1
    assert np.allclose(out.matrix(), ref, atol=1e-6)


def test_projective_measurement_dephases():
    plus = HermitianOp2.projector([1, 1])
    z = QubitPovm(HermitianOp2.diag(1, 0), HermitianOp2.diag(0, 1))
    assert post_measurement_mixture(z, plus).allclose(HermitianOp2.diag(0.5, 0.5))


@given(hermitian())
def test_bloch_round_trip(h):
    a0, v = h.to_bloch()
    assert HermitianOp2.from_bloch(a0, v).allclose(h, tol=1e-12)
    assert HermitianOp2.from_matrix(h.matrix()).allclose(h)


def test_rejects_non_finite_and_non_hermitian():
    with pytest.raises(ValueError):
        HermitianOp2(float("nan"), 0)
    with pytest.raises(ValueError):
        HermitianOp2.from_matrix([[1, 1], [0, 1]])
