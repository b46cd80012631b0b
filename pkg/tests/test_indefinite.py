import numpy as np
import pytest
from hypothesis import given, strategies as st

from maxsurf.errors import DegeneracyError, DimensionError, InputError, SignatureError
from maxsurf.indefinite import (
    basis_vector,
    inner,
    is_identity_component,
    is_isometry,
    is_lie_element,
    iso_inverse,
    lie_from_skew,
    orthonormalize,
    q_eval,
    random_isometry,
    signature_matrix,
)


def test_q_eval_examples():
    assert q_eval([1, 0, 0, 0, 0]) == 1
    assert q_eval([0, 0, 1, 0, 0]) == -1
    for n in (1, 2, 5):
        x = np.zeros(n + 3)
        x[:3] = (3, 4, 5)
        assert q_eval(x) == 0


def test_q_eval_dimension_error():
    with pytest.raises(DimensionError):
        q_eval([1.0, 2.0])


def test_inner_examples():
    e = np.eye(5)
    assert inner(e[0], e[2]) == 0
    assert inner(e[2], e[2]) == -1
    x = np.cosh(1) * e[2] + np.sinh(1) * e[3]
    assert inner(x, e[2]) == pytest.approx(-1.5430806348152437, abs=1e-12)
    with pytest.raises(DimensionError):
        inner(e[0], np.zeros(4))


def test_is_isometry_examples():
    assert is_isometry(np.eye(5), 1e-12)
    th = 0.7
    m = np.eye(5)
    m[:2, :2] = [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]
    assert is_isometry(m, 1e-12)
    with pytest.raises(DimensionError):
        is_isometry(np.ones((3, 4)), 1e-9)


def test_scaling_breaks_isometry():
    # a sign flip of a negative coordinate is an isometry (of the non-identity
    # component); a stretch is not
    assert is_isometry(np.diag([1, 1, -1, 1, 1.0]), 1e-12)
    assert not is_identity_component(np.diag([1, 1, -1, 1, 1.0]))
    assert not is_isometry(np.diag([1, 1, 2, 1, 1.0]), 1e-9)


def test_identity_component_examples():
    assert is_identity_component(np.eye(5))
    assert is_identity_component(np.diag([-1, -1, 1, 1, 1.0]))
    assert not is_identity_component(np.diag([1, -1, -1, 1, 1.0]))
    with pytest.raises(InputError):
        is_identity_component(np.diag([1, 1, 2, 1, 1.0]))


def test_orthonormalize_examples():
    e = np.eye(5)
    out = orthonormalize([e[0], e[1]], (2, 0))
    assert np.allclose(out[0], e[0]) and np.allclose(out[1], e[1])
    out = orthonormalize([e[0] + e[2], e[2]], (1, 1))
    gram = np.array([[inner(a, b) for b in out] for a in out])
    assert np.allclose(gram, np.diag([1, -1]), atol=1e-12)
    # same span: the stacked rank stays 2
    assert np.linalg.matrix_rank(np.vstack([out, e[0] + e[2], e[2]]), tol=1e-9) == 2
    with pytest.raises(DegeneracyError):
        orthonormalize([e[0], e[0] + 1e-15 * e[1]], (2, 0))
    with pytest.raises(SignatureError):
        orthonormalize([e[0], e[2]], (2, 0))


def test_inverse_and_lie(rng):
    for n in (0, 1, 3):
        m = random_isometry(n + 3, rng)
        assert np.allclose(iso_inverse(m) @ m, np.eye(n + 3), atol=1e-10)
        assert is_identity_component(m)
        a = rng.normal(size=(n + 3, n + 3))
        assert is_lie_element(lie_from_skew(a - a.T))
        assert not is_lie_element(np.eye(n + 3))


vec = st.lists(st.floats(-5, 5, allow_nan=False), min_size=5, max_size=5).map(np.array)


@given(vec, vec, st.integers(0, 10_000))
def test_isometry_preserves_inner(x, y, seed):
    m = random_isometry(5, np.random.default_rng(seed), scale=0.6)
    scale = max(1.0, np.abs(m).max() ** 2 * np.linalg.norm(x) * np.linalg.norm(y))
    assert abs(inner(m @ x, m @ y) - inner(x, y)) <= 1e-10 * scale * 10


@given(vec, vec)
def test_polarization(x, y):
    assert inner(x, y) == pytest.approx(inner(y, x))
    lhs = q_eval(x + y)
    rhs = q_eval(x) + 2 * inner(x, y) + q_eval(y)
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, np.dot(x, x) + np.dot(y, y))


@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_identity_component_multiplicative(s1, s2):
    a = random_isometry(5, np.random.default_rng(s1))
    b = random_isometry(5, np.random.default_rng(s2))
    rot = np.diag([-1, -1, 1, 1, 1.0])
    assert is_identity_component(a @ rot @ b, tol=1e-7)


@given(st.integers(0, 10_000))
def test_orthonormalize_gram(seed):
    r = np.random.default_rng(seed)
    m = random_isometry(6, r, scale=0.5)
    # images of e1, e2, e3, e4 give a (2,2) subspace in generic position
    cols = [m[:, i] + 0.01 * r.normal(size=6) for i in (0, 2, 1, 3)]
    out = orthonormalize(cols, (2, 2))
    gram = np.array([[inner(a, b) for b in out] for a in out])
    assert np.allclose(gram, np.diag([1, 1, -1, -1]), atol=1e-9)
    assert basis_vector(1, 6)[0] == 1 and signature_matrix(6)[5, 5] == -1
