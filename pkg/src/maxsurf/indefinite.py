"""Linear algebra over R^{2,n+1}.

Coordinates 1 and 2 are positive, coordinates 3..n+3 negative.  Vectors are
plain 1-D float arrays of length n+3 and matrices are dense (n+3, n+3) arrays;
``n`` is always recovered from the shape.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ._config import default_tol
from .errors import DegeneracyError, DimensionError, InputError, SignatureError

__all__ = [
    "signature_matrix",
    "q_eval",
    "inner",
    "iso_inverse",
    "is_isometry",
    "is_identity_component",
    "is_lie_element",
    "orthonormalize",
    "dim_of",
    "basis_vector",
    "lie_from_skew",
    "random_isometry",
    "qdot",
]


def signature_matrix(dim: int) -> np.ndarray:
    """J = diag(1, 1, -1, ..., -1) of size ``dim`` (= n+3)."""
    if dim < 3:
        raise DimensionError(f"ambient dimension must be >= 3, got {dim}")
    d = -np.ones(dim)
    d[:2] = 1.0
    return np.diag(d)


def _signs(dim: int) -> np.ndarray:
    s = -np.ones(dim)
    s[:2] = 1.0
    return s


def dim_of(x) -> int:
    x = np.asarray(x)
    return x.shape[-1]


def basis_vector(i: int, dim: int) -> np.ndarray:
    """Standard basis vector e_i with 1-based index, as in the coordinate convention."""
    e = np.zeros(dim)
    e[i - 1] = 1.0
    return e


def q_eval(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] < 3:
        raise DimensionError(f"expected a vector of length n+3 >= 3, got shape {x.shape}")
    return float(x[0] * x[0] + x[1] * x[1] - np.dot(x[2:], x[2:]))


def inner(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.shape[0] < 3:
        raise DimensionError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(x[0] * y[0] + x[1] * y[1] - np.dot(x[2:], y[2:]))


def qdot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Batched inner product over the last axis (no validation)."""
    return x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1] - np.sum(x[..., 2:] * y[..., 2:], axis=-1)


def iso_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse of an isometry, J M^T J (exact for O(2,n+1))."""
    s = _signs(m.shape[-1])
    return (m.swapaxes(-1, -2) * s[..., None, :]) * s[..., :, None]


def _square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] < 3:
        raise DimensionError("matrix too small for R^{2,n+1}")
    return m


def is_isometry(m, tol: float | None = None) -> bool:
    """True iff ||M^T J M - J||_inf <= tol."""
    m = _square(m)
    tol = default_tol() if tol is None else tol
    j = signature_matrix(m.shape[0])
    return float(np.abs(m.T @ j @ m - j).max()) <= tol


def is_identity_component(m, tol: float | None = None) -> bool:
    """Membership in SO_0(2, n+1).

    det(M) = +1 and the upper-left 2x2 block (projection of the image of the
    positive plane onto the positive plane) has positive determinant.
    """
    m = _square(m)
    tol = default_tol() if tol is None else tol
    scale = max(1.0, float(np.abs(m).max()) ** 2)
    if not is_isometry(m, tol * scale):
        raise InputError("matrix is not an isometry of R^{2,n+1}")
    det = np.linalg.det(m)
    return bool(abs(det - 1.0) < 1e-6 and np.linalg.det(m[:2, :2]) > 0)


def is_lie_element(m, tol: float | None = None) -> bool:
    """True iff M^T J + J M = 0 (M in so(2, n+1))."""
    m = _square(m)
    tol = default_tol() if tol is None else tol
    j = signature_matrix(m.shape[0])
    return float(np.abs(m.T @ j + j @ m).max()) <= tol * max(1.0, float(np.abs(m).max()))


def orthonormalize(vectors: Sequence, target_signature: tuple[int, int], tol: float | None = None) -> list[np.ndarray]:
    """Indefinite Gram-Schmidt with pivoting.

    Returns a basis of the same span whose Gram matrix is
    diag(+1,..,+1, -1,..,-1) with ``target_signature = (p, q)`` entries.
    The pivot is the remaining vector of largest |q| after projection, which
    keeps isotropic inputs such as e1+e3 from being selected first.
    """
    tol = default_tol() if tol is None else tol
    vs = [np.array(v, dtype=float) for v in vectors]
    if not vs:
        return []
    dim = vs[0].shape[0]
    if any(v.shape != (dim,) for v in vs):
        raise DimensionError("vectors of mixed dimension")
    p, q = target_signature
    if p + q != len(vs):
        raise SignatureError(f"signature {target_signature} does not match {len(vs)} vectors")
    scale = max(1.0, max(float(np.dot(v, v)) for v in vs))
    remaining = list(vs)
    done: list[np.ndarray] = []
    while remaining:
        norms = [inner(v, v) for v in remaining]
        k = int(np.argmax(np.abs(norms)))
        v = remaining.pop(k)
        nv = norms[k]
        if abs(nv) <= tol * scale:
            raise DegeneracyError(f"degenerate span: pivot {nv:.3e} below tolerance")
        e = v / np.sqrt(abs(nv))
        sign = 1.0 if nv > 0 else -1.0
        done.append(e)
        # remove the e-component: v - <v,e>/<e,e> e
        remaining = [w - (inner(w, e) * sign) * e for w in remaining]
    pos = [e for e in done if inner(e, e) > 0]
    neg = [e for e in done if inner(e, e) < 0]
    if len(pos) != p or len(neg) != q:
        raise SignatureError(f"span has signature ({len(pos)}, {len(neg)}), expected {target_signature}")
    return pos + neg


def lie_from_skew(a: np.ndarray) -> np.ndarray:
    """J A is in so(2, n+1) whenever A is skew-symmetric."""
    return signature_matrix(a.shape[0]) @ a


def random_isometry(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """exp of a random Lie algebra element; always in the identity component."""
    from scipy.linalg import expm

    a = rng.normal(scale=scale, size=(dim, dim))
    return expm(lie_from_skew(a - a.T) / 2.0)
