"""The symmetric space of SO_0(2, n+1).

A point is a q-orthogonal splitting R^{2,0} + R^{0,n+1}, stored as the
involution s = P+ - P-.  The matrix P = s J is symmetric positive definite
(it equals g g^T for any g moving the base point to s), so logarithms,
square roots and distances go through the eigendecomposition of P.

A tangent vector at s is a Lie algebra element A anticommuting with s; the
geodesic with initial vector A is exp(tA) s exp(-tA) = exp(2tA) s.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from ._config import default_tol, get_context
from .errors import DimensionError, InputError, NoLogarithmError, SignatureError
from .indefinite import inner, orthonormalize, signature_matrix

__all__ = [
    "base_sym",
    "check_sym",
    "check_sym_tangent",
    "sym_from_plane",
    "positive_frame",
    "sym_metric",
    "sym_geodesic",
    "sym_log",
    "sym_distance",
    "rotation_generator",
    "complex_structure",
    "kahler_form",
    "spd_of",
    "kappa_g",
    "curvature_probe",
    "act",
    "spd_geodesic",
    "spd_cone",
    "omega_density",
    "omega_integral",
    "omega_cone",
]


def base_sym(n: int) -> np.ndarray:
    return signature_matrix(n + 3)


def _eig_fn(p: np.ndarray, fn) -> np.ndarray:
    w, v = np.linalg.eigh((p + p.T) / 2.0)
    if w.min() <= 0:
        raise NoLogarithmError("matrix is not positive definite")
    return (v * fn(w)) @ v.T


def spd_of(s: np.ndarray) -> np.ndarray:
    """P = s J, symmetric positive definite for a valid point."""
    j = np.diag(signature_matrix(s.shape[0]))
    return s * j[None, :]


def check_sym(s, tol: float | None = None) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] < 3:
        raise DimensionError(f"bad involution shape {s.shape}")
    tol = default_tol() if tol is None else tol
    scale = max(1.0, float(np.abs(s).max()) ** 2)
    dim = s.shape[0]
    j = signature_matrix(dim)
    if np.abs(s @ s - np.eye(dim)).max() > tol * scale * 10:
        raise InputError("s is not an involution")
    if np.abs(s.T @ j @ s - j).max() > tol * scale * 10:
        raise InputError("s is not a q-isometry")
    if round(float(np.trace(s))) != 2 - (dim - 2):
        raise SignatureError("eigenspaces have the wrong dimensions")
    w = np.linalg.eigvalsh(spd_of(s) + spd_of(s).T)
    if w.min() <= 0:
        raise SignatureError("+1 eigenspace is not positive definite")
    return s


def check_sym_tangent(s, a, tol: float | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != np.shape(s):
        raise InputError("tangent/base dimension mismatch")
    tol = default_tol() if tol is None else tol
    scale = max(1.0, float(np.abs(a).max()) * float(np.abs(s).max()))
    if np.abs(a @ s + s @ a).max() > tol * scale * 10:
        raise InputError("tangent does not anticommute with the base point")
    j = signature_matrix(a.shape[0])
    if np.abs(a.T @ j + j @ a).max() > tol * scale * 10:
        raise InputError("tangent is not in the Lie algebra")
    return a


def sym_from_plane(b1, b2, tol: float | None = None) -> np.ndarray:
    """Involution fixing span(b1, b2) and negating its q-complement."""
    f1, f2 = orthonormalize([b1, b2], (2, 0), tol)
    dim = f1.shape[0]
    j = np.diag(signature_matrix(dim))
    proj = (np.outer(f1, f1) + np.outer(f2, f2)) * j[None, :]
    return 2.0 * proj - np.eye(dim)


def sqrt_spd(s: np.ndarray) -> np.ndarray:
    """P^{1/2}; an element of G carrying the base point to s."""
    return _eig_fn(spd_of(s), np.sqrt)


def positive_frame(s) -> tuple[np.ndarray, np.ndarray]:
    """Oriented q-orthonormal basis of the positive plane of s.

    Orientation is transported from (e1, e2) by P^{1/2}, so it varies
    continuously and equivariantly under the identity component.
    """
    h = sqrt_spd(np.asarray(s, dtype=float))
    return h[:, 0].copy(), h[:, 1].copy()


def act(m: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Isometry action s -> M s M^{-1}."""
    j = np.diag(signature_matrix(m.shape[0]))
    minv = (m.T * j[None, :]) * j[:, None]
    return m @ s @ minv


def kappa_g() -> float:
    ctx = get_context()
    if ctx.kappa_g is None:
        ctx.kappa_g = curvature_probe()
    return ctx.kappa_g


def _raw_metric(a, b) -> float:
    return 0.5 * float(np.sum(a * b.T))


def sym_metric(s, a, b) -> float:
    check_sym_tangent(s, a)
    check_sym_tangent(s, b)
    return kappa_g() * _raw_metric(a, b)


def sym_geodesic(s, a, t: float) -> np.ndarray:
    from scipy.linalg import expm

    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    return expm(t * a) @ s @ expm(-t * a)


def _log_at_base(s1, s2) -> tuple[np.ndarray, np.ndarray]:
    h = sqrt_spd(s1)
    hinv = np.linalg.inv(h)
    p2 = spd_of(s2)
    rel = hinv @ p2 @ hinv.T
    w, v = np.linalg.eigh((rel + rel.T) / 2.0)
    if w.min() <= 1e-300:
        raise NoLogarithmError("relative transvection has no real logarithm")
    return h, (v * np.log(w)) @ v.T


def sym_log(s1, s2) -> np.ndarray:
    """Tangent A at s1 with sym_geodesic(s1, A, 1) = s2."""
    h, lg = _log_at_base(np.asarray(s1, float), np.asarray(s2, float))
    return 0.5 * h @ lg @ np.linalg.inv(h)


def sym_distance(s1, s2) -> float:
    _, lg = _log_at_base(np.asarray(s1, float), np.asarray(s2, float))
    return float(np.sqrt(kappa_g() * 0.5 * np.sum(lg * lg))) / 2.0


def rotation_generator(s) -> np.ndarray:
    """Rotation by +pi/2 of the oriented positive plane, zero on the complement."""
    s = np.asarray(s, dtype=float)
    dim = s.shape[0]
    r0 = np.zeros((dim, dim))
    r0[1, 0] = 1.0
    r0[0, 1] = -1.0
    h = sqrt_spd(s)
    return h @ r0 @ np.linalg.inv(h)


def complex_structure(s, a) -> np.ndarray:
    """J(A) = A rho - rho A: precomposition with the plane rotation.

    On the block form A = [[0, X], [X^T, 0]] at the base point this sends
    X to -r X, so J^2 = -1.
    """
    a = check_sym_tangent(s, a)
    rho = rotation_generator(s)
    return a @ rho - rho @ a


def kahler_form(s, a, b) -> float:
    """omega(A, B) = g(A, J B), so that omega(A, J A) = -g(A, A).

    With this orientation the Toledo invariant of the block-embedded polygon
    holonomy has the same sign as its Euler class.
    """
    return sym_metric(s, a, complex_structure(s, b))


def _unit_boost(dim: int, i: int, k: int) -> np.ndarray:
    a = np.zeros((dim, dim))
    a[i, k] = a[k, i] = 1.0
    return a


def curvature_probe(h: float = 0.5) -> float:
    """Metric scale making the SO(2,1)-block hyperbolic plane curvature -1.

    Two orthogonal unit geodesics of length h from the base point end at
    distance d; in constant curvature -k^2 the law of cosines gives
    cosh(k d) = cosh(k h)^2.  Solving for k with the unnormalized trace
    metric yields the scale k^2.
    """
    dim = 3
    s = base_sym(0)
    a = _unit_boost(dim, 0, 2)
    b = _unit_boost(dim, 1, 2)
    x = sym_geodesic(s, a, h)
    y = sym_geodesic(s, b, h)
    _, lg = _log_at_base(x, y)
    d = float(np.sqrt(0.5 * np.sum(lg * lg))) / 2.0

    def f(k):
        return np.cosh(k * d) - np.cosh(k * h) ** 2

    k = brentq(f, 0.1, 10.0, xtol=1e-14)
    return float(k * k)


# Batched routines in the positive-definite picture P = s J.  All arrays carry
# leading batch axes; used by the Toledo quadrature and the Gauss-map stencils.

def _sym_eig(p):
    w, v = np.linalg.eigh((p + np.swapaxes(p, -1, -2)) / 2.0)
    return w, v


def _apply(w, v, fn):
    return (v * fn(w)[..., None, :]) @ np.swapaxes(v, -1, -2)


def spd_sqrt_pair(p):
    """(P^{1/2}, P^{-1/2}) for a stack of SPD matrices."""
    w, v = _sym_eig(p)
    return _apply(w, v, np.sqrt), _apply(w, v, lambda x: 1.0 / np.sqrt(x))


def spd_geodesic(p1, p2, t):
    """Point at parameter t on the geodesic from p1 to p2 (broadcasting t)."""
    h, hi = spd_sqrt_pair(p1)
    rel = hi @ p2 @ hi
    w, v = _sym_eig(rel)
    t = np.asarray(t, dtype=float)[..., None]
    mid = (v * np.exp(t * np.log(w))[..., None, :]) @ np.swapaxes(v, -1, -2)
    return h @ mid @ h


def spd_cone(pc, pa, pb, sigma, tau):
    """geo(pc, geo(pa, pb, tau), sigma): coning of the edge ab from apex c."""
    edge = spd_geodesic(pa, pb, tau)
    return spd_geodesic(pc, edge, sigma)


def omega_density(p, dp_u, dp_v, kappa: float | None = None):
    """omega(F_u, F_v) for a map F into the space, given P and its partials.

    With s = P J the tangent Lie element of a velocity ds is A = ds s / 2;
    then omega(A, B) = kappa/2 tr(A J(B)) with J(B) = B rho - rho B.
    """
    dim = p.shape[-1]
    j = np.diag(signature_matrix(dim))
    s = p * j
    a = 0.5 * (dp_u * j) @ s
    b = 0.5 * (dp_v * j) @ s
    h, hi = spd_sqrt_pair(p)
    r0 = np.zeros((dim, dim))
    r0[1, 0] = 1.0
    r0[0, 1] = -1.0
    # h is in G, so h^{-1} = J h J (h symmetric)
    rho = h @ r0 @ hi
    jb = b @ rho - rho @ b
    k = kappa_g() if kappa is None else kappa
    return 0.5 * k * np.einsum("...ij,...ji->...", a, jb)


def omega_integral(param, order: int = 6, fd: float = 1e-5) -> float:
    """Integral of omega over a map of the unit square.

    ``param(x, y)`` maps batched square coordinates to P matrices.  Partials
    by central differences, tensor Gauss-Legendre rule.
    """
    x, wx = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    wx = 0.5 * wx
    a, b = np.meshgrid(x, x, indexing="ij")
    u = a.ravel()
    v = b.ravel()
    wts = (wx[:, None] * wx[None, :]).ravel()
    pu = (param(u + fd, v) - param(u - fd, v)) / (2 * fd)
    pv = (param(u, v + fd) - param(u, v - fd)) / (2 * fd)
    dens = omega_density(param(u, v), pu, pv)
    return float(np.dot(wts, dens))


def omega_cone(pa, pb, pc, order: int = 6) -> float:
    """Integral of omega over the cone from apex pc on the geodesic edge ab.

    The cone is oriented like the triangle (a, b, c).
    """
    return omega_integral(lambda sg, tu: spd_cone(pc, pa, pb, sg, tu), order)
