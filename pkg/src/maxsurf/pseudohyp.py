"""The quadric model of the pseudo-hyperbolic space.

Points live on the double cover {q(x) = -1} in R^{2,n+1}; everything is done
there and the projection to lines happens only at export time.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from ._config import default_tol
from .errors import (
    BranchError,
    CausalityError,
    DegeneracyError,
    DimensionError,
    InputError,
    NoLogarithmError,
    NotTangentError,
)
from .indefinite import inner, q_eval

__all__ = [
    "ChordClass",
    "base_point",
    "check_point",
    "check_tangent",
    "project_to_quadric",
    "project_tangent",
    "classify_pair",
    "geodesic",
    "log_map",
    "parallel_transport",
    "chord_transport",
    "causal_distance",
    "sectional_curvature",
    "curvature_fd",
    "curvature_tensor",
    "endpoints_at_infinity",
]


class ChordClass(str, Enum):
    SPACELIKE = "spacelike"
    LIGHTLIKE = "lightlike"
    TIMELIKE = "timelike"
    COINCIDENT = "coincident"
    ANTIPODAL = "antipodal"


def base_point(n: int) -> np.ndarray:
    """p0 = e3, the reference point of the quadric."""
    p = np.zeros(n + 3)
    p[2] = 1.0
    return p


def check_point(x, tol: float | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    tol = default_tol() if tol is None else tol
    qx = q_eval(x)
    if abs(qx + 1.0) > tol * max(1.0, float(np.dot(x, x))):
        raise InputError(f"point is not on the quadric: q = {qx!r}")
    return x


def check_tangent(p, v, tol: float | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    if v.shape != p.shape:
        raise DimensionError("tangent and base point differ in dimension")
    tol = default_tol() if tol is None else tol
    s = inner(p, v)
    if abs(s) > tol * max(1.0, float(np.linalg.norm(p) * np.linalg.norm(v))):
        raise NotTangentError(f"vector not tangent at base point: <p,v> = {s!r}")
    return v


def project_to_quadric(x) -> np.ndarray:
    """Radial retraction x / sqrt(-q(x)); requires q(x) < 0."""
    x = np.asarray(x, dtype=float)
    qx = q_eval(x)
    if qx >= 0:
        raise InputError("cannot retract a non-negative vector to the quadric")
    return x / np.sqrt(-qx)


def project_tangent(p, v) -> np.ndarray:
    """q-orthogonal projection onto T_p = p^perp (uses q(p) = -1)."""
    return np.asarray(v, dtype=float) + inner(p, v) * np.asarray(p, dtype=float)


def classify_pair(x, y, tol: float | None = None) -> ChordClass:
    """Type of the chord through two points, read off from s = <x, y>.

    s = -1 means coincident only when the points agree; a distinct pair with
    s = -1 spans a light-like line, and symmetrically for s = +1 and x = -y.
    """
    tol = default_tol() if tol is None else tol
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = inner(x, y)
    scale = max(1.0, float(np.linalg.norm(x) * np.linalg.norm(y)))
    band = tol * scale
    if abs(s + 1.0) <= band and np.linalg.norm(x - y) <= np.sqrt(band) * 10:
        return ChordClass.COINCIDENT
    if abs(s - 1.0) <= band and np.linalg.norm(x + y) <= np.sqrt(band) * 10:
        return ChordClass.ANTIPODAL
    if abs(abs(s) - 1.0) <= band:
        return ChordClass.LIGHTLIKE
    return ChordClass.SPACELIKE if abs(s) > 1.0 else ChordClass.TIMELIKE


def geodesic(p, v, t: float, tol: float | None = None) -> np.ndarray:
    """Geodesic through p with unit (or null) initial velocity v."""
    tol = default_tol() if tol is None else tol
    p = np.asarray(p, dtype=float)
    v = check_tangent(p, v, tol=max(tol, 1e-9))
    qv = q_eval(v)
    if abs(qv - 1.0) <= 1e-8:
        return np.cosh(t) * p + np.sinh(t) * v
    if abs(qv + 1.0) <= 1e-8:
        return np.cos(t) * p + np.sin(t) * v
    if abs(qv) <= 1e-8:
        return p + t * v
    raise InputError(f"direction must be unit or null, q(v) = {qv!r}")


def exp_map(p, v) -> np.ndarray:
    """exp_p(v) for arbitrary tangent v (not necessarily unit)."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    qv = q_eval(v)
    if qv > 1e-14:
        r = np.sqrt(qv)
        return np.cosh(r) * p + (np.sinh(r) / r) * v
    if qv < -1e-14:
        r = np.sqrt(-qv)
        return np.cos(r) * p + (np.sin(r) / r) * v
    return p + v


def log_map(p, y, tol: float | None = None) -> np.ndarray:
    """Inverse of the exponential map on the same-sheet branch."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    cls = classify_pair(p, y, tol)
    if cls is ChordClass.COINCIDENT:
        return np.zeros_like(p)
    if cls in (ChordClass.LIGHTLIKE, ChordClass.ANTIPODAL):
        raise NoLogarithmError(f"no logarithm for a {cls.value} pair")
    s = inner(p, y)
    w = y + s * p  # component of y orthogonal to p
    if cls is ChordClass.SPACELIKE:
        if s > 1.0:
            raise BranchError("spacelike pair on the opposite branch of the chord")
        r = np.arccosh(-s)
        return (r / np.sinh(r)) * w
    r = np.arccos(np.clip(-s, -1.0, 1.0))
    return (r / np.sin(r)) * w


def parallel_transport(p, v, w, t: float, tol: float | None = None) -> np.ndarray:
    """Levi-Civita transport of w along geodesic(p, v, .) to time t."""
    p = np.asarray(p, dtype=float)
    v = check_tangent(p, v)
    w = check_tangent(p, w)
    qv = q_eval(v)
    if abs(abs(qv) - 1.0) > 1e-8:
        raise InputError(f"transport direction must be unit, q(v) = {qv!r}")
    eps = 1.0 if qv > 0 else -1.0
    a = inner(w, v) * eps
    w_perp = w - a * v
    if eps > 0:
        vel = np.sinh(t) * p + np.cosh(t) * v
    else:
        vel = -np.sin(t) * p + np.cos(t) * v
    return a * vel + w_perp


def chord_transport(a, b, w) -> np.ndarray:
    """Transport of w in T_a to T_b along the chord geodesic from a to b.

    Composition of two reflections, valid for any causal type of the chord
    (including light-like chords, where log_map is unavailable).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = inner(a, b)
    if abs(1.0 - s) < 1e-14:
        raise NoLogarithmError("chord transport undefined for antipodal pairs")
    return np.asarray(w, dtype=float) + (inner(w, b) / (1.0 - s)) * (a + b)


def curvature_tensor(x, y, z) -> np.ndarray:
    """R(X,Y)Z = -(<Y,Z> X - <X,Z> Y) for the constant curvature -1 metric."""
    return -(inner(y, z) * np.asarray(x, float) - inner(x, z) * np.asarray(y, float))


def _plane_det(v, w) -> float:
    return q_eval(v) * q_eval(w) - inner(v, w) ** 2


def sectional_curvature(p, v, w, tol: float | None = None) -> float:
    p = check_point(p)
    v = check_tangent(p, v)
    w = check_tangent(p, w)
    den = _plane_det(v, w)
    scale = max(1.0, float(np.dot(v, v) * np.dot(w, w)))
    if abs(den) <= (default_tol() if tol is None else tol) * scale:
        raise DegeneracyError("tangent vectors span a degenerate plane")
    return inner(curvature_tensor(v, w, w), v) / den


def curvature_fd(p, v, w, h: float = 1e-3) -> float:
    """Sectional curvature from the holonomy of a small geodesic loop.

    The loop is the geodesic quadrilateral through exp_p(h(+-v +- w)),
    symmetric about p so that odd-order terms cancel.  Transport is along
    chords, so null edges are harmless.  Going around the loop in the
    (v, w) orientation moves Z to Z - area * R(v,w)Z, area = (2h)^2.
    """
    p = check_point(p)
    v = check_tangent(p, v)
    w = check_tangent(p, w)
    den = _plane_det(v, w)
    if abs(den) < 1e-12:
        raise DegeneracyError("tangent vectors span a degenerate plane")
    corners = [exp_map(p, h * (a * v + b * w)) for a, b in ((1, 1), (-1, 1), (-1, -1), (1, -1))]
    path = [p] + corners + [corners[0], p]
    z = w.copy()
    for a, b in zip(path[:-1], path[1:]):
        z = chord_transport(a, b, z)
    delta = z - w
    return -inner(delta, v) / ((2.0 * h) ** 2 * den)


def causal_distance(x, y, tol: float | None = None) -> float:
    cls = classify_pair(x, y, tol)
    if cls not in (ChordClass.TIMELIKE, ChordClass.COINCIDENT):
        raise CausalityError(f"causal distance undefined for a {cls.value} pair")
    return float(np.arccos(np.clip(-inner(x, y), -1.0, 1.0)))


def endpoints_at_infinity(p, v) -> tuple[np.ndarray, np.ndarray]:
    p = check_point(p)
    v = check_tangent(p, v)
    qv = q_eval(v)
    if abs(qv - 1.0) > 1e-8:
        raise InputError("only unit space-like geodesics reach the boundary")
    a = p + v
    b = p - v
    return a / np.linalg.norm(a), b / np.linalg.norm(b)
