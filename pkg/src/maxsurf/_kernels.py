"""Hot loops of the mesh code.

Every kernel has a numba version and a pure-numpy version with identical
semantics.  ``MAXSURF_NUMBA=0`` (or numba missing) selects numpy.
"""
from __future__ import annotations

import numpy as np

from ._config import use_numba

try:  # pragma: no cover - import guard
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False


# ---------------------------------------------------------------- numpy


def _inner(u, v):
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] - np.sum(u[..., 2:] * v[..., 2:], axis=-1)


def log_spacelike_np(x, y):
    """Log map at x towards spacelike-separated y (batched).

    Returns (vectors, ok) where ok is False for non-spacelike chords.
    """
    s = _inner(x, y)
    ok = s < -1.0
    d = np.arccosh(np.maximum(-s, 1.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        fac = np.where(d > 1e-8, d / np.sinh(d), 1.0)
    return (y + s[..., None] * x) * fac[..., None], ok


def _cot(u, v):
    uv = _inner(u, v)
    det = _inner(u, u) * _inner(v, v) - uv * uv
    with np.errstate(invalid="ignore", divide="ignore"):
        return uv / np.sqrt(det), det


def star_stencil_np(x, y, deg):
    """Cotangent tension, vertex mass and Gram health of 1-ring stars.

    x: (R, d) centers; y: (R, D, d) neighbors in cyclic order, padded;
    deg: (R,) ring sizes.  Star triangle i is (x, y_i, y_{i+1 mod deg}).
    Returns tension (R, d), mass (R,), min_eig (R,) and diag (R,), where
    min_eig is the smallest eigenvalue of the star triangles' Gram matrices
    at x (-inf if some chord is not spacelike) and diag the sum of the
    cotangent weights, the diagonal of the stencil.
    """
    n_r, n_d, dim = y.shape
    idx = np.arange(n_d)
    valid = idx[None, :] < deg[:, None]
    nxt = np.where(idx[None, :] + 1 < deg[:, None], idx[None, :] + 1, 0)
    yb = y
    yc = np.take_along_axis(y, nxt[:, :, None], axis=1)
    xp = np.broadcast_to(x[:, None, :], y.shape)

    lb, ok1 = log_spacelike_np(xp, yb)  # at x towards b
    lc, ok2 = log_spacelike_np(xp, yc)
    bp, ok3 = log_spacelike_np(yb, xp)  # at b
    bc, ok4 = log_spacelike_np(yb, yc)
    cp, _ = log_spacelike_np(yc, xp)  # at c
    cb, _ = log_spacelike_np(yc, yb)
    ok = ok1 & ok2 & ok3 & ok4

    cot_b, _ = _cot(bp, bc)
    cot_c, _ = _cot(cp, cb)
    g11 = _inner(lb, lb)
    g22 = _inner(lc, lc)
    g12 = _inner(lb, lc)
    det = g11 * g22 - g12 * g12
    tr = g11 + g22
    lam = 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4 * det, 0.0)))
    area = 0.5 * np.sqrt(np.maximum(det, 0.0))

    w = valid.astype(float)
    contrib = 0.5 * (cot_c[..., None] * lb + cot_b[..., None] * lc)
    contrib = np.where(valid[..., None], contrib, 0.0)
    tension = contrib.sum(axis=1)
    mass = (w * area).sum(axis=1) / 3.0
    lam = np.where(valid, lam, np.inf)
    bad = (valid & ~ok).any(axis=1)
    min_eig = np.where(bad, -np.inf, lam.min(axis=1))
    diag = np.where(valid, 0.5 * (cot_b + cot_c), 0.0).sum(axis=1)
    return tension, mass, min_eig, diag


def _plane_np(a, b):
    t1 = a / np.sqrt(_inner(a, a))[..., None]
    b = b - _inner(b, t1)[..., None] * t1
    t2 = b / np.sqrt(_inner(b, b))[..., None]
    return t1, t2


def fit_frames_np(x, y, deg, ring, iters=30, tol=1e-13):
    """Tangent frames and quadratic coefficients of vertex neighborhoods.

    The log vectors of the neighbors y (padded to deg) split into tangent
    coordinates (a, b) and a normal part c; c ~ l1 a + l2 b + q_aa a^2 +
    q_ab ab + q_bb b^2 is fitted by least squares and the frame absorbs
    (l1, l2) until the linear part vanishes.  The starting frame uses
    neighbors 0 and ring // 4 (ring = 1-ring size, neighbors in cyclic
    order first).  Returns t1, t2, q (R, 3, d) and status (R,): 0 ok,
    1 rank-deficient, 2 non-space-like chord.
    """
    n_r, n_d, dim = y.shape
    valid = np.arange(n_d)[None, :] < deg[:, None]
    logs, ok = log_spacelike_np(np.broadcast_to(x[:, None, :], y.shape), y)
    status = np.where((valid & ~ok).any(axis=1), 2, 0)
    logs = np.where(valid[..., None], logs, 0.0)
    quarter = np.maximum(ring // 4, 1)
    t1, t2 = _plane_np(logs[:, 0], logs[np.arange(n_r), quarter])
    w = valid.astype(float)
    coef = np.zeros((n_r, 5, dim))
    for _ in range(iters):
        a = _inner(logs, t1[:, None, :])
        b = _inner(logs, t2[:, None, :])
        c = logs - a[..., None] * t1[:, None, :] - b[..., None] * t2[:, None, :]
        scale = np.sqrt(np.sum(a * a * w, axis=1) / deg)
        sc = np.stack([scale, scale, scale**2, scale**2, scale**2], axis=-1)
        design = np.stack([a, b, a * a, a * b, b * b], axis=-1) * w[..., None] / sc[:, None, :]
        gram = np.einsum("rdi,rdj->rij", design, design)
        rhs = np.einsum("rdi,rdk->rik", design, c * w[..., None])
        finite = np.isfinite(gram).all(axis=(1, 2)) & np.isfinite(rhs).all(axis=(1, 2))
        gram[~finite] = np.eye(5)
        rhs[~finite] = 0.0
        ev = np.linalg.eigvalsh(gram)
        bad = (ev[:, 0] <= 1e-12 * ev[:, -1]) | ~finite
        status = np.where((status == 0) & bad, 1, status)
        gram[bad] = np.eye(5)
        coef = np.linalg.solve(gram, rhs) / sc[..., None]
        l1, l2 = coef[:, 0], coef[:, 1]
        t1, t2 = _plane_np(t1 + l1, t2 + l2)
        # keep the frame tangent to the quadric
        t1, t2 = _plane_np(t1 + _inner(t1, x)[:, None] * x, t2 + _inner(t2, x)[:, None] * x)
        if max(np.abs(l1).max(), np.abs(l2).max()) < tol:
            break
    return t1, t2, coef[:, 2:], status


# ---------------------------------------------------------------- numba

if _HAVE_NUMBA:

    @numba.njit(cache=True, fastmath=False)
    def _ip(u, v):
        s = u[0] * v[0] + u[1] * v[1]
        for k in range(2, u.shape[0]):
            s -= u[k] * v[k]
        return s

    @numba.njit(cache=True)
    def _log_into(x, y, out):
        s = _ip(x, y)
        if s >= -1.0:
            d = 0.0
            fac = 1.0
        else:
            d = np.arccosh(-s)
            fac = d / np.sinh(d) if d > 1e-8 else 1.0
        for k in range(x.shape[0]):
            out[k] = (y[k] + s * x[k]) * fac
        return s < -1.0

    @numba.njit(cache=True)
    def star_stencil_nb(x, y, deg):
        n_r, n_d, dim = y.shape
        tension = np.zeros((n_r, dim))
        mass = np.zeros(n_r)
        min_eig = np.full(n_r, np.inf)
        diag = np.zeros(n_r)
        lb = np.empty(dim)
        lc = np.empty(dim)
        bp = np.empty(dim)
        bc = np.empty(dim)
        cp = np.empty(dim)
        cb = np.empty(dim)
        for r in range(n_r):
            bad = False
            for i in range(deg[r]):
                j = i + 1 if i + 1 < deg[r] else 0
                b = y[r, i]
                c = y[r, j]
                ok = _log_into(x[r], b, lb)
                ok &= _log_into(x[r], c, lc)
                ok &= _log_into(b, x[r], bp)
                ok &= _log_into(b, c, bc)
                _log_into(c, x[r], cp)
                _log_into(c, b, cb)
                if not ok:
                    bad = True
                uv = _ip(bp, bc)
                cot_b = uv / np.sqrt(_ip(bp, bp) * _ip(bc, bc) - uv * uv)
                uv = _ip(cp, cb)
                cot_c = uv / np.sqrt(_ip(cp, cp) * _ip(cb, cb) - uv * uv)
                g11 = _ip(lb, lb)
                g22 = _ip(lc, lc)
                g12 = _ip(lb, lc)
                det = g11 * g22 - g12 * g12
                tr = g11 + g22
                lam = 0.5 * (tr - np.sqrt(max(tr * tr - 4 * det, 0.0)))
                if lam < min_eig[r]:
                    min_eig[r] = lam
                mass[r] += 0.5 * np.sqrt(max(det, 0.0)) / 3.0
                diag[r] += 0.5 * (cot_b + cot_c)
                for k in range(dim):
                    tension[r, k] += 0.5 * (cot_c * lb[k] + cot_b * lc[k])
            if bad:
                min_eig[r] = -np.inf
        return tension, mass, min_eig, diag

    @numba.njit(cache=True)
    def _plane_into(a, b, t1, t2):
        na = np.sqrt(_ip(a, a))
        for k in range(a.shape[0]):
            t1[k] = a[k] / na
        ab = _ip(b, t1)
        for k in range(a.shape[0]):
            t2[k] = b[k] - ab * t1[k]
        nb = np.sqrt(_ip(t2, t2))
        for k in range(a.shape[0]):
            t2[k] /= nb

    @numba.njit(cache=True)
    def fit_frames_nb(x, y, deg, ring, iters=30, tol=1e-13):
        n_r, n_d, dim = y.shape
        t1 = np.zeros((n_r, dim))
        t2 = np.zeros((n_r, dim))
        q = np.zeros((n_r, 3, dim))
        status = np.zeros(n_r, dtype=np.int64)
        logs = np.zeros((n_d, dim))
        a = np.zeros(n_d)
        b = np.zeros(n_d)
        design = np.zeros((n_d, 5))
        c = np.zeros((n_d, dim))
        u = np.empty(dim)
        v = np.empty(dim)
        for r in range(n_r):
            m = deg[r]
            for i in range(m):
                if not _log_into(x[r], y[r, i], logs[i]):
                    status[r] = 2
            quarter = max(ring[r] // 4, 1)
            _plane_into(logs[0], logs[quarter], t1[r], t2[r])
            for _ in range(iters):
                s2 = 0.0
                for i in range(m):
                    a[i] = _ip(logs[i], t1[r])
                    b[i] = _ip(logs[i], t2[r])
                    s2 += a[i] * a[i]
                    for k in range(dim):
                        c[i, k] = logs[i, k] - a[i] * t1[r, k] - b[i] * t2[r, k]
                sc = np.sqrt(s2 / m)
                sc2 = sc * sc
                for i in range(m):
                    design[i, 0] = a[i] / sc
                    design[i, 1] = b[i] / sc
                    design[i, 2] = a[i] * a[i] / sc2
                    design[i, 3] = a[i] * b[i] / sc2
                    design[i, 4] = b[i] * b[i] / sc2
                gram = design[:m].T @ design[:m]
                rhs = design[:m].T @ c[:m]
                if not (np.all(np.isfinite(gram)) and np.all(np.isfinite(rhs))):
                    if status[r] == 0:
                        status[r] = 1
                    break
                ev = np.linalg.eigvalsh(gram)
                if ev[0] <= 1e-12 * ev[-1]:
                    if status[r] == 0:
                        status[r] = 1
                    break
                coef = np.linalg.solve(gram, rhs)
                lmax = 0.0
                for k in range(dim):
                    coef[0, k] /= sc
                    coef[1, k] /= sc
                    for j in range(2, 5):
                        coef[j, k] /= sc2
                    lmax = max(lmax, abs(coef[0, k]), abs(coef[1, k]))
                for k in range(dim):
                    u[k] = t1[r, k] + coef[0, k]
                    v[k] = t2[r, k] + coef[1, k]
                _plane_into(u, v, t1[r], t2[r])
                s1 = _ip(t1[r], x[r])
                s2b = _ip(t2[r], x[r])
                for k in range(dim):
                    u[k] = t1[r, k] + s1 * x[r, k]
                    v[k] = t2[r, k] + s2b * x[r, k]
                _plane_into(u, v, t1[r], t2[r])
                for j in range(3):
                    for k in range(dim):
                        q[r, j, k] = coef[2 + j, k]
                if lmax < tol:
                    break
        return t1, t2, q, status



def star_stencil(x, y, deg):
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    deg = np.ascontiguousarray(deg, dtype=np.int64)
    if _HAVE_NUMBA and use_numba():
        return star_stencil_nb(x, y, deg)
    return star_stencil_np(x, y, deg)


def fit_frames(x, y, deg, ring, iters=30, tol=1e-13):
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    deg = np.ascontiguousarray(deg, dtype=np.int64)
    ring = np.ascontiguousarray(ring, dtype=np.int64)
    if _HAVE_NUMBA and use_numba():
        return fit_frames_nb(x, y, deg, ring, iters, tol)
    return fit_frames_np(x, y, deg, ring, iters, tol)


def backend() -> str:
    return "numba" if _HAVE_NUMBA and use_numba() else "numpy"
