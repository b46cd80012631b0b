"""Maximal surface solver and causal diagnostics between equivariant surfaces.

The solver ascends the discrete area along the mean curvature vector.  The
causal tools compare two surfaces through B(u, v) = <u, v>, whose maximum
over coherent lifts measures how far apart they sit in the time direction.
"""
from __future__ import annotations

import dataclasses
import itertools
from typing import Callable, Sequence

import numpy as np

from .eqmesh import (
    EquivariantMesh,
    _fit,
    _normal_part,
    _retract,
    build_mesh,
    mean_curvature_all,
    qdot,
    refine,
)
from .domain import reduce_word, word_inverse
from .errors import ChordError, InputError, SolverStallError, StencilError, WindowError
from .pseudohyp import ChordClass, classify_pair
from .surface_rep import Representation

__all__ = [
    "SolveParams",
    "ConvergenceReport",
    "CausalRecord",
    "solve_maximal",
    "residual",
    "causal_gap",
    "record_at",
    "closest_points",
    "surface_distance",
    "aligned_directions",
    "optimal_directions",
    "second_derivative_check",
    "traceless_defect",
    "uniqueness_probe",
    "chart_exp",
    "umbilic_identity_check",
]


# ------------------------------------------------------------------ solver


@dataclasses.dataclass(frozen=True)
class SolveParams:
    max_iters: int = 20000
    residual_tol: float = 1e-8
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    grow: float = 2.0
    max_step: float = 16.0
    min_step: float = 1e-10
    refinement_schedule: tuple = ()
    rng_seed: int = 0

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise InputError("residual_tol must be positive")
        if not 0 < self.shrink < 1:
            raise InputError("shrink factor must lie in (0, 1)")
        if self.max_iters < 0 or self.initial_step <= 0 or self.armijo < 0:
            raise InputError("bad step policy")


@dataclasses.dataclass
class ConvergenceReport:
    iterations: int = 0
    residual_trace: list = dataclasses.field(default_factory=list)
    area_trace: list = dataclasses.field(default_factory=list)
    l2_trace: list = dataclasses.field(default_factory=list)  # sum of mass * |H|^2
    spacelike_trace: list = dataclasses.field(default_factory=list)
    min_gram_eig_trace: list = dataclasses.field(default_factory=list)
    final_residual: float = np.inf
    initial_residual: float = np.inf
    converged: bool = False
    reason: str = ""
    refinements: list = dataclasses.field(default_factory=list)

    def rows(self):
        """Rows (iter, residual, area, min_gram_eig) for the convergence log."""
        return [
            (i + 1, r, a, e)
            for i, (r, a, e) in enumerate(zip(self.residual_trace, self.area_trace, self.min_gram_eig_trace))
        ]


def _state(mesh: EquivariantMesh, x: np.ndarray):
    try:
        h, mass, min_eig = mean_curvature_all(mesh, x)
    except ChordError:
        return None
    if not np.all(np.isfinite(min_eig)) or min_eig.min() <= 0:
        return None
    norm2 = np.maximum(-qdot(h, h), 0.0)
    return h, mass, float(min_eig.min()), float(np.sqrt(norm2.max())), float(mass.sum()), norm2


def _mesh_scale(mesh: EquivariantMesh) -> float:
    y = mesh.neighbors()
    s = qdot(y, mesh.x[:, None, :])
    valid = np.arange(y.shape[1])[None, :] < mesh.stars.deg[:, None]
    d = np.arccosh(np.maximum(-s[valid], 1.0))
    return float(d.min()) ** 2


def _ascend(mesh: EquivariantMesh, params: SolveParams, report: ConvergenceReport, budget: int) -> EquivariantMesh:
    x = mesh.x.copy()
    st = _state(mesh, x)
    if st is None:
        raise ChordError("seed mesh is not space-like")
    h, mass, eig, res, area, norm2 = st
    if report.initial_residual == np.inf:
        report.initial_residual = res
    report.final_residual = res
    scale = _mesh_scale(mesh)
    step = params.initial_step
    used = 0
    while res > params.residual_tol and used < budget:
        # predicted first-order area gain per unit step
        l2 = float(np.sum(mass * norm2))
        slope = scale * l2
        all_timelike_failures = True
        while True:
            trial = _retract(x + (step * scale) * h)
            nst = _state(mesh, trial)
            if nst is not None:
                all_timelike_failures = False
                gain_ok = nst[4] >= area + params.armijo * step * slope - 64 * np.finfo(float).eps * area
                if gain_ok and np.sum(nst[1] * nst[5]) < l2:
                    break
            step *= params.shrink
            if step < params.min_step:
                nst = None
                break
        if nst is None:
            mesh = mesh.copy(x)
            if all_timelike_failures:
                raise SolverStallError("space-likeness lost at the minimal step")
            report.reason = "stagnated"
            return mesh
        x = trial
        h, mass, eig, res, area, norm2 = nst
        used += 1
        report.iterations += 1
        report.residual_trace.append(res)
        report.l2_trace.append(float(np.sum(mass * norm2)))
        report.area_trace.append(area)
        report.spacelike_trace.append(True)
        report.min_gram_eig_trace.append(eig)
        report.final_residual = res
        step = min(step * params.grow, params.max_step)
    if res <= params.residual_tol:
        report.reason = "converged"
    elif used >= budget:
        report.reason = "iteration cap"
    return mesh.copy(x)


def solve_maximal(rep: Representation, seed: EquivariantMesh, params: SolveParams | None = None):
    """Projected gradient ascent of the discrete area.

    Each step moves every stored vertex along its mean curvature vector by
    step * scale, with scale the squared shortest edge of the seed, and
    retracts to the quadric.  A trial is accepted when it is space-like,
    gains area (sufficient increase) and lowers the mass-weighted squared
    residual sum(mass |H|^2); otherwise the step shrinks.  (The max norm has
    no discrete maximum principle under obtuse cotangent weights and can
    refuse every small step.)  After each accepted step it grows again.  The refinement
    schedule subdivides and re-solves.  Returns (mesh, ConvergenceReport).
    """
    params = SolveParams() if params is None else params
    if seed.rep is not rep and any(not np.array_equal(a, b) for a, b in zip(seed.rep.gens, rep.gens)):
        raise InputError("seed mesh belongs to a different representation")
    if not seed.spacelike:
        raise ChordError("seed mesh is not space-like")
    report = ConvergenceReport()
    mesh = _ascend(seed, params, report, params.max_iters)
    report.refinements.append((mesh.domain.refinement, report.iterations))
    for target in params.refinement_schedule:
        while mesh.domain.refinement < target:
            mesh = refine(mesh)
        budget = params.max_iters - report.iterations
        report.reason = ""
        mesh = _ascend(mesh, params, report, budget)
        report.refinements.append((mesh.domain.refinement, report.iterations))
    report.converged = report.final_residual <= params.residual_tol
    if not report.reason:
        report.reason = "converged" if report.converged else "iteration cap"
    return mesh, report


def residual(mesh: EquivariantMesh) -> float:
    """Largest normal length of the mean curvature vector."""
    st = _state(mesh, mesh.x)
    if st is None:
        raise ChordError("mesh is not space-like")
    return st[3]


# ----------------------------------------------------------- causal gap


@dataclasses.dataclass
class CausalRecord:
    u: np.ndarray  # point of S1 (a stored vertex)
    v: np.ndarray  # maximizing point of S2
    u_row: int
    v_word: tuple  # deck translate of S2 containing v
    v_triangle: int  # domain triangle of S2
    v_bary: np.ndarray  # barycentric weights of v in that triangle (projective)
    B: float
    chord: ChordClass
    u_dot: np.ndarray | None = None
    v_dot: np.ndarray | None = None
    second_derivative: tuple | None = None  # (formula, numeric)


def _deck_layers(mesh: EquivariantMesh, window: int):
    """Deck words by adjacency layers, with their layer index.

    Layer 1 holds the copies of the domain touching it, the words
    w_v w_u^-1 for domain vertices u, v in one orbit; layer k composes
    layer k-1 with layer 1.  Copies equal as matrices are merged.
    """
    dom = mesh.domain
    touch = set()
    orbits: dict[int, list] = {}
    for v in range(dom.n_vertices):
        orbits.setdefault(int(dom.rep[v]), []).append(tuple(dom.words[v]))
    for ws in orbits.values():
        for a in ws:
            for b in ws:
                touch.add(reduce_word(a + word_inverse(b)))
    touch.discard(())
    touch = sorted(touch, key=lambda w: (len(w), w))
    scale = max(1.0, max(float(np.abs(m).max()) for m in mesh.rep.gens))
    words, mats, layers, keys = [()], [np.eye(mesh.dim)], [0], set()

    def key(m):
        return tuple(np.round(m.ravel() / (1e-6 * scale * max(1.0, np.abs(m).max()))).astype(np.int64))

    keys.add(key(mats[0]))
    frontier = [((), mats[0])]
    for layer in range(1, window + 1):
        nxt = []
        for w, m in frontier:
            for t in touch:
                wt = reduce_word(w + t)
                mt = mesh.rep.word(wt)
                k = key(mt)
                if k in keys:
                    continue
                keys.add(k)
                words.append(wt)
                mats.append(mt)
                layers.append(layer)
                nxt.append((wt, mt))
        frontier = nxt
    return words, np.array(mats), np.array(layers)


def _translates(mesh: EquivariantMesh, ref: np.ndarray, window: int):
    words, mats, layers = _deck_layers(mesh, window)
    pos = mesh.positions()
    y = np.einsum("wij,vj->wvi", mats, pos)
    # coherent lifts: the sheet of the reference point
    y = np.where((qdot(y, ref) > 0)[..., None], -y, y)
    return words, y, layers


def _tri_max(u: np.ndarray, p: np.ndarray):
    """Maximize <u, w>/sqrt(-q(w)) over w in the cone over a triangle.

    The objective is homogeneous of degree 0 in the barycentric weights, so
    its critical points on each face solve G lam ~ c with G the Gram matrix
    of the face vertices and c their products with u.  The faces are
    enumerated in closed form.  p is (T, 3, dim).
    """
    jm = np.array([1.0, 1.0] + [-1.0] * (p.shape[-1] - 2))
    gram = np.einsum("tid,tjd->tij", p * jm, p)
    c = p @ (jm * u)
    best_val = np.full(len(p), -np.inf)
    best_lam = np.zeros((len(p), 3))
    for face in ((0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)):
        idx = list(face)
        if len(idx) == 1:
            lam = np.zeros((len(p), 3))
            lam[:, idx[0]] = 1.0
        else:
            g = gram[:, idx][:, :, idx]
            with np.errstate(all="ignore"):
                sol = np.linalg.solve(g, c[:, idx, None])[..., 0]
            tot = sol.sum(axis=1, keepdims=True)
            with np.errstate(all="ignore"):
                sol = sol / tot
            lam = np.zeros((len(p), 3))
            lam[:, idx] = sol
            ok = np.all(np.isfinite(sol), axis=1) & np.all(sol > 0, axis=1)
            lam[~ok] = np.nan
        w = np.einsum("ti,tid->td", lam, p)
        m = -qdot(w, w)
        with np.errstate(all="ignore"):
            val = qdot(w, u) / np.sqrt(m)
        val = np.where(np.isfinite(val) & (m > 0), val, -np.inf)
        better = val > best_val
        best_val = np.where(better, val, best_val)
        best_lam[better] = lam[better]
    return best_val, best_lam


def closest_points(points: np.ndarray, s2: EquivariantMesh, ref: np.ndarray, window: int = 2, top: int = 6, only=None):
    """Per point, the maximizer of B over the translated triangles of s2.

    Returns (B, v, word index, triangle, bary, words).  Raises WindowError
    when a maximizer sits in a translate of the outermost adjacency layer; with only
    given (an index, or "argmax") the test applies to that point alone.
    """
    words, y, lengths = _translates(s2, ref, window)
    n_w, n_v = y.shape[:2]
    flat = y.reshape(-1, y.shape[-1])
    dom = s2.domain
    incident = [[] for _ in range(n_v)]
    for t, tri in enumerate(dom.triangles):
        for a in tri:
            incident[int(a)].append(t)
    out_b = np.zeros(len(points))
    out_v = np.zeros_like(points)
    out_w = np.zeros(len(points), dtype=int)
    out_t = np.zeros(len(points), dtype=int)
    out_l = np.zeros((len(points), 3))
    edge = np.zeros(len(points), dtype=bool)
    vals = np.einsum("pd,qd->pq", points * np.array([1.0, 1.0] + [-1.0] * (points.shape[1] - 2)), flat)
    for i, u in enumerate(points):
        # glued copies of one point (corner orbits) each carry part of its
        # star, so count distinct points rather than (word, vertex) pairs
        pool = min(len(flat), 64 * top)
        while True:
            part = np.argpartition(-vals[i], pool - 1)[:pool] if pool < len(flat) else np.arange(len(flat))
            ranked = part[np.argsort(-vals[i][part], kind="stable")]
            order, seen, full = [], [], False
            for k in ranked:
                p = flat[k]
                if not any(np.abs(p - q).max() <= 1e-9 * max(1.0, np.abs(p).max()) for q in seen):
                    if len(seen) == top:
                        full = True
                        break
                    seen.append(p)
                order.append(k)
            if full or pool == len(flat):
                break
            pool = min(len(flat), 4 * pool)
        cand = sorted({(int(k // n_v), t) for k in order for t in incident[int(k % n_v)]})
        wi = np.array([c[0] for c in cand])
        ti = np.array([c[1] for c in cand])
        p = y[wi[:, None], dom.triangles[ti]]
        val, lam = _tri_max(u, p)
        top_val = val.max()
        # the maximizer itself; a glued copy of it (equal up to rounding) in
        # an inner layer keeps it off the window boundary
        k = int(np.argmax(val))
        tied = np.flatnonzero(val >= top_val - 1e-13 * max(1.0, abs(top_val)))
        edge[i] = window > 0 and lengths[wi[tied]].min() >= window
        w = lam[k] @ p[k]
        out_b[i] = val[k]
        out_v[i] = w / np.sqrt(-qdot(w, w))
        out_w[i] = wi[k]
        out_t[i] = ti[k]
        out_l[i] = lam[k]
    check = edge if only is None else edge[[int(np.argmax(out_b)) if only == "argmax" else only]]
    if np.any(check):
        raise WindowError("maximizer on the boundary of the deck window")
    return out_b, out_v, out_w, out_t, out_l, words


def _record(s1, s2, window, max_window, rows):
    ref = s1.positions()[0]
    while True:
        try:
            b, v, wi, ti, lam, words = closest_points(s1.x[rows], s2, ref, window, only="argmax")
            break
        except WindowError:
            if window * 2 > max_window:
                raise
            window *= 2
    i = int(np.argmax(b))
    row = int(rows[i])
    return CausalRecord(
        u=s1.x[row].copy(),
        v=v[i],
        u_row=row,
        v_word=words[wi[i]],
        v_triangle=int(ti[i]),
        v_bary=lam[i],
        B=float(b[i]),
        chord=classify_pair(s1.x[row], v[i]),
    )


def causal_gap(s1: EquivariantMesh, s2: EquivariantMesh, window: int = 2, max_window: int = 4) -> CausalRecord:
    """Maximize B(u, v) = <u, v> over stored vertices u of s1 and points v of s2.

    Lifts follow the sheet of s1's central vertex.  The deck window starts
    at window adjacency layers of copies of the domain and doubles while the maximizer sits on its
    boundary.
    """
    if not (s1.spacelike and s2.spacelike):
        raise ChordError("both surfaces must be space-like")
    return _record(s1, s2, window, max_window, np.arange(len(s1.x)))


def record_at(s1: EquivariantMesh, s2: EquivariantMesh, vertex: int, window: int = 2, max_window: int = 4) -> CausalRecord:
    """CausalRecord for a fixed domain vertex of s1, maximizing over s2 only."""
    return _record(s1, s2, window, max_window, np.array([s1.row(vertex)]))


def surface_distance(s1: EquivariantMesh, s2: EquivariantMesh, window: int = 2, max_window: int = 4) -> float:
    """sup over stored vertices of s1 of the chord length to the closest point of s2.

    The closest point maximizes <u, v>; the chord length is sqrt|q(u - v)|.
    """
    ref = s1.positions()[0]
    while True:
        try:
            _, v, *_ = closest_points(s1.x, s2, ref, window)
            break
        except WindowError:
            if window * 2 > max_window:
                raise
            window *= 2
    d = s1.x - v
    return float(np.sqrt(np.abs(qdot(d, d))).max())


# -------------------------------------------------- second derivative of B


@dataclasses.dataclass
class _Chart:
    x: np.ndarray
    t: np.ndarray  # (2, dim)
    q: np.ndarray  # (3, dim) normal parts of the quadratic coefficients (aa, ab, bb)
    radius: float

    def second_form(self, w: np.ndarray) -> np.ndarray:
        a, b = qdot(w, self.t[0]), qdot(w, self.t[1])
        return 2.0 * (a * a * self.q[0] + a * b * self.q[1] + b * b * self.q[2])

    def point(self, w: np.ndarray, s: float) -> np.ndarray:
        a, b = s * qdot(w, self.t[0]), s * qdot(w, self.t[1])
        c = a * self.t[0] + b * self.t[1] + a * a * self.q[0] + a * b * self.q[1] + b * b * self.q[2]
        return chart_exp(self.x, c)

    def tangent(self, w: np.ndarray) -> np.ndarray:
        v = qdot(w, self.t[0]) * self.t[0] + qdot(w, self.t[1]) * self.t[1]
        return v / np.sqrt(qdot(v, v))


def _chart(mesh: EquivariantMesh, row: int, m: np.ndarray, point: np.ndarray) -> _Chart:
    sl = slice(row, row + 1)
    t1, t2, q = _fit(mesh.x[sl], mesh.fit_points()[sl], mesh.stars.fit_deg[sl], mesh.stars.deg[sl])
    x = m @ mesh.x[row]
    sgn = -1.0 if qdot(x, point) > 0 else 1.0
    x = sgn * x
    t = sgn * np.stack([m @ t1[0], m @ t2[0]])
    qq = sgn * (q[0] @ m.T)
    qq = _normal_part(qq, x, t[0], t[1])
    y = mesh.neighbors()[row][: mesh.stars.deg[row]]
    s = qdot(y, mesh.x[row])
    radius = float(np.arccosh(np.maximum(-s, 1.0)).min())
    return _Chart(x, t, qq, radius)


def _charts(s1: EquivariantMesh, s2: EquivariantMesh, record: CausalRecord):
    c1 = _chart(s1, record.u_row, np.eye(s1.dim), record.u)
    dom = s2.domain
    corner = int(dom.triangles[record.v_triangle][int(np.argmax(record.v_bary))])
    m = s2.rep.word(record.v_word) @ s2.vertex_words[corner]
    c2 = _chart(s2, s2.row(corner), m, record.v)
    return c1, c2


def aligned_directions(s1, s2, record: CausalRecord):
    """u_dot = first frame vector of s1 at u; v_dot its projection to T_v s2."""
    c1, c2 = _charts(s1, s2, record)
    ud = c1.t[0]
    vd = c2.tangent(ud)
    if qdot(ud, vd) < 0:
        vd = -vd
    return ud, vd


def optimal_directions(s1, s2, record: CausalRecord):
    """u_dot along the top eigen-direction of w -> <II1(w, w), v>, v_dot its projection."""
    c1, c2 = _charts(s1, s2, record)
    v = c2.x
    beta = np.array([[qdot(c1.second_form(a + b), v) - qdot(c1.second_form(a), v) - qdot(c1.second_form(b), v) for b in c1.t] for a in c1.t]) / 2.0
    for k in range(2):
        beta[k, k] = qdot(c1.second_form(c1.t[k]), v)
    w, vec = np.linalg.eigh(beta)
    ud = vec[0, -1] * c1.t[0] + vec[1, -1] * c1.t[1]
    vd = c2.tangent(ud)
    if qdot(ud, vd) < 0:
        vd = -vd
    return ud, vd


def traceless_defect(s1: EquivariantMesh, s2: EquivariantMesh, record: CausalRecord) -> float:
    """|trace of w -> <II1(w, w), v>| at the recorded pair."""
    c1, c2 = _charts(s1, s2, record)
    return float(abs(sum(qdot(c1.second_form(t), c2.x) for t in c1.t)))


def second_derivative_check(s1, s2, record: CausalRecord, directions=None, h: float = 1e-2):
    """(formula, numeric) second derivative of B along geodesics of s1 and s2.

    Both are evaluated at u (a stored vertex of s1) and the vertex of the
    recorded s2 triangle with the largest weight.  The formula is
    2<u', v'> + <II1(u', u'), v> + <u, II2(v', v')> + 2B.  The numeric value
    is the central second difference of B along the two geodesics, realized
    in the fitted quadratic charts (normal coordinates to second order,
    which piecewise flat paths are not).
    """
    c1, c2 = _charts(s1, s2, record)
    if directions is None:
        directions = aligned_directions(s1, s2, record)
    ud, vd = (np.asarray(d, dtype=float) for d in directions)
    ud, vd = c1.tangent(ud), c2.tangent(vd)
    if 2 * h > min(c1.radius, c2.radius):
        raise StencilError("finite-difference path leaves the vertex star")
    u0, v0 = c1.x, c2.x
    b0 = qdot(u0, v0)
    formula = 2 * qdot(ud, vd) + qdot(c1.second_form(ud), v0) + qdot(u0, c2.second_form(vd)) + 2 * b0
    bp = qdot(c1.point(ud, h), c2.point(vd, h))
    bm = qdot(c1.point(ud, -h), c2.point(vd, -h))
    numeric = (bp - 2 * b0 + bm) / h**2
    record.u_dot, record.v_dot = ud, vd
    record.second_derivative = (float(formula), float(numeric))
    return float(formula), float(numeric)


# ------------------------------------------------------------ uniqueness


def uniqueness_probe(rep: Representation, k: int, params: SolveParams | None = None, eps: float = 0.05, refinement: int = 2, seeds=None):
    """k x k matrix of sup-inf distances between independently solved surfaces.

    Seed 0 is totally geodesic, the others perturbed by eps with rng seeds
    params.rng_seed + i (or the explicit seeds list).  Rows of runs that do
    not converge are NaN.
    """
    if k < 2:
        raise InputError("k must be at least 2")
    params = SolveParams() if params is None else params
    if seeds is None:
        seeds = [None] + [params.rng_seed + i for i in range(1, k)]
    surfaces, reports = [], []
    for s in seeds[:k]:
        if s is None:
            seed = build_mesh(rep, refinement=refinement)
        else:
            seed = build_mesh(rep, refinement=refinement, seed="perturbed", eps=eps, rng_seed=s)
        try:
            mesh, rpt = solve_maximal(rep, seed, params)
        except SolverStallError:
            mesh, rpt = None, None
        surfaces.append(mesh)
        reports.append(rpt)
    dist = np.full((k, k), np.nan)
    for i, j in itertools.product(range(k), repeat=2):
        if reports[i] is None or not reports[i].converged or reports[j] is None:
            continue
        dist[i, j] = 0.0 if i == j else surface_distance(surfaces[i], surfaces[j])
    return dist


# --------------------------------------------------- umbilic decomposition


_FACT = np.array([float(np.prod(np.arange(1, i + 1))) for i in range(24)])


def _cs(z: float):
    """C(z) = cosh sqrt z, S(z) = sinh sqrt z / sqrt z and S'(z), entire in z."""
    if abs(z) < 1e-2:
        k = np.arange(10)
        zk = z ** k
        c = float(np.sum(zk / _FACT[2 * k]))
        s = float(np.sum(zk / _FACT[2 * k + 1]))
        ds = float(np.sum(k[1:] * zk[:-1] / _FACT[2 * k[1:] + 1]))
        return c, s, ds
    if z > 0:
        r = np.sqrt(z)
        c, s = np.cosh(r), np.sinh(r) / r
    else:
        r = np.sqrt(-z)
        c, s = np.cos(r), np.sin(r) / r
    return c, s, (c - s) / (2 * z)


def chart_exp(p: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Exponential map of the quadric at p applied to the tangent vector c."""
    cz, sz, _ = _cs(float(qdot(c, c)))
    return cz * p + sz * c


def _chart_basis(p: np.ndarray) -> np.ndarray:
    dim = len(p)
    vecs = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        e = e + qdot(e, p) * p
        for b in vecs:
            e = e - qdot(e, b) / qdot(b, b) * b
        nn = qdot(e, e)
        if abs(nn) > 1e-8:
            vecs.append(e / np.sqrt(abs(nn)))
    return np.array(vecs[: dim - 1])


def umbilic_identity_check(p, X: Callable, Y: Callable, h: float = 1e-3, basis=None, check_order: bool = True) -> float:
    """Finite-difference defect of D_X Y = nabla_X Y + <X, Y> p at p.

    The chart is geodesic normal coordinates phi(a) = exp_p(sum a_i e_i).
    X and Y map chart coordinates to coefficient vectors in the coordinate
    basis d_i phi.  D is the flat ambient derivative of the vector field
    along the chart line through p in direction X(0); nabla is computed
    intrinsically (Christoffel symbols vanish at the center of normal
    coordinates) from the derivative of Y's coefficients.  With check_order
    the defect at h/2 must shrink like h^2, else StencilError.
    """
    p = np.asarray(p, dtype=float)
    e = _chart_basis(p) if basis is None else np.asarray(basis, dtype=float)
    sig = qdot(e, e)

    def frame(a):
        c = a @ e
        cz, sz, dsz = _cs(float(qdot(c, c)))
        # d_i phi = 2<c, e_i>(C'(z) p + S'(z) c) + S(z) e_i, C' = S / 2
        return (2 * qdot(c, e))[:, None] * (0.5 * sz * p + dsz * c)[None, :] + sz * e

    def field(f, a):
        return np.asarray(f(a), dtype=float) @ frame(a)

    def defect(step):
        zero = np.zeros(len(e))
        xi = np.asarray(X(zero), dtype=float)
        eta = np.asarray(Y(zero), dtype=float)
        d_amb = (field(Y, step * xi) - field(Y, -step * xi)) / (2 * step)
        d_coef = (np.asarray(Y(step * xi), dtype=float) - np.asarray(Y(-step * xi), dtype=float)) / (2 * step)
        nabla = d_coef @ e
        xy = float(np.sum(xi * eta * sig))
        return float(np.linalg.norm(d_amb - nabla - xy * p))

    d1 = defect(h)
    if check_order:
        d2 = defect(h / 2)
        if h > 0.5 or (d1 > 1e-11 and d1 / max(d2, 1e-300) < 2.0):
            raise StencilError("finite-difference defect is not O(h^2)")
    return d1
