"""Equivariant triangulated surfaces in the pseudo-hyperbolic space.

Only one vertex per deck orbit is stored.  The 1-ring of every stored vertex
is rebuilt from the representation: each neighbor is (stored row, word), and
its position is rho(word) applied to that row.  Equivariance is therefore
structural and the gluing residual is zero by construction.

Positions are lifts to the quadric {q = -1}.  Deck elements may map a lift to
the antipodal one (for example compact twists with det -1 act by -1 on the
R^{2,1} block); neighbor lifts are chosen coherently, with <x, y> < 0.
"""
from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from . import _kernels
from .domain import FundamentalDomain, fundamental_domain, word_matrix
from .errors import ChordError, DegeneracyError, FitError, InputError, RefinementNeededError
from .indefinite import iso_inverse, signature_matrix
from .surface_rep import Representation, conjugate_rep, rep_frame, validate_rep

__all__ = [
    "EquivariantMesh",
    "build_mesh",
    "refine",
    "induced_gram",
    "area",
    "mean_curvature",
    "mean_curvature_all",
    "vertex_frames",
    "second_fundamental_form",
    "normal_bundle_invariants",
    "qdot",
]


def qdot(u, v):
    """Batched indefinite inner product over the last axis."""
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] - np.sum(u[..., 2:] * v[..., 2:], axis=-1)


def _retract(x):
    return x / np.sqrt(-qdot(x, x))[..., None]


# ------------------------------------------------------------ star structure


@dataclasses.dataclass
class _Stars:
    rows: np.ndarray  # (R,) domain ids of stored vertices
    row_of: np.ndarray  # (V,) row of each domain vertex's orbit representative
    nbr: np.ndarray  # (R, D) neighbor rows, cyclic order
    nbr_word: list  # nbr_word[r][i] = (u, w): neighbor is F(words[u])^-1 F(words[w]) w's rep
    deg: np.ndarray  # (R,)
    # fitting sets: the 1-ring, widened by the 2-ring for low-degree vertices;
    # entries are chains ((u, w), ...) composed left to right
    fit_nbr: np.ndarray = None  # (R, F)
    fit_chain: list = None
    fit_deg: np.ndarray = None


def _star_structure(dom: FundamentalDomain) -> _Stars:
    """1-rings of the orbit representatives, read off the Fuchsian picture."""
    from .domain import fuchsian_generators

    gens = fuchsian_generators(dom.genus)
    rows = dom.reps
    row_of = np.empty(dom.n_vertices, dtype=int)
    row_index = {int(v): i for i, v in enumerate(rows)}
    for v in range(dom.n_vertices):
        row_of[v] = row_index[int(dom.rep[v])]
    back = [iso_inverse(word_matrix(gens, dom.words[v])) for v in range(dom.n_vertices)]
    found: list[list] = [[] for _ in rows]
    seen = set()
    for tri in dom.triangles:
        for a in range(3):
            for b in range(3):
                if a == b:
                    continue
                u, w = int(tri[a]), int(tri[b])
                if (u, w) in seen:
                    continue
                seen.add((u, w))
                r = row_of[u]
                pt = back[u] @ dom.points[w]
                found[r].append((pt, u, w))
    nbrs, words, degs = [], [], []
    for r, items in enumerate(found):
        center = dom.points[rows[r]]
        uniq: list = []
        for pt, u, w in items:
            if not any(np.abs(pt - q[0]).max() < 1e-8 * max(1.0, np.abs(pt).max()) for q in uniq):
                uniq.append((pt, u, w))
        # cyclic order by angle in a tangent frame at the center
        t1 = np.array([center[2], 0.0, center[0]])
        t1 /= np.sqrt(t1[0] ** 2 - t1[2] ** 2 + t1[1] ** 2)
        t2 = np.cross(center, t1) * np.array([1, 1, -1])
        t2 /= np.sqrt(abs(t2[0] ** 2 + t2[1] ** 2 - t2[2] ** 2))
        ang = []
        for pt, _, _ in uniq:
            x = pt[0] * t1[0] + pt[1] * t1[1] - pt[2] * t1[2]
            y = pt[0] * t2[0] + pt[1] * t2[1] - pt[2] * t2[2]
            ang.append(np.arctan2(y, x))
        order = np.argsort(ang)
        nbrs.append([row_of[uniq[k][2]] for k in order])
        words.append([(uniq[k][1], uniq[k][2]) for k in order])
        degs.append(len(order))
    width = max(degs)
    nbr = np.zeros((len(rows), width), dtype=int)
    for r, lst in enumerate(nbrs):
        nbr[r, : len(lst)] = lst

    fwd = [word_matrix(gens, dom.words[v]) for v in range(dom.n_vertices)]
    fit_rows, fit_chains = [], []
    for r in range(len(rows)):
        chains = [((u, w),) for (u, w) in words[r]]
        pts = [back[u] @ fwd[w] @ dom.points[rows[row_of[w]]] for (u, w) in words[r]]
        if degs[r] < 6:
            center = dom.points[rows[r]]
            for (u, w), base in zip(words[r], list(chains)):
                t = back[u] @ fwd[w]
                r2 = row_of[w]
                for (u2, w2) in words[r2]:
                    pt = t @ back[u2] @ fwd[w2] @ dom.points[rows[row_of[w2]]]
                    tol = 1e-8 * max(1.0, np.abs(pt).max())
                    if np.abs(pt - center).max() < tol or any(np.abs(pt - q).max() < tol for q in pts):
                        continue
                    pts.append(pt)
                    chains.append(((u, w), (u2, w2)))
        fit_chains.append(chains)
        fit_rows.append([row_of[c[-1][1]] for c in chains])
    fwidth = max(len(c) for c in fit_chains)
    fit_nbr = np.zeros((len(rows), fwidth), dtype=int)
    for r, lst in enumerate(fit_rows):
        fit_nbr[r, : len(lst)] = lst
    return _Stars(
        rows=rows,
        row_of=row_of,
        nbr=nbr,
        nbr_word=words,
        deg=np.array(degs),
        fit_nbr=fit_nbr,
        fit_chain=fit_chains,
        fit_deg=np.array([len(c) for c in fit_chains]),
    )


# ------------------------------------------------------------------- mesh


@dataclasses.dataclass
class EquivariantMesh:
    rep: Representation
    domain: FundamentalDomain
    x: np.ndarray  # (R, n+3) positions of the stored orbit representatives
    stars: _Stars
    transports: np.ndarray  # (R, D, dim, dim) deck matrices of the 1-ring neighbors
    vertex_words: np.ndarray  # (V, dim, dim) rho(words[v]) for every domain vertex
    fit_transports: np.ndarray  # (R, F, dim, dim) deck matrices of the fitting sets
    spacelike: bool = True

    @property
    def n(self) -> int:
        return self.rep.n

    @property
    def dim(self) -> int:
        return self.rep.dim

    @property
    def rows(self) -> np.ndarray:
        return self.stars.rows

    def copy(self, x: np.ndarray | None = None) -> "EquivariantMesh":
        new = dataclasses.replace(self, x=(self.x if x is None else np.array(x, dtype=float)))
        new.spacelike = bool(np.all(_stencil(new)[2] > 0))
        return new

    def row(self, vertex: int) -> int:
        return int(self.stars.row_of[vertex])

    def neighbors(self, x: np.ndarray | None = None) -> np.ndarray:
        """(R, D, dim) coherent lifts of the 1-ring neighbors."""
        x = self.x if x is None else x
        y = np.einsum("rdij,rdj->rdi", self.transports, x[self.stars.nbr])
        s = np.where(qdot(y, x[:, None, :]) > 0, -1.0, 1.0)
        return y * s[..., None]

    def fit_points(self, x: np.ndarray | None = None) -> np.ndarray:
        """(R, F, dim) coherent lifts of the fitting sets (1-ring first)."""
        x = self.x if x is None else x
        y = np.einsum("rdij,rdj->rdi", self.fit_transports, x[self.stars.fit_nbr])
        s = np.where(qdot(y, x[:, None, :]) > 0, -1.0, 1.0)
        return y * s[..., None]

    def positions(self) -> np.ndarray:
        """(V, dim) positions of every domain vertex, lifted coherently."""
        y = np.einsum("vij,vj->vi", self.vertex_words, self.x[self.stars.row_of])
        ref = y[0]
        # sweep outwards from the center so each lift agrees with a neighbor
        s = np.where(qdot(y, ref) > 0, -1.0, 1.0)
        return y * s[:, None]

    def transformed(self, m: np.ndarray) -> "EquivariantMesh":
        """The mesh moved by the isometry m (representation conjugated)."""
        rep = conjugate_rep(self.rep, m)
        return _assemble(rep, self.domain, self.x @ m.T, self.stars)


def _assemble(rep: Representation, dom: FundamentalDomain, x: np.ndarray, stars: _Stars | None = None) -> EquivariantMesh:
    stars = _star_structure(dom) if stars is None else stars
    mats = [rep.word(dom.words[v]) for v in range(dom.n_vertices)]
    inv = [iso_inverse(m) for m in mats]
    width = stars.nbr.shape[1]
    trans = np.zeros((len(stars.rows), width, rep.dim, rep.dim))
    for r, lst in enumerate(stars.nbr_word):
        for i, (u, w) in enumerate(lst):
            trans[r, i] = inv[u] @ mats[w]
    ftrans = np.zeros((len(stars.rows), stars.fit_nbr.shape[1], rep.dim, rep.dim))
    for r, chains in enumerate(stars.fit_chain):
        for i, chain in enumerate(chains):
            m = np.eye(rep.dim)
            for u, w in chain:
                m = m @ inv[u] @ mats[w]
            ftrans[r, i] = m
    mesh = EquivariantMesh(rep, dom, np.array(x, dtype=float), stars, trans, np.array(mats), ftrans)
    mesh.spacelike = bool(np.all(_stencil(mesh)[2] > 0))
    return mesh


def _stencil(mesh: EquivariantMesh, x: np.ndarray | None = None):
    x = mesh.x if x is None else x
    return _kernels.star_stencil(x, mesh.neighbors(x), mesh.stars.deg)


# ------------------------------------------------------------ construction


def _block_positions(dom: FundamentalDomain, rows: np.ndarray, dim: int) -> np.ndarray:
    x = np.zeros((len(rows), dim))
    x[:, :3] = dom.points[rows]
    return x


def build_mesh(
    rep: Representation,
    domain: FundamentalDomain | None = None,
    seed: str = "totally_geodesic",
    eps: float = 0.0,
    rng_seed: int = 0,
    refinement: int = 2,
) -> EquivariantMesh:
    """Equivariant mesh for rep on a (refined) fundamental domain.

    seed "totally_geodesic" places vertices on the R^{2,1} block through the
    Fuchsian developing map; "orbit_cone" uses the fan over the orbit of the
    displacement-minimizing point of rep; "perturbed" adds normal noise of
    amplitude eps (uniform per normal coordinate, rng_seed) to the totally
    geodesic seed and retracts to the quadric.  Non-space-like results are
    flagged on the mesh, not rejected.
    """
    validate_rep(rep)
    dom = fundamental_domain(rep.genus, refinement) if domain is None else domain
    if dom.genus != rep.genus:
        raise InputError("representation and domain genus differ")
    stars = _star_structure(dom)
    if seed in ("totally_geodesic", "perturbed"):
        x = _block_positions(dom, stars.rows, rep.dim)
    elif seed == "orbit_cone":
        x = _orbit_cone_positions(rep, dom, stars.rows)
    else:
        raise InputError(f"unknown seed {seed!r}")
    mesh = _assemble(rep, dom, x, stars)
    if seed == "perturbed" and eps > 0:
        rng = np.random.default_rng(rng_seed)
        _, normals = vertex_frames(mesh)
        coef = rng.uniform(-1.0, 1.0, size=(len(stars.rows), rep.n))
        x = _retract(mesh.x + _smooth_normal_field(mesh, coef, eps))
        mesh = mesh.copy(x)
    return mesh


def _smooth_normal_field(mesh: EquivariantMesh, coef: np.ndarray, eps: float) -> np.ndarray:
    """Normal displacement field from per-vertex coefficients, diffused.

    Plain per-vertex noise has slopes of order eps / (triangle height) and
    stops being space-like on fine meshes; diffusing over the 1-ring for
    2 * 4^refinement passes fixes the wavelength in absolute units.  The
    field is rescaled so its largest normal length is eps.
    """
    _, normals = vertex_frames(mesh)
    v = np.einsum("rk,rkd->rd", coef, normals)
    x = mesh.x
    valid = (np.arange(mesh.stars.nbr.shape[1])[None, :] < mesh.stars.deg[:, None]).astype(float)
    t1, t2 = vertex_frames(mesh)[0].transpose(1, 0, 2)
    for _ in range(2 * 4**mesh.domain.refinement):
        y = mesh.neighbors()
        sgn = np.where(qdot(np.einsum("rdij,rdj->rdi", mesh.transports, x[mesh.stars.nbr]), x[:, None, :]) > 0, -1.0, 1.0)
        moved = np.einsum("rdij,rdj->rdi", mesh.transports, v[mesh.stars.nbr]) * sgn[..., None]
        avg = (moved * valid[..., None]).sum(axis=1) / mesh.stars.deg[:, None]
        v = _normal_part(0.5 * (v + avg), x, t1, t2)
    size = np.sqrt(np.maximum(-qdot(v, v), 0.0)).max()
    return v * (eps / size) if size > 0 else v


def _orbit_cone_positions(rep, dom, rows):
    from .surface_rep import fan_parameters

    h = rep_frame(rep)
    p0 = h[:, 2]
    corners = np.array([rep.word(dom.words[v]) @ p0 for v in dom.corners])
    center = _retract(corners.mean(axis=0))
    ks, lam = dom.fan_coordinates()
    n_sides = len(corners)
    out = lam[:, :1] * center + lam[:, 1:2] * corners[ks] + lam[:, 2:3] * corners[(ks + 1) % n_sides]
    # stored rows only; boundary rows are their own representatives
    return _retract(out[rows])


def refine(mesh: EquivariantMesh) -> EquivariantMesh:
    """One barycentric subdivision; new vertices at normalized barycenters."""
    from .domain import subdivide

    dom = subdivide(mesh.domain)
    pos = mesh.positions()
    full = np.zeros((dom.n_vertices, mesh.dim))
    full[: len(pos)] = pos
    for v in range(len(pos), dom.n_vertices):
        full[v] = _retract(pos[list(dom.parents[v])].sum(axis=0))
    stars = _star_structure(dom)
    return _assemble(mesh.rep, dom, full[stars.rows], stars)


# --------------------------------------------------------------- geometry


def _log(x, y):
    v, ok = _kernels.log_spacelike_np(x, y)
    return v, ok


def induced_gram(mesh: EquivariantMesh | None, triangle) -> np.ndarray:
    """Gram matrix of the two edge tangents (log map) at the first vertex.

    triangle is an index into mesh.domain.triangles or a (3, dim) array.
    """
    if isinstance(triangle, (int, np.integer)):
        pts = mesh.positions()[mesh.domain.triangles[triangle]]
    else:
        pts = np.asarray(triangle, dtype=float)
    if pts.shape[0] != 3:
        raise InputError("a triangle has three vertices")
    e, ok = _log(pts[[0, 0]], pts[[1, 2]])
    if not np.all(ok):
        raise ChordError("triangle edge is not space-like")
    g = np.array([[qdot(e[0], e[0]), qdot(e[0], e[1])], [qdot(e[1], e[0]), qdot(e[1], e[1])]])
    if np.linalg.det(g) <= 1e-14 * max(1.0, np.trace(g)) ** 2:
        raise DegeneracyError("degenerate triangle")
    return g


def area(mesh: EquivariantMesh) -> float:
    """Flat-triangle area of the quotient, corners' Grams averaged."""
    _, mass, min_eig, _ = _stencil(mesh)
    if np.any(min_eig <= 0):
        raise ChordError("mesh is not space-like")
    return float(np.sum(mass))


def _orthonormal_plane(a, b):
    t1 = a / np.sqrt(qdot(a, a))[..., None]
    b = b - qdot(b, t1)[..., None] * t1
    t2 = b / np.sqrt(qdot(b, b))[..., None]
    return t1, t2


def _fit(x, y, deg, ring):
    """Tangent frames and quadratic coefficients (see _kernels.fit_frames)."""
    if np.any(deg < 5):
        raise FitError("quadratic fit needs at least five neighbors")
    t1, t2, q, status = _kernels.fit_frames(x, y, deg, ring)
    if np.any(status == 2):
        raise ChordError("non-space-like chord in a star")
    if np.any(status == 1):
        raise FitError("rank-deficient quadratic fit")
    return t1, t2, q


def _normal_basis(x, t1, t2, n: int) -> np.ndarray:
    """(R, n, dim) orthonormal normal frames, oriented with (t1, t2, x)."""
    n_r, dim = x.shape
    cand = np.broadcast_to(np.eye(dim), (n_r, dim, dim)).copy()
    for e, sgn in ((x, -1.0), (t1, 1.0), (t2, 1.0)):
        cand = cand - sgn * qdot(cand, e[:, None, :])[..., None] * e[:, None, :]
    out = np.zeros((n_r, n, dim))
    for k in range(n):
        norms = qdot(cand, cand)
        pick = np.argmin(norms, axis=1)
        v = cand[np.arange(n_r), pick]
        nv = v / np.sqrt(-qdot(v, v))[:, None]
        out[:, k] = nv
        cand = cand + qdot(cand, nv[:, None, :])[..., None] * nv[:, None, :]
    frame = np.concatenate([t1[:, None], t2[:, None], x[:, None], out], axis=1)
    flip = np.linalg.det(frame) < 0
    if n > 0:
        out[flip, -1] *= -1.0
    return out


def vertex_frames(mesh: EquivariantMesh) -> tuple[np.ndarray, np.ndarray]:
    """Tangent (R, 2, dim) and normal (R, n, dim) frames at stored vertices."""
    t1, t2, _ = _fit(mesh.x, mesh.fit_points(), mesh.stars.fit_deg, mesh.stars.deg)
    return np.stack([t1, t2], axis=1), _normal_basis(mesh.x, t1, t2, mesh.n)


def _normal_part(z, x, t1, t2):
    z = z + qdot(z, x)[..., None] * x
    return z - qdot(z, t1)[..., None] * t1 - qdot(z, t2)[..., None] * t2


def mean_curvature_all(mesh: EquivariantMesh, x: np.ndarray | None = None, frames=None):
    """(R, dim) normal parts of the cotangent tension divided by vertex mass.

    For a smooth surface this tends to the trace of the second fundamental
    form.  Returns (H, mass, min_eig).
    """
    x = mesh.x if x is None else x
    tension, mass, min_eig, _ = _kernels.star_stencil(x, mesh.neighbors(x), mesh.stars.deg)
    if frames is None:
        t1, t2, _ = _fit(x, mesh.fit_points(x), mesh.stars.fit_deg, mesh.stars.deg)
    else:
        t1, t2 = frames
    h = _normal_part(tension, x, t1, t2) / mass[:, None]
    return h, mass, min_eig


def mean_curvature(mesh: EquivariantMesh, vertex: int) -> np.ndarray:
    """Normal-valued mean curvature vector at a domain vertex."""
    h, _, min_eig = mean_curvature_all(mesh)
    r = mesh.row(vertex)
    if min_eig[r] <= 0:
        raise ChordError("star of the vertex is not space-like")
    m = mesh.vertex_words[vertex]
    out = m @ h[r]
    pos = mesh.positions()[vertex]
    if qdot(m @ mesh.x[r], pos) > 0:
        out = -out
    return out


def second_fundamental_form(mesh: EquivariantMesh, vertex: int | None = None):
    """II at stored vertices by quadratic fitting in log coordinates.

    With vertex given returns the n symmetric 2x2 matrices in the normal
    frame of vertex_frames; otherwise returns (R, n, 2, 2) together with the
    frames.  The normal-valued form is II(t_i, t_j) = -sum_k II_k[i, j] n_k
    with the convention <n_k, n_k> = -1 absorbed into the components.
    """
    t1, t2, q = _fit(mesh.x, mesh.fit_points(), mesh.stars.fit_deg, mesh.stars.deg)
    normals = _normal_basis(mesh.x, t1, t2, mesh.n)
    vals = np.stack([2.0 * q[:, 0], q[:, 1], 2.0 * q[:, 2]], axis=1)  # (R, 3, dim)
    # component along n_k of v = sum_k c_k n_k is c_k = -<v, n_k>
    comp = -qdot(vals[:, None, :, :], normals[:, :, None, :])  # (R, n, 3)
    mats = np.zeros((len(mesh.rows), mesh.n, 2, 2))
    mats[:, :, 0, 0] = comp[:, :, 0]
    mats[:, :, 0, 1] = mats[:, :, 1, 0] = comp[:, :, 1]
    mats[:, :, 1, 1] = comp[:, :, 2]
    if vertex is None:
        return mats, np.stack([t1, t2], axis=1), normals
    return list(mats[mesh.row(vertex)])


# ---------------------------------------------------- normal bundle data


def _path(dom: FundamentalDomain, start: int, goal: int) -> list[int]:
    adj: dict[int, set] = {}
    for tri in dom.triangles:
        for a in tri:
            for b in tri:
                if a != b:
                    adj.setdefault(int(a), set()).add(int(b))
    prev = {start: -1}
    queue = [start]
    while queue:
        a = queue.pop(0)
        if a == goal:
            break
        for b in sorted(adj[a]):
            if b not in prev:
                prev[b] = a
                queue.append(b)
    out = [goal]
    while out[-1] != start:
        out.append(prev[out[-1]])
    return out[::-1]


def _transport_frame(points, tangents, frame):
    """Move a normal frame along a vertex path (chord transport + projection)."""
    f = frame.copy()
    for k in range(1, len(points)):
        a, b = points[k - 1], points[k]
        s = qdot(a, b)
        f = f + (qdot(f, b) / (1.0 - s))[:, None] * (a + b)[None, :]
        t1, t2 = tangents[k]
        f = _normal_part(f, b, t1, t2)
        g = -np.einsum("id,jd->ij", f * np.array([1, 1] + [-1] * (f.shape[1] - 2)), f)
        w, v = np.linalg.eigh(g)
        f = (v / np.sqrt(w)) @ v.T @ f
    return f


def normal_bundle_invariants(mesh: EquivariantMesh, defect_tol: float = 1e-2) -> dict:
    """w1 bits of the normal bundle per generator, and its degree for n = 2.

    The w1 bit of a generator is the sign of the determinant of the normal
    frame holonomy along a loop representing it (a vertex path from the
    center to a side vertex glued by that generator and on into the
    translated domain).  The degree sums the normal holonomy angles of all
    quotient triangles; it is reported when n = 2 and every bit vanishes.
    """
    dom = mesh.domain
    if dom.refinement < 1:
        raise RefinementNeededError("normal invariants need refinement >= 1")
    if mesh.n < 1:
        raise InputError("no normal bundle for n = 0")
    g = dom.genus
    tangents, normals = vertex_frames(mesh)
    pos = mesh.positions()
    mats = mesh.vertex_words

    def frames_at(v, point):
        r = mesh.row(v)
        m = mats[v]
        sgn = 1.0 if qdot(m @ mesh.x[r], point) < 0 else -1.0
        t = sgn * (tangents[r] @ m.T)
        nn = sgn * (normals[r] @ m.T)
        return t, nn

    center = 0
    bits = []
    for k in range(2 * g):
        handle, is_b = divmod(k, 2)
        side = 4 * handle + (3 if is_b else 2)
        cands = [v for v in range(dom.n_vertices) if dom.side_of[v] == side]
        q = min(cands)
        w = dom.words[q]
        first = _path(dom, center, q)
        second = _path(dom, int(dom.rep[q]), center)
        gm = mesh.rep.word(w)
        pts, tans = [], []
        for v in first:
            pts.append(pos[v])
            tans.append(frames_at(v, pos[v])[0])
        for v in second[1:]:
            p = gm @ pos[v]
            if qdot(p, pts[-1]) > 0:
                p = -p
            t, _ = frames_at(v, pos[v])
            sgn = 1.0 if qdot(gm @ pos[v], p) < 0 else -1.0
            pts.append(p)
            tans.append(sgn * (t @ gm.T))
        _, n0 = frames_at(center, pos[center])
        f_end = _transport_frame(np.array(pts), tans, n0)
        sgn = 1.0 if qdot(gm @ pos[center], pts[-1]) < 0 else -1.0
        target = sgn * (n0 @ gm.T)
        hol = -np.einsum("id,jd->ij", f_end * np.array([1, 1] + [-1] * (mesh.dim - 2)), target)
        bits.append(int(np.linalg.det(hol) < 0))
    out = {"w1": tuple(bits), "degree": None, "defect": None}
    if mesh.n == 2 and not any(bits):
        total = 0.0
        for tri in dom.triangles:
            loop = [int(tri[0]), int(tri[1]), int(tri[2]), int(tri[0])]
            pts = np.array([pos[v] for v in loop])
            tans = [frames_at(v, pos[v])[0] for v in loop]
            _, n0 = frames_at(loop[0], pos[loop[0]])
            f_end = _transport_frame(pts, tans, n0)
            hol = -np.einsum("id,jd->ij", f_end * np.array([1, 1] + [-1] * (mesh.dim - 2)), n0)
            total += np.arctan2(hol[1, 0], hol[0, 0])
        deg = total / (2 * np.pi)
        out["defect"] = float(abs(deg - round(deg)))
        if out["defect"] > defect_tol:
            raise RefinementNeededError(f"normal degree not near an integer: {deg:.4f}")
        out["degree"] = int(round(deg))
    return out
