"""Regular 4g-gon fundamental domains and their barycentric triangulations.

Points of the hyperbolic plane are stored on the hyperboloid model in
R^{2,1} (x1^2 + x2^2 - x3^2 = -1).  Words in the surface group are tuples of
nonzero integers: letter +k is generator k-1 of (a1, b1, ..., ag, bg) and -k
its inverse; the matrix of a word is the left-to-right product.
"""
from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "Word",
    "FundamentalDomain",
    "fundamental_domain",
    "subdivide",
    "word_matrix",
    "word_inverse",
    "reduce_word",
    "polygon_data",
    "side_word",
    "fuchsian_generators",
]

Word = tuple


def _rot(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _boost(d: float) -> np.ndarray:
    c, s = np.cosh(d), np.sinh(d)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def polygon_data(g: int) -> dict:
    """Geometry of the regular 4g-gon with all angles 2pi/4g.

    Side k has its midpoint at angle 2pi k/N (N = 4g) at distance d (the
    inradius); vertex k sits at angle (2k-1)pi/N at distance R, so side k runs
    from vertex k to vertex k+1.
    """
    if g < 2:
        raise InputError("genus must be at least 2")
    n_sides = 4 * g
    alpha = 2.0 * np.pi / n_sides
    d = float(np.arccosh(np.cos(alpha / 2.0) / np.sin(np.pi / n_sides)))
    big_r = float(np.arccosh(1.0 / (np.tan(np.pi / n_sides) * np.tan(alpha / 2.0))))
    ang = (2.0 * np.arange(n_sides) - 1.0) * np.pi / n_sides
    verts = np.stack([np.sinh(big_r) * np.cos(ang), np.sinh(big_r) * np.sin(ang), np.full(n_sides, np.cosh(big_r))], axis=1)
    return {"N": n_sides, "alpha": alpha, "inradius": d, "circumradius": big_r, "vertices": verts}


def _pairing_matrix(g: int, j: int) -> np.ndarray:
    """Isometry taking side j onto side j+2 with reversed orientation (j % 4 in {0, 1})."""
    n_sides = 4 * g
    d = polygon_data(g)["inradius"]
    th = lambda k: 2.0 * np.pi * k / n_sides
    return _rot(th(j + 2)) @ _boost(d) @ _rot(np.pi) @ _boost(-d) @ _rot(-th(j))


def fuchsian_generators(g: int) -> list[np.ndarray]:
    """(A_1, B_1, ..., A_g, B_g) with A_i = P_{4i}^{-1}, B_i = P_{4i+1}.

    With this labeling the product of commutators A B A^-1 B^-1 over
    ascending i is the identity.
    """
    j3 = np.diag([1.0, 1.0, -1.0])
    gens = []
    for i in range(g):
        p0 = _pairing_matrix(g, 4 * i)
        gens.append(j3 @ p0.T @ j3)
        gens.append(_pairing_matrix(g, 4 * i + 1))
    return gens


def side_word(g: int, j: int) -> Word:
    """Word of the element mapping side j onto its partner side."""
    n_sides = 4 * g
    j %= n_sides
    i, r = divmod(j, 4)
    a, b = 2 * i + 1, 2 * i + 2
    return {0: (-a,), 1: (b,), 2: (a,), 3: (-b,)}[r]


def partner_side(g: int, j: int) -> int:
    n_sides = 4 * g
    return (j + 2) % n_sides if j % 4 in (0, 1) else (j - 2) % n_sides


def word_inverse(w: Sequence[int]) -> Word:
    return tuple(-x for x in reversed(w))


def reduce_word(w: Sequence[int]) -> Word:
    out: list[int] = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(int(x))
    return tuple(out)


def word_matrix(gens: Sequence[np.ndarray], w: Sequence[int], inverses: Sequence[np.ndarray] | None = None) -> np.ndarray:
    dim = gens[0].shape[0]
    if inverses is None:
        j = -np.ones(dim)
        j[:2] = 1.0
        inverses = [(m.T * j[None, :]) * j[:, None] for m in gens]
    # right to left: corner words grow by prepending, so the partial
    # products are ancestors in the search and stay moderate in size
    out = np.eye(dim)
    for x in reversed(w):
        out = (gens[x - 1] if x > 0 else inverses[-x - 1]) @ out
    return out


@dataclasses.dataclass
class FundamentalDomain:
    genus: int
    refinement: int
    points: np.ndarray  # (V, 3) hyperboloid coordinates
    triangles: np.ndarray  # (T, 3) vertex ids, counter-clockwise
    corners: np.ndarray  # (4g,) vertex ids of the polygon corners
    side_of: np.ndarray  # (V,) side index of a non-corner boundary vertex, -1 otherwise
    rep: np.ndarray  # (V,) orbit representative of each vertex
    words: list  # words[v]: point(v) = F(words[v]) point(rep[v])
    side_pairings: list  # (side j, partner side, word)
    fan: np.ndarray  # (T,) index k of the fan triangle (center, corner k, corner k+1) containing each triangle
    parents: list | None = None  # parent vertex ids of each vertex from the last subdivision

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def boundary(self) -> np.ndarray:
        return (self.side_of >= 0) | np.isin(np.arange(self.n_vertices), self.corners)

    @property
    def reps(self) -> np.ndarray:
        """Sorted ids of orbit representatives (the stored degrees of freedom)."""
        return np.flatnonzero(self.rep == np.arange(self.n_vertices))

    def fan_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Projective barycentric coordinates with respect to the fan.

        For every vertex returns the index k of a fan triangle
        (center, corner k, corner k+1) containing it and weights lam >= 0,
        summing to 1, with point proportional to the weighted sum of the
        three fan vertices' hyperboloid coordinates.
        """
        n_sides = 4 * self.genus
        ks = -np.ones(self.n_vertices, dtype=int)
        for t, tri in enumerate(self.triangles):
            for v in tri:
                if ks[v] < 0:
                    ks[v] = self.fan[t]
        lam = np.zeros((self.n_vertices, 3))
        ctr = self.points[0]
        for v in range(self.n_vertices):
            k = ks[v]
            basis = np.stack([ctr, self.points[self.corners[k]], self.points[self.corners[(k + 1) % n_sides]]], axis=1)
            w = np.linalg.solve(basis, self.points[v])
            w = np.where(np.abs(w) < 1e-14, 0.0, w)
            lam[v] = w / w.sum()
        return ks, lam


def _normalize(x: np.ndarray) -> np.ndarray:
    q = x[..., 0] ** 2 + x[..., 1] ** 2 - x[..., 2] ** 2
    return x / np.sqrt(-q)[..., None]


def _fan(g: int) -> FundamentalDomain:
    data = polygon_data(g)
    n_sides = data["N"]
    pts = np.vstack([[0.0, 0.0, 1.0], data["vertices"]])
    corners = np.arange(1, n_sides + 1)
    tris = np.array([[0, 1 + k, 1 + (k + 1) % n_sides] for k in range(n_sides)])
    dom = FundamentalDomain(
        genus=g,
        refinement=0,
        points=pts,
        triangles=tris,
        corners=corners,
        side_of=-np.ones(len(pts), dtype=int),
        rep=np.arange(len(pts)),
        words=[() for _ in range(len(pts))],
        side_pairings=[(j, partner_side(g, j), side_word(g, j)) for j in range(n_sides)],
        fan=np.arange(n_sides),
    )
    _assign_orbits(dom)
    return dom


def _corner_words(g: int) -> list[Word]:
    """words[k] with vertex k = F(words[k]) vertex 0, found by breadth-first search.

    The pairing of side j (j % 4 in {0, 1}) sends vertex j to vertex j+3 and
    vertex j+1 to vertex j+2.
    """
    n_sides = 4 * g
    edges: dict[int, list[tuple[int, Word]]] = {k: [] for k in range(n_sides)}
    for j in range(n_sides):
        if j % 4 not in (0, 1):
            continue
        w = side_word(g, j)
        for a, b in ((j, j + 3), (j + 1, j + 2)):
            a %= n_sides
            b %= n_sides
            edges[a].append((b, w))
            edges[b].append((a, word_inverse(w)))
    words: dict[int, Word] = {0: ()}
    queue = [0]
    while queue:
        a = queue.pop(0)
        for b, w in edges[a]:
            if b not in words:
                words[b] = reduce_word(w + words[a])
                queue.append(b)
    return [words[k] for k in range(n_sides)]


def _assign_orbits(dom: FundamentalDomain) -> None:
    """Fill rep/words for corners and side vertices by matching coordinates."""
    g = dom.genus
    n_sides = 4 * g
    gens = fuchsian_generators(g)
    cw = _corner_words(g)
    c0 = dom.corners[0]
    for k, v in enumerate(dom.corners):
        dom.rep[v] = c0
        dom.words[v] = cw[k]
    for j in range(n_sides):
        if j % 4 not in (2, 3):
            continue
        src = partner_side(g, j)  # side j-2; its vertices are the representatives
        w = side_word(g, src)
        m = word_matrix(gens, w)
        ids_src = np.flatnonzero(dom.side_of == src)
        ids_dst = np.flatnonzero(dom.side_of == j)
        if len(ids_src) != len(ids_dst):
            raise RuntimeError("paired sides carry different vertex counts")
        if len(ids_src) == 0:
            continue
        img = dom.points[ids_src] @ m.T
        for a, x in zip(ids_src, img):
            dist = np.abs(dom.points[ids_dst] - x).max(axis=1)
            b = ids_dst[int(np.argmin(dist))]
            if dist.min() > 1e-8 * max(1.0, np.abs(x).max()):
                raise RuntimeError("side pairing does not match subdivided vertices")
            dom.rep[b] = a
            dom.words[b] = w


def subdivide(dom: FundamentalDomain) -> FundamentalDomain:
    """One barycentric subdivision (each triangle splits into six).

    Existing vertex ids are preserved; edge midpoints and face centers are
    appended, placed at the normalized sums of their parents' coordinates
    (projective barycenters, which commute with the isometry action).
    """
    pts = [p for p in dom.points]
    parents: list[tuple[int, ...]] = [(v,) for v in range(dom.n_vertices)]
    side_of = list(dom.side_of)
    corner_side = {}
    n_sides = 4 * dom.genus
    for k, v in enumerate(dom.corners):
        corner_side[int(v)] = k  # corner k starts side k and ends side k-1

    def edge_side(a: int, b: int) -> int:
        sa = {side_of[a]} if side_of[a] >= 0 else set()
        sb = {side_of[b]} if side_of[b] >= 0 else set()
        if a in corner_side:
            sa = {corner_side[a], (corner_side[a] - 1) % n_sides}
        if b in corner_side:
            sb = {corner_side[b], (corner_side[b] - 1) % n_sides}
        common = sa & sb
        return common.pop() if len(common) == 1 else -1

    mid: dict[tuple[int, int], int] = {}
    tris = []
    fan = []
    for t, (a, b, c) in enumerate(dom.triangles):
        ids = []
        for u, v in ((a, b), (b, c), (c, a)):
            key = (min(u, v), max(u, v))
            if key not in mid:
                mid[key] = len(pts)
                pts.append(_normalize(dom.points[u] + dom.points[v]))
                parents.append(key)
                side_of.append(edge_side(int(u), int(v)))
            ids.append(mid[key])
        m_ab, m_bc, m_ca = ids
        ctr = len(pts)
        pts.append(_normalize(dom.points[a] + dom.points[b] + dom.points[c]))
        parents.append((int(a), int(b), int(c)))
        side_of.append(-1)
        for tri in ((a, m_ab, ctr), (m_ab, b, ctr), (b, m_bc, ctr), (m_bc, c, ctr), (c, m_ca, ctr), (m_ca, a, ctr)):
            tris.append(tri)
            fan.append(dom.fan[t])
    new = FundamentalDomain(
        genus=dom.genus,
        refinement=dom.refinement + 1,
        points=np.array(pts),
        triangles=np.array(tris, dtype=int),
        corners=dom.corners.copy(),
        side_of=np.array(side_of, dtype=int),
        rep=np.arange(len(pts)),
        words=[() for _ in range(len(pts))],
        side_pairings=list(dom.side_pairings),
        fan=np.array(fan, dtype=int),
        parents=parents,
    )
    _assign_orbits(new)
    return new


def fundamental_domain(g: int, refinement: int = 0) -> FundamentalDomain:
    if refinement < 0:
        raise InputError("refinement must be nonnegative")
    dom = _fan(g)
    for _ in range(refinement):
        dom = subdivide(dom)
    return dom
