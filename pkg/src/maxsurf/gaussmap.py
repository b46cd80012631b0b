"""Gauss map of a space-like mesh into the symmetric space.

A vertex with tangent plane T goes to the involution fixing T (the positive
2-plane) and negating T's q-complement, which is span(x, normals).  The
image is stored at the orbit representatives; the value at any domain
vertex is obtained by acting with its deck matrix.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .eqmesh import EquivariantMesh, qdot, vertex_frames
from .errors import DegeneracyError, InputError, NoLogarithmError
from .indefinite import signature_matrix
from .symspace import act, kappa_g, positive_frame, spd_sqrt_pair

__all__ = [
    "GaussImage",
    "sym_from_frames",
    "gauss_map",
    "conformality_defect",
    "conformality_factors",
    "minimality_residual",
    "frame_roundtrip_defect",
    "sym_log_coords",
]


def sym_from_frames(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """Batched involutions fixing span(t1, t2) (q-orthonormal pairs)."""
    dim = t1.shape[-1]
    j = np.diag(signature_matrix(dim))
    proj = (t1[..., :, None] * t1[..., None, :] + t2[..., :, None] * t2[..., None, :]) * j
    return 2.0 * proj - np.eye(dim)


@dataclasses.dataclass
class GaussImage:
    values: np.ndarray  # (R, dim, dim) involutions at the stored vertices
    mesh: EquivariantMesh
    tangents: np.ndarray  # (R, 2, dim) the source frames the values come from

    def at(self, vertex: int) -> np.ndarray:
        """Image of a domain vertex, equivariantly translated."""
        mesh = self.mesh
        return act(mesh.vertex_words[vertex], self.values[mesh.row(vertex)])

    def all_vertices(self) -> np.ndarray:
        mesh = self.mesh
        m = mesh.vertex_words
        minv = _iso_inverse(m)
        return m @ self.values[mesh.stars.row_of] @ minv

    def neighbors(self) -> np.ndarray:
        """(R, D, dim, dim) images of the 1-ring neighbors."""
        mesh = self.mesh
        m = mesh.transports
        return m @ self.values[mesh.stars.nbr] @ _iso_inverse(m)


def _iso_inverse(m: np.ndarray) -> np.ndarray:
    j = np.diag(signature_matrix(m.shape[-1]))
    return np.swapaxes(m, -1, -2) * j[:, None] * j[None, :]


def gauss_map(mesh: EquivariantMesh) -> GaussImage:
    tangents, _ = vertex_frames(mesh)
    return GaussImage(sym_from_frames(tangents[:, 0], tangents[:, 1]), mesh, tangents)


def _to_base(x: np.ndarray) -> np.ndarray:
    """Batched isometries sending the points x to the base point e_3.

    Product of the reflections in (x + e_3)^perp and e_3^perp: the
    transvection along the geodesic from x to e_3.
    """
    dim = x.shape[-1]
    j = np.diag(signature_matrix(dim))
    b = np.zeros(dim)
    b[2] = 1.0
    w = x + b
    ww = qdot(w, w)
    eye = np.eye(dim)
    r1 = eye - 2.0 * (w[..., :, None] * (w * j)[..., None, :]) / ww[..., None, None]
    r2 = eye + 2.0 * np.outer(b, b * j)
    return r2 @ r1


def _centered(frames: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Involutions of the planes m t (frames (..., 2, dim)), built after moving."""
    t = np.einsum("...ij,...kj->...ki", m, frames)
    return sym_from_frames(t[..., 0, :], t[..., 1, :])


def sym_log_coords(s1: np.ndarray, s2: np.ndarray):
    """Logarithm of s2 at s1 in the frame h = (s1 J)^(1/2) (batched).

    Returns (X, h): the tangent vector is h [[0, X], [X^T, 0]] h^-1, and its
    length is sqrt(kappa_g) |X| (Frobenius), so sym distances are
    sqrt(kappa_g) |X| too.
    """
    dim = s1.shape[-1]
    j = np.diag(signature_matrix(dim))
    p1 = s1 * j
    p2 = s2 * j
    h, hi = spd_sqrt_pair(p1)
    rel = hi @ p2 @ hi
    w, v = np.linalg.eigh((rel + np.swapaxes(rel, -1, -2)) / 2.0)
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise NoLogarithmError("relative transvection is not positive definite")
    lg = (v * np.log(w)[..., None, :]) @ np.swapaxes(v, -1, -2)
    return 0.5 * lg[..., :2, 2:], h


def _lengths2(a, b, c):
    """Squared X-distances of the edges bc, ca, ab."""
    k = kappa_g()
    out = []
    for s, t in ((b, c), (c, a), (a, b)):
        x, _ = sym_log_coords(s, t)
        out.append(k * np.sum(x * x, axis=(-1, -2)))
    return out


def _gram_from_lengths(l_bc, l_ca, l_ab):
    """Flat Gram of the edges (ab, ac) at a from squared edge lengths."""
    g = np.empty(np.shape(l_ab) + (2, 2))
    g[..., 0, 0] = l_ab
    g[..., 1, 1] = l_ca
    g[..., 0, 1] = g[..., 1, 0] = 0.5 * (l_ab + l_ca - l_bc)
    return g


def _mesh_lengths2(pos, tris, m):
    """Squared geodesic edge lengths, from chords of the moved triangles."""
    a, b, c = (np.einsum("tij,tj->ti", m, pos[tris[:, i]]) for i in range(3))
    out = []
    for s, t in ((b, c), (c, a), (a, b)):
        u = s - t
        d = 2.0 * np.arcsinh(0.5 * np.sqrt(np.maximum(qdot(u, u), 0.0)))
        out.append(d * d)
    return out


def conformality_factors(mesh: EquivariantMesh, image: GaussImage):
    """Per-triangle (defect, factor) comparing source and image Grams.

    Both Grams are flat Grams built from squared geodesic edge lengths.
    With mu1 <= mu2 the generalized eigenvalues of the image Gram against
    the source Gram, the defect is 1 - mu1/mu2 and the factor (mu1 + mu2)/2.
    """
    tris = mesh.domain.triangles
    pos = mesh.positions()
    # frames at every domain vertex, moved so the triangle's first vertex sits
    # at the base point before the involutions are formed (keeps entries O(1))
    fr = np.einsum("vij,vkj->vki", mesh.vertex_words, image.tangents[mesh.stars.row_of])
    m = _to_base(pos[tris[:, 0]])
    imgs = [_centered(fr[tris[:, i]], m) for i in range(3)]
    g = _gram_from_lengths(*_mesh_lengths2(pos, tris, m))
    k = _gram_from_lengths(*_lengths2(*imgs))
    det_g = np.linalg.det(g)
    if np.any(det_g <= 0):
        raise DegeneracyError("degenerate source triangle")
    det_k = np.linalg.det(k)
    if np.any(det_k <= 1e-14 * np.trace(k, axis1=1, axis2=2) ** 2):
        raise DegeneracyError("degenerate image triangle")
    # eigenvalues of g^-1 k from its trace and determinant
    ginv = np.linalg.inv(g)
    m = ginv @ k
    tr = np.trace(m, axis1=1, axis2=2)
    det = det_k / det_g
    disc = np.sqrt(np.maximum(tr * tr - 4 * det, 0.0))
    mu2 = 0.5 * (tr + disc)
    mu1 = det / mu2
    return 1.0 - mu1 / mu2, 0.5 * (mu1 + mu2)


def conformality_defect(mesh: EquivariantMesh, image: GaussImage) -> float:
    defect, _ = conformality_factors(mesh, image)
    return float(defect.max())


def minimality_residual(image: GaussImage, per_vertex: bool = False):
    """Normal part of the discrete tension of the Gauss image in X.

    Per stored vertex: the cotangent-weighted sum of the logarithms towards
    the 1-ring images, with cotangents and masses of the flat triangles
    given by the image's own edge lengths (the recipe of the mean curvature
    stencil), divided by the mass.  The tangent plane of the image is the
    principal 2-plane of the neighbor logarithms; the residual is the
    largest normal length.
    """
    mesh = image.mesh
    stars = mesh.stars
    n_r, n_d = stars.nbr.shape
    m = _to_base(mesh.x)
    center = _centered(image.tangents, m)
    nb_frames = np.einsum("rdij,rdkj->rdki", mesh.transports, image.tangents[stars.nbr])
    nb = _centered(nb_frames, m[:, None])
    s0 = np.broadcast_to(center[:, None], nb.shape)
    idx = np.arange(n_d)
    valid = idx[None, :] < stars.deg[:, None]
    nb = np.where(valid[..., None, None], nb, s0)  # padding: zero logs
    x, _ = sym_log_coords(s0, nb)  # (R, D, 2, n+1)
    x = x.reshape(n_r, n_d, -1)
    k = kappa_g()
    nxt = np.where(idx[None, :] + 1 < stars.deg[:, None], idx[None, :] + 1, 0)
    nb_c = np.take_along_axis(nb, nxt[:, :, None, None], axis=1)
    xc = np.take_along_axis(x, nxt[:, :, None], axis=1)
    l_ab = k * np.sum(x * x, axis=-1)
    l_ac = k * np.sum(xc * xc, axis=-1)
    bc, _ = sym_log_coords(nb[valid], nb_c[valid])
    l_bc = np.zeros_like(l_ab)
    l_bc[valid] = k * np.sum(bc * bc, axis=(-1, -2))
    area4 = np.sqrt(np.maximum(4 * l_ab * l_ac - (l_ab + l_ac - l_bc) ** 2, 0.0))  # 4 * area
    with np.errstate(divide="ignore", invalid="ignore"):
        cot_b = (l_ab + l_bc - l_ac) / area4
        cot_c = (l_ac + l_bc - l_ab) / area4
    if np.any(valid & (area4 <= 0)):
        raise DegeneracyError("degenerate image triangle")
    with np.errstate(invalid="ignore"):  # padded slots are masked below
        contrib = 0.5 * (cot_c[..., None] * x + cot_b[..., None] * xc)
    tension = np.where(valid[..., None], contrib, 0.0).sum(axis=1)
    mass = np.where(valid, area4 / 4.0, 0.0).sum(axis=1) / 3.0
    out = np.zeros(n_r)
    for r in range(n_r):
        pts = x[r, : stars.deg[r]]
        _, _, vt = np.linalg.svd(pts, full_matrices=False)
        plane = vt[:2]
        t = tension[r]
        normal = t - plane.T @ (plane @ t)
        out[r] = np.sqrt(k) * np.linalg.norm(normal) / mass[r]
    return out if per_vertex else float(out.max())


def frame_roundtrip_defect(mesh: EquivariantMesh, image: GaussImage) -> float:
    """Distance between the image's positive planes and the source tangent planes.

    Compares the q-orthogonal projectors onto both planes; the positive
    plane of each involution is read back through positive_frame (the
    square root of s J), independently of how the involution was built.
    """
    tangents, _ = vertex_frames(mesh)
    dim = mesh.dim
    j = np.diag(signature_matrix(dim))
    t1, t2 = tangents[:, 0], tangents[:, 1]
    proj_src = (t1[:, :, None] * t1[:, None, :] + t2[:, :, None] * t2[:, None, :]) * j
    if image.values.shape != proj_src.shape:
        raise InputError("image does not belong to the mesh")
    proj_img = np.empty_like(proj_src)
    for r, s in enumerate(image.values):
        f1, f2 = positive_frame(s)
        proj_img[r] = (np.outer(f1, f1) + np.outer(f2, f2)) * j
    return float(np.abs(proj_img - proj_src).max())
