"""Surface-group representations into SO_0(2, n+1) and their invariants.

A representation stores the images of (a1, b1, ..., ag, bg); the relator is
the ascending product of commutators A B A^-1 B^-1.  Representations with
n = 0 are SO_0(2,1)-valued.
"""
from __future__ import annotations

import dataclasses
import json
import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ._config import get_context
from .domain import FundamentalDomain, fuchsian_generators, fundamental_domain, word_matrix
from .errors import (
    AccuracyError,
    CalibrationError,
    DimensionError,
    InputError,
    NumericalLiftError,
    RelatorError,
)
from .indefinite import is_identity_component, is_isometry, iso_inverse, signature_matrix
from .symspace import act, base_sym, omega_cone, spd_cone, spd_of, sqrt_spd

__all__ = [
    "Representation",
    "relator_product",
    "relator_residual",
    "relator_tolerance",
    "validate_rep",
    "fuchsian_rep",
    "trivial_rep",
    "embed_block",
    "twist_rep",
    "conjugate_rep",
    "orientation_reversed",
    "euler_class",
    "lift_angle",
    "toledo",
    "calibrate_toledo",
    "component_count",
]


@dataclasses.dataclass(frozen=True)
class Representation:
    genus: int
    n: int
    gens: tuple  # 2g matrices of size n+3

    def __post_init__(self):
        if self.genus < 2:
            raise InputError("genus must be at least 2")
        if len(self.gens) != 2 * self.genus:
            raise InputError(f"expected {2 * self.genus} generators, got {len(self.gens)}")
        dim = self.n + 3
        gens = tuple(np.array(m, dtype=float) for m in self.gens)
        for m in gens:
            if m.shape != (dim, dim):
                raise DimensionError(f"generator of shape {m.shape}, expected {(dim, dim)}")
            m.setflags(write=False)
        object.__setattr__(self, "gens", gens)

    @property
    def dim(self) -> int:
        return self.n + 3

    @property
    def inverses(self) -> list[np.ndarray]:
        return [iso_inverse(m) for m in self.gens]

    def word(self, w) -> np.ndarray:
        return word_matrix(self.gens, w, self.inverses)

    def to_json(self) -> dict:
        return {"genus": self.genus, "n": self.n, "generators": [m.tolist() for m in self.gens]}

    @classmethod
    def from_json(cls, data: dict) -> "Representation":
        try:
            unknown = set(data) - {"genus", "n", "generators"}
            if unknown:
                raise InputError(f"unknown keys in representation: {sorted(unknown)}")
            return cls(int(data["genus"]), int(data["n"]), tuple(np.asarray(m, dtype=float) for m in data["generators"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed representation: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def relator_product(rep: Representation) -> np.ndarray:
    out = np.eye(rep.dim)
    inv = rep.inverses
    for i in range(rep.genus):
        a, b = rep.gens[2 * i], rep.gens[2 * i + 1]
        out = out @ a @ b @ inv[2 * i] @ inv[2 * i + 1]
    return out


def relator_residual(rep: Representation) -> float:
    return float(np.abs(relator_product(rep) - np.eye(rep.dim)).max())


def relator_tolerance(rep: Representation, floor: float = 1e-8) -> float:
    """Residual attainable in double precision for this word.

    The relator is a product of 4g factors whose norms grow quickly with the
    genus for Fuchsian generators, so rounding of the inputs alone produces a
    residual of order eps * sum_k |prefix_k| |M_k| |suffix_k|.  The validation
    threshold is the larger of ``floor`` and a small multiple of that bound.
    """
    inv = rep.inverses
    mats = []
    for i in range(rep.genus):
        mats += [rep.gens[2 * i], rep.gens[2 * i + 1], inv[2 * i], inv[2 * i + 1]]
    norm = lambda m: float(np.abs(m).sum(axis=1).max())
    prefix = [np.eye(rep.dim)]
    for m in mats:
        prefix.append(prefix[-1] @ m)
    suffix = [np.eye(rep.dim)]
    for m in reversed(mats):
        suffix.append(m @ suffix[-1])
    suffix = suffix[::-1]
    bound = sum(norm(prefix[k]) * norm(mats[k]) * norm(suffix[k + 1]) for k in range(len(mats)))
    return max(floor, 8.0 * np.finfo(float).eps * bound)


def validate_rep(rep: Representation, tol: float | None = None) -> Representation:
    tol = relator_tolerance(rep) if tol is None else tol
    for k, m in enumerate(rep.gens):
        if not is_isometry(m, 1e-8 * max(1.0, float(np.abs(m).max()) ** 2)):
            raise InputError(f"generator {k} is not an isometry")
        if not is_identity_component(m, 1e-8 * max(1.0, float(np.abs(m).max()) ** 2)):
            raise InputError(f"generator {k} is not in the identity component")
    res = relator_residual(rep)
    if res > tol:
        raise RelatorError(f"relator residual {res:.3e} exceeds {tol:.3e}")
    return rep


def fuchsian_rep(g: int) -> Representation:
    """Holonomy of the regular 4g-gon surface (side pairings)."""
    return Representation(g, 0, tuple(fuchsian_generators(g)))


def trivial_rep(g: int, n: int = 0) -> Representation:
    return Representation(g, n, tuple(np.eye(n + 3) for _ in range(2 * g)))


def embed_block(rep: Representation, n: int) -> Representation:
    """A -> blockdiag(A, Id_n) from the SO_0(2,1) block."""
    if rep.n != 0:
        raise InputError("embed_block expects an SO_0(2,1)-valued representation")
    if n < 0:
        raise InputError("n must be nonnegative")
    gens = []
    for m in rep.gens:
        big = np.eye(n + 3)
        big[:3, :3] = m
        gens.append(big)
    return Representation(rep.genus, n, tuple(gens))


def twist_rep(rep: Representation, twist: Sequence[np.ndarray], tol: float | None = None) -> Representation:
    """Multiply by a compact factor acting on the last n coordinates.

    Generator i becomes blockdiag(det(T_i) A_i, T_i).  The sign on the
    SO_0(2,1) block keeps the determinant +1 when T_i reverses orientation;
    it acts trivially on lines, so the projective picture is unchanged.
    """
    n = rep.n - 0 if rep.n else 0
    dim = rep.dim
    k = dim - 3
    if len(twist) != 2 * rep.genus:
        raise InputError(f"expected {2 * rep.genus} twist matrices")
    gens = []
    for m, t in zip(rep.gens, twist):
        t = np.asarray(t, dtype=float)
        if t.shape != (k, k):
            raise DimensionError(f"twist of shape {t.shape}, expected {(k, k)}")
        if np.abs(t.T @ t - np.eye(k)).max() > 1e-9:
            raise InputError("twist matrix is not orthogonal")
        if np.abs(m[:3, 3:]).max(initial=0.0) > 0 or np.abs(m[3:, :3]).max(initial=0.0) > 0:
            raise InputError("twist_rep expects a block-embedded representation")
        sign = float(np.sign(np.linalg.det(t))) if k else 1.0
        big = np.zeros((dim, dim))
        big[:3, :3] = sign * m[:3, :3]
        big[3:, 3:] = t
        gens.append(big)
    out = Representation(rep.genus, rep.n, tuple(gens))
    tol = relator_tolerance(out) if tol is None else tol
    res = relator_residual(out)
    if res > tol:
        raise RelatorError(f"twisted relator residual {res:.3e} exceeds {tol:.3e}")
    return out


def conjugate_rep(rep: Representation, m: np.ndarray) -> Representation:
    minv = iso_inverse(m) if is_isometry(m, 1e-9 * max(1.0, float(np.abs(m).max()) ** 2)) else np.linalg.inv(m)
    return Representation(rep.genus, rep.n, tuple(m @ x @ minv for x in rep.gens))


def orientation_reversed(rep: Representation) -> Representation:
    """Conjugate by diag(1, -1, 1, ..., 1).

    The conjugating matrix lies outside the identity component but the
    conjugates stay inside it; on the circle at infinity it is a reflection,
    so the Euler class changes sign.
    """
    c = np.eye(rep.dim)
    c[1, 1] = -1.0
    return conjugate_rep(rep, c)


# Euler class ------------------------------------------------------------

def _polar(a: np.ndarray) -> tuple[float, np.ndarray]:
    """A = K P with K a rotation of the positive plane (angle theta), P a boost."""
    w, v = np.linalg.eigh(a.T @ a)
    p = (v * np.sqrt(w)) @ v.T
    k = a @ np.linalg.inv(p)
    return float(np.arctan2(k[1, 0], k[0, 0])), p


def _circle_angle(m: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Angle of the image of the isotropic ray (cos phi, sin phi, 1)."""
    y = m @ np.stack([np.cos(phi), np.sin(phi), np.ones_like(phi)])
    return np.arctan2(y[1], y[0])


def _wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


def lift_angle(a: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Canonical lift of the circle action of A to the real line.

    The boost part moves every boundary point by less than pi, so its lift is
    the unique one with displacement in (-pi, pi); the rotation part adds its
    principal angle.  This is the endpoint of the polar-decomposition path.
    """
    theta, p = _polar(a)
    phi = np.asarray(phi, dtype=float)
    moved = phi + _wrap(_circle_angle(p, phi) - phi)
    return moved + theta


def _exact_angle(y) -> float:
    """Angle of the isotropic ray y (exact rationals, y[2] > 0), correctly rounded."""
    return math.atan2(float(y[1] / y[2]), float(y[0] / y[2]))


def euler_class(rep: Representation, samples: int = 7, return_defect: bool = False):
    """Translation number of the lifted relator divided by 2 pi.

    Boundary points are carried as isotropic rays in exact rational
    arithmetic (the float entries are exact rationals), so strongly
    hyperbolic generators do not wash the points out; only the angle read
    off each ray is rounded.  Each factor uses the canonical lift of its
    matrix, whose inverse is the canonical lift of the inverse matrix.

    Sign convention: the holonomy of the regular polygon surface built by
    fuchsian_rep has Euler class +(2g - 2).
    """
    if rep.dim != 3:
        raise InputError("euler_class expects an SO_0(2,1)-valued representation")
    phi0 = np.linspace(0.0, 2 * np.pi, samples, endpoint=False) + 0.1234
    inv = rep.inverses
    # the relator acts on the left of a vector, so the rightmost factor acts first
    seq = []
    for i in range(rep.genus):
        seq += [rep.gens[2 * i], rep.gens[2 * i + 1], inv[2 * i], inv[2 * i + 1]]
    steps = []
    for a in reversed(seq):
        theta, _ = _polar(a)
        steps.append(([[Fraction(float(t)) for t in row] for row in a], theta))
    k = np.empty(samples)
    for s, start in enumerate(phi0):
        phi = float(start)
        y = [Fraction(math.cos(start)), Fraction(math.sin(start)), Fraction(1)]
        for m, theta in steps:
            y = [m[r][0] * y[0] + m[r][1] * y[1] + m[r][2] * y[2] for r in range(3)]
            # boost displacement lies in (-pi, pi); the rotation adds theta
            phi = phi + float(_wrap(_exact_angle(y) - theta - phi)) + theta
        k[s] = (phi - start) / (2 * np.pi)
    if not np.all(np.isfinite(k)):
        raise NumericalLiftError("lifted relator produced non-finite angles")
    e = int(np.round(np.mean(k)))
    defect = float(np.abs(k - e).max())
    if defect > 1e-3:
        raise NumericalLiftError(f"lifted relator is not a translation (defect {defect:.3e})")
    return (e, defect) if return_defect else e


# Toledo invariant ----------------------------------------------------------

def _transvection_log(m: np.ndarray) -> np.ndarray:
    """Half the log of M M^T: the tangent at the base point towards M o.

    Computed from the singular value decomposition of M so that far
    displacements keep their accuracy (forming M M^T would square the
    condition number).
    """
    u, sv, _ = np.linalg.svd(m)
    return (u * np.log(sv)) @ u.T


def rep_frame(rep: Representation, dom: FundamentalDomain | None = None, iters: int = 200, tol: float = 1e-9) -> np.ndarray:
    """h in G such that h o minimizes the displacement energy of the rep.

    The energy is sum_gamma d(x, gamma x)^2 over the generators together with
    the elements joining consecutive polygon corners, minimized by Riemannian
    gradient descent with backtracking.  The descent works on the conjugated
    representation h^-1 rho h at the base point, so every logarithm is taken
    at a moderate distance.  The resulting point is conjugation equivariant.
    """
    from scipy.linalg import expm

    from .domain import reduce_word, word_inverse

    dom = fundamental_domain(rep.genus, 0) if dom is None else dom
    n_sides = 4 * dom.genus
    words = [dom.words[v] for v in dom.corners]
    elems = [rep.word(reduce_word(word_inverse(words[k]) + words[(k + 1) % n_sides])) for k in range(n_sides)]

    jm = signature_matrix(rep.dim)

    def energy_grad(h):
        hi = iso_inverse(h)
        e = 0.0
        grad = np.zeros((rep.dim, rep.dim))
        for m in elems:
            c = hi @ m @ h
            u, sv, _ = np.linalg.svd(c)
            e += float(np.sum(np.log(sv) ** 2))
            grad += (u * np.log(sv)) @ u.T + _transvection_log(iso_inverse(c))
        # keep the step in the symmetric off-block part so h stays in G
        grad = 0.25 * (grad + grad.T - jm @ (grad + grad.T) @ jm)
        return e, grad / (2 * len(elems))

    h = np.eye(rep.dim)
    e, grad = energy_grad(h)
    step = 1.0
    for _ in range(iters):
        norm = float(np.sqrt(0.5 * np.sum(grad * grad)))
        if norm < tol:
            break
        step = min(1.0, 2.0 * step)
        while step > 1e-12:
            trial = h @ expm(grad * step * min(1.0, 0.5 / norm))
            e_new, g_new = energy_grad(trial)
            if e_new < e:
                break
            step *= 0.5
        else:
            break
        h, e, grad = trial, e_new, g_new
    return h


def rep_center(rep: Representation, dom: FundamentalDomain | None = None) -> np.ndarray:
    """The involution h o for h = rep_frame(rep)."""
    return act(rep_frame(rep, dom), base_sym(rep.n))


def _karcher_frame(ms: Sequence[np.ndarray], iters: int = 100, tol: float = 1e-12) -> np.ndarray:
    """h in G with h o the barycenter of the points m o."""
    from scipy.linalg import expm

    jm = signature_matrix(ms[0].shape[0])
    h = np.eye(ms[0].shape[0])
    for _ in range(iters):
        hi = iso_inverse(h)
        step = sum(_transvection_log(hi @ m) for m in ms) / len(ms)
        step = 0.25 * (step + step.T - jm @ (step + step.T) @ jm)
        h = h @ expm(step)
        if np.sqrt(0.5 * np.sum(step * step)) < tol:
            break
    return h


def equivariant_fan_map(rep: Representation, dom: FundamentalDomain, x0: np.ndarray | None = None):
    """Images (as P = s J matrices) of the fan vertices under an equivariant map.

    Corner k goes to rho(w_k) x0 where w_k is the corner's word, so paired
    corners are related by the representation; the center goes to the
    barycenter of the corner images.  x0 defaults to the base point.  The
    result is expressed after the isometry moving the center to the base
    point, so the center is the identity and the corners stay well
    conditioned.  Returns (center, corners).
    """
    if rep.genus != dom.genus:
        raise InputError("representation and domain genus differ")
    lift = np.eye(rep.dim) if x0 is None else sqrt_spd(x0)
    ms = [rep.word(dom.words[v]) @ lift for v in dom.corners]
    hi = iso_inverse(_karcher_frame(ms))
    corners = []
    for m in ms:
        u, sv, _ = np.linalg.svd(hi @ m)
        corners.append((u * sv**2) @ u.T)
    return np.eye(rep.dim), np.array(corners)


def fan_parameters(lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(sigma, tau) cone coordinates from fan barycentrics (center, k, k+1)."""
    lam = np.atleast_2d(lam)
    sigma = 1.0 - lam[:, 0]
    edge = lam[:, 1] + lam[:, 2]
    tau = np.where(edge > 0, lam[:, 2] / np.where(edge > 0, edge, 1.0), 0.0)
    return sigma, tau


def _gauss_square(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    a, b = np.meshgrid(x, x, indexing="ij")
    return a.ravel(), b.ravel(), (w[:, None] * w[None, :]).ravel()


def _omega_batch(fn, u, v, fd=1e-5, kappa=None):
    from .symspace import omega_density

    pu = (fn(u + fd, v) - fn(u - fd, v)) / (2 * fd)
    pv = (fn(u, v + fd) - fn(u, v - fd)) / (2 * fd)
    return omega_density(fn(u, v), pu, pv, kappa)


def _toledo_fan(center, corners, cells: int, order: int) -> float:
    """Sum over fan cones, each (sigma, tau) square split into cells x cells."""
    n_sides = len(corners)
    gu, gv, gw = _gauss_square(order)
    offs = np.arange(cells) / cells
    ou, ov = np.meshgrid(offs, offs, indexing="ij")
    su = (ou.ravel()[:, None] + gu[None, :] / cells).ravel()
    tv = (ov.ravel()[:, None] + gv[None, :] / cells).ravel()
    wts = np.tile(gw, cells * cells) / cells**2
    total = 0.0
    # omega is invariant, so move the center to the identity first
    ci = _inv_sqrt_spd(center)
    pc = np.eye(center.shape[-1])[None]
    for k in range(n_sides):  # fixed order for reproducible sums
        pa = _sym_part(ci @ corners[k] @ ci)[None]
        pb = _sym_part(ci @ corners[(k + 1) % n_sides] @ ci)[None]
        fn = lambda s, t: spd_cone(pc, pa, pb, s, t)
        total += float(np.dot(wts, _omega_batch(fn, su, tv)))
    return total


def _inv_sqrt_spd(p: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(p)
    return (v / np.sqrt(w)[..., None, :]) @ np.swapaxes(v, -1, -2)


def _sym_part(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + np.swapaxes(p, -1, -2))


def _toledo_cones(apex, pa, pb, order: int, chunk: int = 512) -> float:
    gu, gv, gw = _gauss_square(order)
    total = 0.0
    ci = _inv_sqrt_spd(apex)
    pa = _sym_part(ci @ pa @ ci)
    pb = _sym_part(ci @ pb @ ci)
    eye = np.broadcast_to(np.eye(apex.shape[-1]), apex.shape)
    for start in range(0, len(apex), chunk):
        sl = slice(start, start + chunk)
        pc_, pa_, pb_ = eye[sl, None], pa[sl, None], pb[sl, None]
        fn = lambda s, t: spd_cone(pc_, pa_, pb_, s[None, :], t[None, :])
        dens = _omega_batch(fn, gu, gv)
        total += float(np.sum(dens @ gw))
    return total


def _toledo_level(rep, g, level, mode, order, x0):
    dom = fundamental_domain(g, level if mode == "barycentric" else 0)
    center, corners = equivariant_fan_map(rep, dom, x0)
    if mode == "fan":
        return _toledo_fan(center, corners, 2**level, order) / (2 * np.pi)
    ks, lam = dom.fan_coordinates()
    sigma, tau = fan_parameters(lam)
    n_sides = 4 * g
    img = spd_cone(center[None], corners[ks], corners[(ks + 1) % n_sides], sigma, tau)
    tri = dom.triangles
    return _toledo_cones(img[tri[:, 2]], img[tri[:, 0]], img[tri[:, 1]], order) / (2 * np.pi)


def toledo(
    rep: Representation,
    domain: FundamentalDomain | None = None,
    refinement: int = 2,
    mode: str = "fan",
    order: int = 6,
    x0: np.ndarray | None = None,
    check: bool = True,
) -> dict:
    """(1/2pi) times the integral of the Kahler form over an equivariant map.

    mode "fan": the map cones each fan triangle from the center image; the
    quadrature splits every cone into 4^refinement cells.
    mode "barycentric": vertices of the refined domain are placed by the fan
    map and every small triangle is coned afresh, a different equivariant
    map with the same integral.

    Returns a dict with raw, normalized (None before calibration), defect
    (distance of normalized to the nearest integer) and refinement_trace.
    """
    if mode not in ("fan", "barycentric"):
        raise InputError(f"unknown toledo mode {mode!r}")
    if refinement < 0:
        raise InputError("refinement must be nonnegative")
    g = rep.genus
    if domain is not None:
        refinement = domain.refinement if mode == "barycentric" else refinement
    levels = [refinement] if not check or refinement == 0 else [refinement - 1, refinement]
    if x0 is None:
        # conjugate so that the displacement minimizer is the base point;
        # the invariant is unchanged and the fan map stays well conditioned
        h = rep_frame(rep)
        rep = conjugate_rep(rep, iso_inverse(h))
    trace = [_toledo_level(rep, g, lv, mode, order, x0) for lv in levels]
    raw = trace[-1]
    if len(trace) > 1 and abs(trace[-1] - trace[-2]) > 1e-3:
        raise AccuracyError(f"Toledo quadrature not converged: {trace}")
    kappa = get_context().kappa_tau
    normalized = None if kappa is None else raw / kappa
    defect = None if normalized is None else abs(normalized - round(normalized))
    return {"raw": raw, "normalized": normalized, "defect": defect, "refinement_trace": trace}


def calibrate_toledo(
    reference: Iterable[Representation],
    refinement: int = 2,
    max_multiple: int = 16,
    store: bool = True,
) -> float:
    """Scale kappa_tau making the Toledo values of a reference family integral.

    Candidates are kappa = r / m for the largest |raw| value r and integers
    m; a candidate is consistent when every normalized value is within 1e-3
    of an integer and respects the bound |tau| <= 2(2g - 2).  The smallest
    consistent kappa is returned (the bound is sharp, which pins the lattice
    scale), and stored in the context.
    """
    reps = list(reference)
    raws = np.array([toledo(r, refinement=refinement)["raw"] for r in reps])
    bounds = np.array([2.0 * (2 * r.genus - 2) for r in reps])
    if len(raws) == 0 or np.abs(raws).max() < 1e-6:
        raise CalibrationError("reference family has no nonzero Toledo value")
    top = float(np.abs(raws).max())
    best = None
    best_res = np.inf
    for m in range(1, max_multiple + 1):
        kappa = top / m
        vals = raws / kappa
        res = float(np.abs(vals - np.round(vals)).max())
        best_res = min(best_res, res)
        if res <= 1e-3 and np.all(np.abs(vals) <= bounds + 1e-3):
            best = kappa
    if best is None:
        raise CalibrationError(f"no consistent Toledo scale (best lattice residual {best_res:.3e})")
    if store:
        get_context().kappa_tau = best
    return best


def component_count(n: int, g: int) -> int:
    """Number of components of maximal representations into SO_0(2, n+1)."""
    if n < 2:
        raise InputError("component counts need n >= 2")
    if g < 2:
        raise InputError("genus must be at least 2")
    if n >= 3:
        return 2 * 2 ** (2 * g)
    return 2 * (2 ** (2 * g) - 1) + 4 * g - 3
