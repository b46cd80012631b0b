"""Fiberwise algebra of SO(2, n+1) Higgs bundles and line bundle bookkeeping.

A fiber is modeled on E = U + W with U = IK + IK^-1 (quadratic form
[[0, 1], [1, 0]]) and W = I + V (identity form).  The Higgs field is
Phi = [[0, eta^dag], [eta, 0]] with eta: U -> W.  The cotangent twist is a
scalar at a fiber and is absorbed into the frame.
"""
from __future__ import annotations

import dataclasses
import itertools
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import DegeneracyError, InputError

__all__ = [
    "FiberHiggs",
    "assemble_phi",
    "cyclic_fiber",
    "q2_extract",
    "Q2_SLOT_FACTOR",
    "derive_q2_factor",
    "cyclic_splitting",
    "CYCLIC_ARROWS",
    "cyclic_check",
    "fourth_root_gauge",
    "hitchin_residual",
    "LineBundleExpr",
    "lb_degree",
    "verify_maximal_chain",
    "SplitBundleDatum",
    "slope_stability",
    "maximal_split_model",
]


# ------------------------------------------------------------------ fibers


@dataclasses.dataclass
class FiberHiggs:
    qU: np.ndarray
    qW: np.ndarray
    eta: np.ndarray  # (n+1, 2)
    eta_dag: np.ndarray  # (2, n+1)
    phi: np.ndarray  # (n+3, n+3)

    @property
    def q(self) -> np.ndarray:
        k = self.qW.shape[0]
        out = np.zeros((2 + k, 2 + k), dtype=complex)
        out[:2, :2] = self.qU
        out[2:, 2:] = self.qW
        return out

    def adjoint_defect(self) -> float:
        """max |eta^T qW - qU eta^dag|."""
        return float(np.abs(self.eta.T @ self.qW - self.qU @ self.eta_dag).max())


def _nondegenerate(m, name):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"{name} must be square")
    if np.abs(m - m.T).max() > 1e-12 * max(1.0, np.abs(m).max()):
        raise InputError(f"{name} must be symmetric")
    s = np.linalg.svd(m, compute_uv=False)
    if s.min() <= 1e-12 * max(1.0, s.max()):
        raise DegeneracyError(f"{name} is singular")
    return m


def assemble_phi(qU, qW, eta) -> FiberHiggs:
    """Phi = [[0, eta^dag], [eta, 0]] with eta^dag = qU^-1 eta^T qW."""
    qU = _nondegenerate(qU, "qU")
    qW = _nondegenerate(qW, "qW")
    eta = np.asarray(eta, dtype=complex)
    if qU.shape != (2, 2):
        raise InputError("qU must be 2x2")
    if eta.shape != (qW.shape[0], 2):
        raise InputError("eta must map U (rank 2) to W")
    eta_dag = np.linalg.solve(qU, eta.T @ qW)
    k = qW.shape[0]
    phi = np.zeros((2 + k, 2 + k), dtype=complex)
    phi[:2, 2:] = eta_dag
    phi[2:, :2] = eta
    return FiberHiggs(qU, qW, eta, eta_dag, phi)


QU_STD = np.array([[0.0, 1.0], [1.0, 0.0]])

# index partition of the cyclic model, basis order (IK, IK^-1 | I, V)
def cyclic_splitting(n: int) -> dict:
    return {"IK": [0], "IK-1": [1], "I": [2], "V": list(range(3, n + 3))}


# (source, target, kind); kind "one" marks the structural unit maps
CYCLIC_ARROWS = (
    ("IK", "I", "one"),
    ("I", "IK-1", "one"),
    ("IK-1", "I", "q2"),
    ("I", "IK", "q2"),
    ("IK-1", "V", "beta"),
    ("V", "IK", "beta"),
)


def cyclic_fiber(n: int, q2: complex = 0.0, beta=None) -> FiberHiggs:
    """Fiber of the cyclic shape: unit maps IK -> I -> IK^-1, q2 back, beta into V."""
    if n < 1:
        raise InputError("n must be at least 1")
    beta = np.zeros(n, dtype=complex) if beta is None else np.asarray(beta, dtype=complex).reshape(n)
    eta = np.zeros((n + 1, 2), dtype=complex)
    eta[0, 0] = 1.0  # IK -> I
    eta[0, 1] = q2  # IK^-1 -> I
    eta[1:, 1] = beta  # IK^-1 -> V
    return assemble_phi(QU_STD, np.eye(n + 1), eta)


def q2_extract(fib: FiberHiggs) -> complex:
    """1/2 tr(Phi^2)."""
    val = 0.5 * np.trace(fib.phi @ fib.phi)
    return complex(val) if abs(np.imag(val)) > 0 else float(np.real(val))


def derive_q2_factor(n: int = 2) -> float:
    """Ratio 1/2 tr(Phi^2) / (q2 slot value) read off the cyclic fiber.

    Phi^2 is block diagonal with blocks eta^dag eta and eta eta^dag; in the
    cyclic shape tr(eta^dag eta) = 2 q2, so 1/2 tr(Phi^2) = 2 q2.
    """
    return float(np.real(q2_extract(cyclic_fiber(n, q2=1.0))))


# 1/2 tr(Phi^2) = Q2_SLOT_FACTOR * (slot value); see derive_q2_factor
Q2_SLOT_FACTOR = 2.0


def _blocks(splitting: Mapping[str, Sequence[int]], size: int):
    idx = sorted(i for v in splitting.values() for i in v)
    if idx != list(range(size)):
        raise InputError("splitting must partition the indices")
    return {k: list(v) for k, v in splitting.items()}


def cyclic_check(fib: FiberHiggs | np.ndarray, splitting: Mapping[str, Sequence[int]] | None = None, tol: float = 1e-10) -> bool:
    """True iff Phi is supported on the arrows of the cyclic diagram.

    Blocks off the arrows must vanish; the unit arrows IK -> I -> IK^-1 must
    not.  q2 and beta blocks may vanish.
    """
    phi = fib.phi if isinstance(fib, FiberHiggs) else np.asarray(fib, dtype=complex)
    size = phi.shape[0]
    splitting = cyclic_splitting(size - 3) if splitting is None else splitting
    blocks = _blocks(splitting, size)
    allowed = {(s, t): kind for s, t, kind in CYCLIC_ARROWS}
    for s, t in itertools.product(blocks, repeat=2):
        sub = phi[np.ix_(blocks[t], blocks[s])]
        if sub.size == 0:
            continue
        size_of = float(np.abs(sub).max())
        kind = allowed.get((s, t))
        if kind is None and size_of > tol:
            return False
        if kind == "one" and size_of <= tol:
            return False
    return True


def fourth_root_gauge(fib: FiberHiggs, splitting: Mapping[str, Sequence[int]] | None = None, root: complex = 1j, tol: float = 1e-10):
    """Block-scalar q-orthogonal g with g Phi g^-1 = root * Phi, or None.

    Phases are propagated along the nonzero blocks (target phase = root *
    source phase); an overall scale then makes g preserve q.
    """
    phi = fib.phi
    size = phi.shape[0]
    splitting = cyclic_splitting(size - 3) if splitting is None else splitting
    blocks = _blocks(splitting, size)
    names = [k for k in blocks if blocks[k]]
    arrows = []
    for s, t in itertools.product(names, repeat=2):
        if np.abs(phi[np.ix_(blocks[t], blocks[s])]).max() > tol:
            arrows.append((s, t))
    phase = {names[0]: 1.0 + 0j}
    changed = True
    while changed:
        changed = False
        for s, t in arrows:
            if s in phase and t not in phase:
                phase[t] = root * phase[s]
                changed = True
            elif t in phase and s not in phase:
                phase[s] = phase[t] / root
                changed = True
    for k in names:
        phase.setdefault(k, 1.0 + 0j)
    if any(abs(phase[t] - root * phase[s]) > tol for s, t in arrows):
        return None
    diag = np.zeros(size, dtype=complex)
    for k in names:
        diag[blocks[k]] = phase[k]
    q = fib.q
    # g^T q g = lambda^2 D q D must equal q
    dqd = diag[:, None] * q * diag[None, :]
    mask = np.abs(q) > tol
    ratios = q[mask] / dqd[mask]
    if np.ptp(np.abs(ratios)) > tol or np.abs(ratios - ratios[0]).max() > tol:
        return None
    g = np.diag(np.sqrt(ratios[0]) * diag)
    if np.abs(g.T @ q @ g - q).max() > tol or np.abs(g @ phi @ np.linalg.inv(g) - root * phi).max() > tol * max(1.0, np.abs(phi).max()):
        return None
    return g


def hitchin_residual(FA, Phi, h) -> float:
    """max |F_A + Phi Phi^*h - Phi^*h Phi| with Phi^*h = h^-1 conj(Phi)^T h."""
    FA = np.asarray(FA, dtype=complex)
    Phi = np.asarray(Phi, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if np.abs(h - h.conj().T).max() > 1e-12 * max(1.0, np.abs(h).max()):
        raise InputError("h must be Hermitian")
    if np.linalg.eigvalsh(h).min() <= 0:
        raise InputError("h must be positive definite")
    star = np.linalg.solve(h, Phi.conj().T @ h)
    return float(np.abs(FA + Phi @ star - star @ Phi).max())


# ----------------------------------------------------------- line bundles

_SYMBOLS = ("K", "I", "L", "O")


@dataclasses.dataclass(frozen=True)
class LineBundleExpr:
    """Monomial in K, I, L, O; exponents are integers."""

    exponents: tuple = ()

    @classmethod
    def of(cls, **exps: int) -> "LineBundleExpr":
        for k in exps:
            if k not in _SYMBOLS:
                raise InputError(f"unknown symbol {k}")
        return cls(tuple(sorted((k, int(v)) for k, v in exps.items() if v)))

    def as_dict(self) -> dict:
        return dict(self.exponents)

    def __mul__(self, other: "LineBundleExpr") -> "LineBundleExpr":
        d = self.as_dict()
        for k, v in other.exponents:
            d[k] = d.get(k, 0) + v
        return LineBundleExpr.of(**d)

    def __pow__(self, k: int) -> "LineBundleExpr":
        return LineBundleExpr.of(**{s: v * k for s, v in self.exponents})

    def inverse(self) -> "LineBundleExpr":
        return self ** -1

    def normalize(self, i_square: str = "O") -> "LineBundleExpr":
        """Canonical form: L -> I K, O dropped, I^2 -> i_square ("O" or "I")."""
        d = self.as_dict()
        d.pop("O", None)
        ell = d.pop("L", 0)
        d["I"] = d.get("I", 0) + ell
        d["K"] = d.get("K", 0) + ell
        e = d.get("I", 0)
        if i_square == "O":
            d["I"] = e % 2
        elif i_square == "I":
            # tampered rule: each I^2 collapses to I
            while abs(e) >= 2:
                e = e - int(np.sign(e))
            d["I"] = e
        else:
            raise InputError("i_square must be 'O' or 'I'")
        return LineBundleExpr.of(**d)

    def is_trivial(self, i_square: str = "O") -> bool:
        return self.normalize(i_square).exponents == ()

    def __str__(self) -> str:
        if not self.exponents:
            return "O"
        return "".join(s if v == 1 else f"{s}^{v}" for s, v in self.exponents)


def lb_degree(expr: LineBundleExpr, g: int) -> int:
    """deg K = 2g - 2, deg I = deg O = 0, after L -> I K."""
    if g < 2:
        raise InputError("genus must be at least 2")
    return (2 * g - 2) * expr.normalize().as_dict().get("K", 0)


K = LineBundleExpr.of(K=1)
I = LineBundleExpr.of(I=1)
L = LineBundleExpr.of(L=1)
O = LineBundleExpr.of(O=1)


def verify_maximal_chain(g: int, i_square: str = "O") -> dict:
    """Replay the degree argument for maximal Higgs bundles.

    Steps: deg L = 2g - 2; deg K^2 L^-2 = 0; a degree 0 bundle with a
    non-vanishing section is trivial, so K^2 L^-2 = O; hence I := L K^-1
    squares to O and L = I K.  Each step carries its arithmetic.
    """
    if g < 2:
        raise InputError("genus must be at least 2")
    steps = []

    def step(name, lhs, rhs, arithmetic, ok):
        steps.append({"step": name, "lhs": lhs, "rhs": rhs, "arithmetic": arithmetic, "ok": bool(ok)})
        return ok

    deg_k = 2 * g - 2
    deg_l = deg_k  # maximality
    ok = step("deg L", "deg L", str(deg_k), f"deg L = 2g-2 = 2*{g}-2 = {deg_l}", deg_l == 2 * g - 2)
    m = K**2 * L**-2
    deg_m = 2 * deg_k - 2 * deg_l
    ok &= step("deg K^2 L^-2", "deg K^2L^-2", "0", f"2*{deg_k} - 2*{deg_l} = {deg_m}", deg_m == 0)
    ok &= step(
        "K^2 L^-2 = O",
        str(m),
        "O",
        f"degree {deg_m} with a non-vanishing section",
        deg_m == 0,
    )
    i_def = L * K.inverse()
    i_sq = (i_def**2).normalize(i_square)
    l_form = (I * K).normalize(i_square)
    # I^2 must be trivial, and (L K^-1)^2 must agree with (K^2 L^-2)^-1 = O
    ok_l = (I**2).is_trivial(i_square) and L.normalize(i_square) == l_form and i_sq == m.inverse().normalize(i_square) and i_sq.exponents == ()
    ok &= step(
        "L = IK, I^2 = O",
        f"L = {l_form}; I^2 = {(I ** 2).normalize(i_square)}",
        "IK; O",
        f"(L K^-1)^2 = L^2 K^-2 = (K^2 L^-2)^-1 = O; deg I = {deg_l} - {deg_k} = {deg_l - deg_k}",
        ok_l and deg_l - deg_k == 0,
    )
    return {"genus": g, "steps": steps, "verified": sum(s["ok"] for s in steps), "ok": bool(ok)}


# --------------------------------------------------------------- stability


@dataclasses.dataclass
class SplitBundleDatum:
    """Direct sum of pieces (name, rank, degree) or (name, LineBundleExpr).

    arrows is a set of (source, target) pairs: Phi maps source into
    target (times K).  A sub-sum is Phi-invariant when no arrow leaves it.
    """

    pieces: list
    arrows: set = dataclasses.field(default_factory=set)
    genus: int | None = None

    def __post_init__(self):
        if not self.pieces:
            raise InputError("empty bundle datum")
        pieces = []
        for p in self.pieces:
            if len(p) == 2 and isinstance(p[1], LineBundleExpr):
                if self.genus is None:
                    raise InputError("line bundle pieces need a genus")
                p = (p[0], 1, lb_degree(p[1], self.genus))
            pieces.append(tuple(p))
        self.pieces = pieces
        names = [p[0] for p in self.pieces]
        if len(set(names)) != len(names):
            raise InputError("piece names must be distinct")
        for s, t in self.arrows:
            if s not in names or t not in names:
                raise InputError("arrow between unknown pieces")

    @property
    def rank(self) -> int:
        return sum(p[1] for p in self.pieces)

    @property
    def degree(self) -> int:
        return sum(p[2] for p in self.pieces)

    def invariant(self, subset) -> bool:
        sub = set(subset)
        return not any(s in sub and t not in sub for s, t in self.arrows)


def slope_stability(datum: SplitBundleDatum) -> str:
    """'stable', 'polystable' or 'unstable' over the invariant sub-sums."""
    names = [p[0] for p in datum.pieces]
    rank = {p[0]: p[1] for p in datum.pieces}
    deg = {p[0]: p[2] for p in datum.pieces}
    mu_e = Fraction(datum.degree, datum.rank)
    equal = []
    for k in range(1, len(names)):
        for sub in itertools.combinations(names, k):
            if not datum.invariant(sub):
                continue
            mu = Fraction(sum(deg[s] for s in sub), sum(rank[s] for s in sub))
            if mu > mu_e:
                return "unstable"
            if mu == mu_e:
                equal.append(sub)
    if not equal:
        return "stable"
    for sub in equal:
        rest = [s for s in names if s not in sub]
        if not datum.invariant(rest):
            return "unstable"
    return "polystable"


def maximal_split_model(g: int, n: int, q2: bool = True, beta: bool = True) -> SplitBundleDatum:
    """IK + I + IK^-1 + V with the arrows of the cyclic diagram."""
    dk = 2 * g - 2
    arrows = {("IK", "I"), ("I", "IK-1")}
    if q2:
        arrows |= {("IK-1", "I"), ("I", "IK")}
    if beta:
        arrows |= {("IK-1", "V"), ("V", "IK")}
    pieces = [("IK", 1, dk), ("I", 1, 0), ("IK-1", 1, -dk), ("V", n, 0)]
    return SplitBundleDatum(pieces, arrows)
