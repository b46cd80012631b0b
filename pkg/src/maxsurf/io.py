"""Configuration, reports and file formats.

JSON for structured data, CSV for traces and grids, ASCII PLY for meshes.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
import os
from pathlib import Path
from typing import Any

import numpy as np

from .eqmesh import EquivariantMesh, build_mesh, qdot
from .errors import ConfigError, InputError
from .surface_rep import Representation

__all__ = [
    "CONFIG_VERSION",
    "REPORT_SCHEMA",
    "SCHEMAS",
    "RunConfig",
    "parse_config",
    "serialize_config",
    "Report",
    "load_rep",
    "save_rep",
    "load_mesh",
    "save_mesh",
    "write_ply",
    "write_convergence_csv",
    "b_landscape",
    "write_grid_csv",
    "export_plot_data",
]

CONFIG_VERSION = 1
REPORT_SCHEMA = "maxsurf.report/1"


def _default_tol() -> float:
    raw = os.environ.get("MAXSURF_TOL")
    try:
        val = float(raw) if raw else 1e-8
    except ValueError:
        return 1e-8
    return val if val > 0 else 1e-8


@dataclasses.dataclass(frozen=True)
class Field:
    kind: str  # int, float, str, bool, path, vector, matrix
    default: Any = None
    lo: float | None = None
    hi: float | None = None
    required: bool = False
    choices: tuple | None = None


_TOL = Field("float", "env_tol", 1e-15, 1e-2)
_REF = Field("int", 2, 0, 4)
_SEED = Field("int", 0, 0, 2**32 - 1)

SCHEMAS: dict[str, dict[str, Field]] = {
    "geo classify": {"x": Field("vector", required=True), "y": Field("vector", required=True), "tol": Field("float", None, 0, 1e-2)},
    "geo segment": {
        "p": Field("vector", required=True),
        "v": Field("vector", required=True),
        "t0": Field("float", 0.0, -50, 50),
        "t1": Field("float", 1.0, -50, 50),
        "samples": Field("int", 11, 2, 100000),
    },
    "rep fuchsian": {"genus": Field("int", 2, 2, 12), "n": Field("int", 0, 0, 16), "out": Field("path")},
    "rep check": {"rep": Field("path", required=True), "tol": Field("float", None, 0, 1e-2)},
    "rep twist": {"rep": Field("path", required=True), "signs": Field("matrix", required=True), "out": Field("path")},
    "invariants euler": {"rep": Field("path", required=True)},
    "invariants toledo": {"rep": Field("path", required=True), "refinement": _REF},
    "invariants components": {"n": Field("int", 2, 2, 64), "genus": Field("int", 2, 2, 64)},
    "invariants normal-bundle": {"rep": Field("path", required=True), "refinement": Field("int", 2, 1, 4)},
    "surface solve": {
        "rep": Field("path", required=True),
        "refinement": _REF,
        "tol": _TOL,
        "seed": Field("str", "totally_geodesic", choices=("totally_geodesic", "perturbed", "orbit_cone")),
        "eps": Field("float", 0.05, 0.0, 1.0),
        "rng_seed": _SEED,
        "max_iters": Field("int", 20000, 1, 10**7),
        "out": Field("path", "."),
        "name": Field("str", "surface"),
    },
    "surface verify": {"mesh": Field("path", required=True), "tol": _TOL},
    "surface gaussmap": {"mesh": Field("path", required=True)},
    "uniqueness probe": {
        "rep": Field("path", required=True),
        "k": Field("int", 4, 2, 16),
        "refinement": _REF,
        "eps": Field("float", 0.05, 0.0, 1.0),
        "tol": _TOL,
        "rng_seed": _SEED,
    },
    "causal gap": {"s1": Field("path", required=True), "s2": Field("path", required=True), "window": Field("int", 2, 0, 6)},
    "causal second-derivative": {
        "s1": Field("path", required=True),
        "s2": Field("path", required=True),
        "vertex": Field("int", None, 0, 10**7),
        "h": Field("float", 1e-2, 1e-6, 0.5),
        "window": Field("int", 2, 0, 6),
    },
    "higgs verify": {"g": Field("int", 2, 2, 1000), "n": Field("int", 2, 1, 64)},
    "export": {
        "kind": Field("str", required=True, choices=("mesh", "convergence", "landscape")),
        "input": Field("path", required=True),
        "input2": Field("path"),
        "out": Field("path", required=True),
        "res": Field("int", 2, 1, 16),
        "window": Field("int", 1, 0, 4),
    },
}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    version: int = CONFIG_VERSION

    def get(self, key):
        return self.params[key]


def _check_value(path: str, f: Field, value):
    if value is None:
        return None
    kind = f.kind
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            if isinstance(value, str) and value.lstrip("-").isdigit():
                value = int(value)
            else:
                raise ConfigError(f"{path}: expected an integer, got {value!r}")
        value = int(value)
    elif kind == "float":
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: expected a number, got {value!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite")
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
    elif kind in ("str", "path"):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        if f.choices and value not in f.choices:
            raise ConfigError(f"{path}: must be one of {list(f.choices)}, got {value!r}")
    elif kind == "vector":
        if isinstance(value, str):
            value = [float(t) for t in value.split(",")]
        try:
            value = [float(t) for t in value]
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: expected a list of numbers") from None
        if not all(math.isfinite(t) for t in value):
            raise ConfigError(f"{path}: entries must be finite")
    elif kind == "matrix":
        if isinstance(value, str):
            value = json.loads(value)
        try:
            value = [[float(t) for t in row] for row in value]
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: expected a list of lists of numbers") from None
    if kind in ("int", "float"):
        if f.lo is not None and value < f.lo:
            raise ConfigError(f"{path}: {value} below the lower bound {f.lo}")
        if f.hi is not None and value > f.hi:
            raise ConfigError(f"{path}: {value} above the upper bound {f.hi}")
    return value


def parse_config(source) -> RunConfig:
    """Validated RunConfig from a JSON path or a dict {command, params[, version]}.

    Unknown keys are rejected naming the field path; defaults are filled.
    """
    if isinstance(source, (str, Path)):
        try:
            with open(source) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    else:
        data = source
    if not isinstance(data, dict):
        raise ConfigError("config must be an object")
    extra = set(data) - {"command", "params", "version"}
    if extra:
        raise ConfigError(f"unknown key(s) {sorted(extra)} at the top level")
    version = data.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"version: unsupported config version {version!r}")
    command = data.get("command")
    if command not in SCHEMAS:
        raise ConfigError(f"command: unknown command {command!r}")
    params = data.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError("params: must be an object")
    schema = SCHEMAS[command]
    unknown = sorted(set(params) - set(schema))
    if unknown:
        raise ConfigError(f"params.{unknown[0]}: unknown key for {command!r}")
    out = {}
    for key, f in schema.items():
        path = f"params.{key}"
        if key in params and params[key] is not None:
            out[key] = _check_value(path, f, params[key])
        elif f.required:
            raise ConfigError(f"{path}: required")
        else:
            out[key] = _default_tol() if f.default == "env_tol" else f.default
    return RunConfig(command, out, version)


def serialize_config(cfg: RunConfig) -> dict:
    return {"version": cfg.version, "command": cfg.command, "params": dict(cfg.params)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


@dataclasses.dataclass
class Report:
    command: str
    inputs_digest: str
    results: dict = dataclasses.field(default_factory=dict)
    defects: dict = dataclasses.field(default_factory=dict)
    traces: dict = dataclasses.field(default_factory=dict)
    files: list = dataclasses.field(default_factory=list)
    status: str = "ok"
    wall_clock: float = 0.0

    @staticmethod
    def digest(cfg: RunConfig) -> str:
        blob = json.dumps(serialize_config(cfg), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def canonical(self) -> dict:
        """Everything except the wall clock; identical runs give identical output."""
        return _jsonable(
            {
                "schema": REPORT_SCHEMA,
                "command": self.command,
                "inputs_digest": self.inputs_digest,
                "status": self.status,
                "results": self.results,
                "defects": self.defects,
                "traces": self.traces,
                "files": self.files,
            }
        )

    def to_json(self) -> dict:
        out = self.canonical()
        out["wall_clock"] = self.wall_clock
        return out

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)


# ------------------------------------------------------------ data files


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def load_rep(path) -> Representation:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise InputError(f"{path}: representation must be an object")
    return Representation.from_json(data)


def save_rep(rep: Representation, path) -> None:
    with open(path, "w") as fh:
        json.dump(rep.to_json(), fh)


def save_mesh(mesh: EquivariantMesh, path) -> None:
    data = {"rep": mesh.rep.to_json(), "refinement": mesh.domain.refinement, "x": mesh.x.tolist()}
    with open(path, "w") as fh:
        json.dump(data, fh)


def load_mesh(path) -> EquivariantMesh:
    data = _read_json(path)
    try:
        rep = Representation.from_json(data["rep"])
        ref = int(data["refinement"])
        x = np.asarray(data["x"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: malformed mesh file: {exc}") from exc
    mesh = build_mesh(rep, refinement=ref)
    if x.shape != mesh.x.shape:
        raise InputError(f"{path}: positions of shape {x.shape}, expected {mesh.x.shape}")
    return mesh.copy(x)


def _project3(pos: np.ndarray) -> np.ndarray:
    """Disc-type projection: (x1, x2, x4) / (1 + |x_neg|) with x_neg the time-like coordinates."""
    neg = np.linalg.norm(pos[:, 2:], axis=1)
    third = pos[:, 3] if pos.shape[1] > 3 else np.zeros(len(pos))
    return np.stack([pos[:, 0], pos[:, 1], third], axis=1) / (1.0 + neg)[:, None]


def write_ply(mesh: EquivariantMesh, path) -> None:
    """ASCII PLY of the fundamental domain: 3D projection plus the full coordinates as comments."""
    pos = mesh.positions()
    tris = mesh.domain.triangles
    p3 = _project3(pos)
    try:
        with open(path, "w") as fh:
            fh.write("ply\nformat ascii 1.0\n")
            fh.write(f"comment maxsurf mesh dim {pos.shape[1]} genus {mesh.rep.genus} refinement {mesh.domain.refinement}\n")
            for v in pos:
                fh.write("comment x " + " ".join(repr(float(t)) for t in v) + "\n")
            fh.write(f"element vertex {len(pos)}\nproperty double x\nproperty double y\nproperty double z\n")
            fh.write(f"element face {len(tris)}\nproperty list uchar int vertex_indices\nend_header\n")
            for v in p3:
                fh.write(" ".join(repr(float(t)) for t in v) + "\n")
            for t in tris:
                fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def write_convergence_csv(rows, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "residual", "area", "min_gram_eig"])
            for r in rows:
                w.writerow([int(r[0])] + [repr(float(t)) for t in r[1:]])
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def b_landscape(s1: EquivariantMesh, s2: EquivariantMesh, res: int = 2, window: int = 1):
    """Grid of B = <u, v> over stored vertices u of s1 and lattice points v of s2.

    The lattice has barycentric spacing 1/res on every triangle of every
    copy of s2 within window adjacency layers of the domain; points are
    normalized to the quadric on the sheet of s1's first vertex.  Returns
    (grid (R, S), samples (S, dim)).
    """
    from .maxsolver import _translates

    if res < 1:
        raise InputError("res must be at least 1")
    ref = s1.positions()[0]
    _, y, _ = _translates(s2, ref, window)
    lam = np.array([(i, j, res - i - j) for i in range(res + 1) for j in range(res + 1 - i)], dtype=float) / res
    tris = s2.domain.triangles
    pts = np.einsum("li,wtid->wtld", lam, y[:, tris])
    pts = pts.reshape(-1, pts.shape[-1])
    m = -qdot(pts, pts)
    pts = pts[m > 0] / np.sqrt(m[m > 0])[:, None]
    jm = np.array([1.0, 1.0] + [-1.0] * (pts.shape[1] - 2))
    grid = (s1.x * jm) @ pts.T
    return grid, pts


def write_grid_csv(grid: np.ndarray, path, row_label: str = "u_row") -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([row_label] + [f"s{k}" for k in range(grid.shape[1])])
            for i, row in enumerate(grid):
                w.writerow([i] + [repr(float(t)) for t in row])
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc


def export_plot_data(obj, kind: str, path, **kw) -> list:
    """Write plotting data; returns the written paths.

    kind "mesh": obj is a mesh, PLY.  "convergence": obj is a
    ConvergenceReport (or rows), CSV.  "landscape": obj is a pair of
    meshes, grid CSV of B values.
    """
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise InputError(f"cannot write to {path}")
    if kind == "mesh":
        write_ply(obj, path)
    elif kind == "convergence":
        rows = obj.rows() if hasattr(obj, "rows") else obj
        write_convergence_csv(rows, path)
    elif kind == "landscape":
        s1, s2 = obj
        grid, _ = b_landscape(s1, s2, **kw)
        write_grid_csv(grid, path)
    else:
        raise InputError(f"unknown export kind {kind!r}")
    return [str(path)]
