"""Experiment configuration and runners behind the command line.

A run is described by an :class:`ExperimentConfig` (JSON, versioned schema).
Every output embeds the resolved configuration so that it can be re-run.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from pwdi import bem, fields, nystrom
from pwdi.geometry import (
    bean_patches,
    cube_patches,
    ellipsoid_patches,
    make_bean,
    make_cube,
    make_ellipsoid,
    make_sphere,
    sphere_patches,
)
from pwdi.linsolve import KrylovConfig
from pwdi.mesh import load_trimesh, make_trimesh_hemisphere, make_trimesh_sphere

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
METHODS = ("nystrom", "bem", "multiscatter")
EQUATIONS = ("bw", "bm-direct", "bm-regularized")
INCIDENT_KINDS = ("interior-sources", "planewave")
GEOMETRY_KINDS = {
    "nystrom": ("sphere", "ellipsoid", "bean", "cube"),
    "bem": ("sphere", "hemisphere", "mesh"),
    "multiscatter": ("composite",),
}
GEOMETRY_DEFAULTS = {
    "sphere": {"radius": 1.0, "center": [0.0, 0.0, 0.0]},
    "ellipsoid": {"a": 1.0, "b": 0.8, "c": 0.6},
    "bean": {},
    "cube": {"side": 2.0},
    "hemisphere": {"radius": 1.5, "center": [0.0, 0.0, 0.0]},
    "mesh": {},
    "composite": {"sphere_radius": 0.5, "sphere_center": [0.0, 0.0, 2.0], "hemisphere_radius": 1.5},
}
TARGET_KINDS = ("plane", "cube", "points")
CSV_FLOAT = "{:.6e}"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _vec3(v, name: str) -> list[float]:
    try:
        out = [float(c) for c in v]
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of three numbers") from None
    _require(len(out) == 3, f"{name} must have three components")
    return out


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class IncidentSpec:
    """Boundary data: an exact interior-source field or a planewave."""

    kind: str = "interior-sources"
    direction: list | None = None
    sources: list | None = None  # [[x, y, z, weight], ...]

    def __post_init__(self):
        _require(self.kind in INCIDENT_KINDS, f"incident.kind must be one of {INCIDENT_KINDS}")
        if self.kind == "planewave":
            _require(self.direction is not None, "planewave incidence needs incident.direction")
            d = np.asarray(_vec3(self.direction, "incident.direction"))
            _require(abs(np.linalg.norm(d) - 1.0) < 1e-12, "incident.direction must be a unit vector")
            object.__setattr__(self, "direction", d.tolist())
        else:
            srcs = self.sources
            if srcs is None:
                srcs = [list(p) + [w] for p, w in fields.DEFAULT_SOURCES]
            _require(len(srcs) > 0, "incident.sources must be nonempty")
            clean = []
            for s in srcs:
                _require(len(s) == 4, "each source is [x, y, z, weight]")
                clean.append([float(c) for c in s])
            object.__setattr__(self, "sources", clean)

    def field(self, k: float) -> fields.Field:
        if self.kind == "planewave":
            return fields.planewave_incident(k, self.direction)
        return fields.exact_interior_sources(k, [(s[:3], s[3]) for s in self.sources])

    @property
    def exact(self) -> bool:
        """Interior-source data has a known scattered field."""
        return self.kind == "interior-sources"


@dataclass(frozen=True)
class TargetSpec:
    """Points for the near-field dump."""

    kind: str = "plane"
    origin: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    u: list = field(default_factory=lambda: [1.0, 0.0, 0.0])
    v: list = field(default_factory=lambda: [0.0, 0.0, 1.0])
    extent: list = field(default_factory=lambda: [2.0, 2.0])
    n: list = field(default_factory=lambda: [21, 21])
    half_side: float = 1.0
    points: list = field(default_factory=list)

    def __post_init__(self):
        _require(self.kind in TARGET_KINDS, f"targets.kind must be one of {TARGET_KINDS}")
        for name in ("origin", "u", "v"):
            object.__setattr__(self, name, _vec3(getattr(self, name), f"targets.{name}"))
        _require(len(self.extent) == 2 and len(self.n) == 2, "targets.extent and targets.n need two entries")
        object.__setattr__(self, "extent", [float(e) for e in self.extent])
        object.__setattr__(self, "n", [int(c) for c in self.n])
        _require(min(self.n) >= 0, "targets.n must be nonnegative")
        object.__setattr__(self, "points", [_vec3(p, "targets.points[i]") for p in self.points])

    def build(self) -> np.ndarray:
        if self.kind == "points":
            return np.asarray(self.points, dtype=float).reshape(-1, 3)
        if self.kind == "cube":
            return fields.near_cube_grid(self.half_side, self.n[0]).points
        o, u, v = (np.asarray(a) for a in (self.origin, self.u, self.v))
        su = np.linspace(-self.extent[0], self.extent[0], self.n[0])
        sv = np.linspace(-self.extent[1], self.extent[1], self.n[1])
        S, T = np.meshgrid(su, sv, indexing="ij")
        return (o + S.reshape(-1, 1) * u + T.reshape(-1, 1) * v).reshape(-1, 3)


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment description.

    ``resolutions`` holds Nystrom nodes per patch side (int), cube-sphere
    subdivisions (int), target mesh sizes (float) or mesh file paths (str),
    depending on ``method`` and ``geometry``.
    """

    method: str = "nystrom"
    equation: str = "bw"
    geometry: str = "sphere"
    geometry_params: dict = field(default_factory=dict)
    k: float = 1.0
    eta: float | None = None
    M: int = 1
    interpolant: str | None = None  # analytic for meshes, algebraic for Nystrom
    resolutions: list = field(default_factory=lambda: [8, 16])
    incident: IncidentSpec = field(default_factory=IncidentSpec)
    tol: float = 1e-8
    max_iter: int = 500
    restart: int | None = None
    far_radius: float = fields.FAR_RADIUS
    near_half_side: float | None = None
    targets: TargetSpec = field(default_factory=TargetSpec)
    n_anchors: int = 50
    seed: int = 0
    timings: bool = False
    output_csv: str | None = None
    output_json: str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        _require(self.schema_version == SCHEMA_VERSION, f"unsupported schema_version {self.schema_version}")
        _require(self.method in METHODS, f"method must be one of {METHODS}")
        eq = self.equation
        if self.method == "bem" and eq == "bm":
            eq = "bm-regularized"
        _require(eq in EQUATIONS, f"equation must be one of {EQUATIONS}")
        object.__setattr__(self, "equation", eq)
        _require(self.geometry in GEOMETRY_KINDS[self.method],
                 f"geometry {self.geometry!r} not available for method {self.method!r}")
        params = dict(GEOMETRY_DEFAULTS[self.geometry])
        unknown = set(self.geometry_params) - set(params) - ({"path"} if self.geometry == "mesh" else set())
        _require(not unknown, f"unknown geometry parameters {sorted(unknown)}")
        params.update(self.geometry_params)
        object.__setattr__(self, "geometry_params", params)

        _require(math.isfinite(self.k) and self.k > 0, "k must be positive")
        eta = self.k if self.eta is None else float(self.eta)
        _require(eta != 0 and math.isfinite(eta), "eta must be real and nonzero")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "k", float(self.k))
        _require(isinstance(self.M, int) and self.M >= 0, "M must be a nonnegative integer")
        if self.interpolant is None:
            object.__setattr__(self, "interpolant", "algebraic" if self.method == "nystrom" else "analytic")
        _require(self.interpolant in nystrom.INTERPOLANTS, f"interpolant must be one of {nystrom.INTERPOLANTS}")

        if self.method == "nystrom":
            try:
                nystrom.check_setup(eq, self.M, self.interpolant)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        else:
            _require(self.M in bem.BEM_ORDERS, f"BEM supports M in {bem.BEM_ORDERS}, got {self.M}")
            _require(self.interpolant == "analytic" or self.M <= 1, "BEM uses M <= 1")
            if self.method == "multiscatter":
                _require(eq == "bw", "multiple scattering is implemented for the BW equation")
            else:
                _require(eq in ("bw", "bm-regularized"), "BEM equations are bw and bm (Maue form)")

        res = list(self.resolutions)
        for r in res:
            _require(not isinstance(r, bool), "resolutions must be numbers or mesh paths")
            if self.method == "nystrom":
                _require(isinstance(r, int) and r >= 2, "Nystrom resolutions are integers N >= 2")
            elif self.geometry == "mesh":
                _require(isinstance(r, str), "mesh geometry takes mesh file paths as resolutions")
            elif isinstance(r, int):
                _require(self.geometry == "sphere" and r >= 1, "integer resolutions are cube-sphere subdivisions")
            else:
                _require(isinstance(r, float) and r > 0, "resolutions must be positive mesh sizes")
        object.__setattr__(self, "resolutions", res)

        if isinstance(self.incident, dict):
            object.__setattr__(self, "incident", IncidentSpec(**self.incident))
        if isinstance(self.targets, dict):
            object.__setattr__(self, "targets", TargetSpec(**self.targets))
        if self.method == "multiscatter":
            _require(self.incident.kind == "planewave", "multiple scattering runs take planewave incidence")
        if self.near_half_side is None and self.geometry == "sphere" and self.method != "multiscatter":
            object.__setattr__(self, "near_half_side", float(self.geometry_params["radius"]))
        _require(self.n_anchors >= 1, "n_anchors must be >= 1")
        try:
            KrylovConfig(self.tol, self.max_iter, self.restart)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    # ------------------------------------------------------------------
    @property
    def krylov(self) -> KrylovConfig:
        return KrylovConfig(self.tol, self.max_iter, self.restart)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        names = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - names
        _require(not unknown, f"unknown configuration keys {sorted(unknown)}")
        d = dict(d)
        try:
            if isinstance(d.get("incident"), dict):
                d["incident"] = IncidentSpec(**d["incident"])
            if isinstance(d.get("targets"), dict):
                d["targets"] = TargetSpec(**d["targets"])
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e}") from None
        return cls.from_dict(d)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if not kw:
            return self
        d = self.to_dict()
        if "geometry" in kw and kw["geometry"] != d["geometry"]:
            d["geometry_params"] = {}
        d.update(kw)
        if "eta" not in kw and "k" in kw:
            d["eta"] = None
        if "interpolant" not in kw and "method" in kw:
            d["interpolant"] = None
        if "near_half_side" not in kw and ("geometry" in kw or "method" in kw):
            d["near_half_side"] = None
        return ExperimentConfig.from_dict(d)


def provenance(cfg: ExperimentConfig) -> dict:
    from pwdi import __version__

    return {"package": "pwdi", "version": __version__, "schema_version": SCHEMA_VERSION, "config": cfg.to_dict()}


def config_from_provenance(text: str) -> ExperimentConfig:
    """Recover the configuration from a JSON report or a CSV provenance line."""
    first = text.lstrip().splitlines()[0] if text.strip() else ""
    if first.startswith("# provenance:"):
        data = json.loads(first[len("# provenance:"):])
    else:
        data = json.loads(text)
        data = data.get("provenance", data)
    return ExperimentConfig.from_dict(data["config"])


# --------------------------------------------------------------------------
# discretizations
# --------------------------------------------------------------------------
def smooth_patches(cfg: ExperimentConfig):
    p = cfg.geometry_params
    if cfg.geometry == "sphere":
        return sphere_patches(p["radius"], p["center"])
    if cfg.geometry == "ellipsoid":
        return ellipsoid_patches(p["a"], p["b"], p["c"])
    if cfg.geometry == "bean":
        return bean_patches()
    if cfg.geometry == "cube":
        return cube_patches(p["side"])
    raise ConfigError(f"geometry {cfg.geometry!r} has no parametric patches")


class Discretization:
    """Common interface of the three solver paths at one resolution."""

    h: float
    dof: int

    def data(self) -> np.ndarray:
        raise NotImplementedError

    def solve(self):
        raise NotImplementedError

    def potential(self, X, regularize: bool = True) -> np.ndarray:
        raise NotImplementedError

    def interior_probes(self) -> np.ndarray:
        return np.zeros((0, 3))

    def extinction(self, X) -> np.ndarray:
        return np.full(len(X), np.nan + 0j)


class NystromCase(Discretization):
    def __init__(self, cfg: ExperimentConfig, N: int):
        self.cfg = cfg
        p = cfg.geometry_params
        if cfg.geometry == "sphere":
            self.grid = make_sphere(p["radius"], p["center"], N)
        elif cfg.geometry == "ellipsoid":
            self.grid = make_ellipsoid(p["a"], p["b"], p["c"], N)
        elif cfg.geometry == "bean":
            self.grid = make_bean(N)
        else:
            self.grid = make_cube(p["side"], N)
        self.h = 1.0 / N
        self.dof = self.grid.size
        self.density = None
        self.result = None

    def _boundary(self):
        g, cfg = self.grid, self.cfg
        f = cfg.incident.field(cfg.k)
        sign = 1.0 if cfg.incident.exact else -1.0
        if cfg.equation == "bw":
            return sign * f.value(g.points)
        return sign * f.normal_derivative(g.points, g.normals)

    def data(self):
        return self._boundary()

    def solve(self):
        cfg = self.cfg
        sol = nystrom.solve(self.grid, self.data(), cfg.k, cfg.eta, cfg.M, cfg.equation, cfg.interpolant, cfg.krylov)
        self.density, self.result = sol.density, sol.result
        return sol.result

    def potential(self, X, regularize=True):
        cfg = self.cfg
        return fields.evaluate_potential_nystrom(self.grid, self.density, X, cfg.k, cfg.eta, cfg.M,
                                                 cfg.interpolant, regularize=regularize)

    def interior_probes(self):
        c = self.grid.points.mean(axis=0)
        r = 0.25 * np.min(np.ptp(self.grid.points, axis=0))
        pts = c + r * np.vstack([np.zeros(3), np.eye(3), -np.eye(3)])
        proj = fields.project_to_surface(self.grid, pts)
        return pts[fields.inside_smooth(proj, pts)]

    def extinction(self, X):
        cfg = self.cfg
        if cfg.equation != "bw" or len(X) == 0:
            return super().extinction(X)
        g = self.grid
        f = cfg.incident.field(cfg.k)
        dirichlet = f.value(g.points) if cfg.incident.exact else -f.value(g.points)
        order = cfg.M if cfg.interpolant == "algebraic" else 3
        return fields.extinction_residual(g, self.density, dirichlet, X, cfg.k, cfg.eta, max(order, 2))


class BemCase(Discretization):
    def __init__(self, cfg: ExperimentConfig, res):
        self.cfg = cfg
        p = cfg.geometry_params
        if cfg.geometry == "mesh":
            self.mesh = load_trimesh(res)
        elif cfg.geometry == "sphere":
            if isinstance(res, int):
                self.mesh = make_trimesh_sphere(p["radius"], n=res, center=p["center"])
            else:
                self.mesh = make_trimesh_sphere(p["radius"], h_target=res, center=p["center"])
        else:
            self.mesh = make_trimesh_hemisphere(p["radius"], res, p["center"])
        self.h = self.mesh.h
        self.dof = self.mesh.n_nodes
        self.density = None
        self.result = None

    def data(self):
        cfg, m = self.cfg, self.mesh
        g = bem.gauss_triple(m).flat_points
        f = cfg.incident.field(cfg.k)
        sign = 1.0 if cfg.incident.exact else -1.0
        if cfg.equation == "bw":
            return sign * f.value(g)
        return sign * f.normal_derivative(g, np.repeat(m.normal, 3, axis=0))

    def solve(self):
        cfg = self.cfg
        eq = "bw" if cfg.equation == "bw" else "bm"
        sol = bem.solve(self.mesh, self.data(), cfg.k, cfg.eta, cfg.M, eq, cfg.interpolant, cfg.krylov)
        self.density, self.result = sol.density, sol.result
        return sol.result

    def potential(self, X, regularize=True):
        cfg = self.cfg
        return bem.evaluate_potential_bem(self.mesh, self.density, X, cfg.k, cfg.eta, cfg.M, cfg.interpolant,
                                          regularize=regularize)

    def interior_probes(self):
        from pwdi.mesh import inside

        c = self.mesh.nodes.mean(axis=0)
        r = 0.25 * np.min(np.ptp(self.mesh.nodes, axis=0))
        pts = c + r * np.vstack([np.zeros(3), np.eye(3), -np.eye(3)])
        return pts[inside(self.mesh, pts)]

    def extinction(self, X):
        cfg = self.cfg
        if cfg.equation != "bw" or len(X) == 0:
            return super().extinction(X)
        f = cfg.incident.field(cfg.k)
        nodal = f.value(self.mesh.nodes)
        dirichlet = nodal if cfg.incident.exact else -nodal
        return bem.extinction_residual(self.mesh, self.density, dirichlet, X, cfg.k, cfg.eta, cfg.M, cfg.interpolant)


class MultiScatterCase(Discretization):
    def __init__(self, cfg: ExperimentConfig, h: float):
        self.cfg = cfg
        p = cfg.geometry_params
        self.meshes = [
            make_trimesh_sphere(p["sphere_radius"], h_target=h, center=p["sphere_center"]),
            make_trimesh_hemisphere(p["hemisphere_radius"], h_target=h),
        ]
        self.h = max(m.h for m in self.meshes)
        self.dof = sum(m.n_nodes for m in self.meshes)
        self.density = None
        self.result = None

    def data(self):
        return bem.multiscatter_data(self.meshes, self.cfg.incident.field(self.cfg.k))

    def solve(self):
        cfg = self.cfg
        op = bem.assemble_multiscatter_bw(self.meshes, cfg.k, cfg.eta, cfg.M, cfg.interpolant)
        res = op.solve(self.data(), cfg.krylov)
        self.density, self.result = res.x, res
        return res

    def potential(self, X, regularize=True):
        cfg = self.cfg
        return bem.evaluate_multiscatter(self.meshes, self.density, X, cfg.k, cfg.eta, cfg.M, cfg.interpolant,
                                         regularize=regularize)


def discretize(cfg: ExperimentConfig, res) -> Discretization:
    if cfg.method == "nystrom":
        return NystromCase(cfg, res)
    if cfg.method == "bem":
        return BemCase(cfg, res)
    return MultiScatterCase(cfg, res)


# --------------------------------------------------------------------------
# convergence tables
# --------------------------------------------------------------------------
def eoc(h, err) -> list:
    """Order between consecutive resolutions: log(e_{i-1}/e_i) / log(h_{i-1}/h_i)."""
    out = [None]
    for i in range(1, len(h)):
        a, b = err[i - 1], err[i]
        if a is None or b is None or not (a > 0 and b > 0) or h[i - 1] == h[i]:
            out.append(None)
        else:
            out.append(math.log(a / b) / math.log(h[i - 1] / h[i]))
    return out


def eoc_fit(h, err) -> float:
    """Least-squares slope of log(err) against log(h)."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


@dataclass
class Row:
    resolution: Any
    h: float | None = None
    dof: int | None = None
    far_error: float | None = None
    near_error: float | None = None
    eoc_far: float | None = None
    eoc_near: float | None = None
    iterations: int | None = None
    converged: bool | None = None
    status: str = "ok"
    wall_time: float | None = None


def _solve_row(cfg: ExperimentConfig, res, far_pts, near_pts):
    t0 = time.perf_counter()
    row = Row(res)
    case = None
    try:
        case = discretize(cfg, res)
        row.h, row.dof = case.h, case.dof
        result = case.solve()
        row.iterations, row.converged = result.iterations, bool(result.converged)
        far = case.potential(far_pts, regularize=False)
        near = case.potential(near_pts) if near_pts is not None else None
    except Exception as e:  # a failing resolution is reported, the sweep continues
        log.exception("resolution %r failed", res)
        row.status = f"{type(e).__name__}: {e}"
        far = near = None
    row.wall_time = time.perf_counter() - t0
    return row, far, near


def run_convergence(cfg: ExperimentConfig):
    """Solve at every resolution and tabulate errors and orders.

    With interior-source data the errors are measured against the exact
    field. With planewave data the last resolution is the reference.
    """
    far_grid = fields.far_grid(cfg.far_radius)
    near_grid = fields.near_cube_grid(cfg.near_half_side) if cfg.near_half_side else None
    exact = cfg.incident.field(cfg.k) if cfg.incident.exact else None
    rows, fars, nears = [], [], []
    for res in cfg.resolutions:
        row, far, near = _solve_row(cfg, res, far_grid.points, None if near_grid is None else near_grid.points)
        log.info("resolution %r: dof=%s iterations=%s status=%s", res, row.dof, row.iterations, row.status)
        rows.append(row)
        fars.append(far)
        nears.append(near)

    if exact is not None:
        ref_far = exact.value(far_grid.points)
        ref_near = exact.value(near_grid.points) if near_grid is not None else None
        scored = range(len(rows))
    else:
        ref_far, ref_near = fars[-1], nears[-1]
        scored = range(len(rows) - 1)
    for i in scored:
        if ref_far is not None and fars[i] is not None:
            rows[i].far_error = fields.relative_max_error(far_grid, fars[i], ref_far)
        if ref_near is not None and nears[i] is not None:
            rows[i].near_error = fields.relative_max_error(near_grid, nears[i], ref_near)
    hs = [r.h for r in rows]
    for name in ("far", "near"):
        vals = eoc(hs, [getattr(r, f"{name}_error") for r in rows])
        for r, v in zip(rows, vals):
            setattr(r, f"eoc_{name}", v)
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return CSV_FLOAT.format(v)
    return str(v)


def rows_to_csv(cfg: ExperimentConfig, rows) -> str:
    cols = ["resolution", "h", "dof", "far_error", "near_error", "eoc_far", "eoc_near", "iterations", "converged", "status"]
    if cfg.timings:
        cols.append("wall_time")
    buf = io.StringIO()
    buf.write("# provenance: " + json.dumps(provenance(cfg), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


# --------------------------------------------------------------------------
# single solve and near-field dump
# --------------------------------------------------------------------------
def run_solve(cfg: ExperimentConfig) -> dict:
    """Solve at the last configured resolution and report errors."""
    cfg1 = replace(cfg, resolutions=[cfg.resolutions[-1]])
    far_grid = fields.far_grid(cfg.far_radius)
    near_grid = fields.near_cube_grid(cfg.near_half_side) if cfg.near_half_side else None
    row, far, near = _solve_row(cfg1, cfg1.resolutions[0], far_grid.points,
                                None if near_grid is None else near_grid.points)
    if row.status == "ok" and cfg.incident.exact:
        exact = cfg.incident.field(cfg.k)
        row.far_error = fields.relative_max_error(far_grid, far, exact.value(far_grid.points))
        if near is not None:
            row.near_error = fields.relative_max_error(near_grid, near, exact.value(near_grid.points))
    out = {k: v for k, v in asdict(row).items() if k not in ("eoc_far", "eoc_near")}
    if not cfg.timings:
        out.pop("wall_time")
    return {"provenance": provenance(cfg), "result": out}


def run_nearfield(cfg: ExperimentConfig) -> str:
    """CSV dump of u^s (and the total field for planewave data) at the target points.

    Interior probe rows carry the extinction residual of the solution
    (Green representation with its own Cauchy data, which should vanish).
    """
    X = cfg.targets.build()
    cols = ["role", "x", "y", "z", "us_re", "us_im", "u_re", "u_im", "exact_re", "exact_im"]
    buf = io.StringIO()
    buf.write("# provenance: " + json.dumps(provenance(cfg), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    if X.shape[0] == 0:
        return buf.getvalue()
    case = discretize(cfg, cfg.resolutions[-1])
    case.solve()
    us = case.potential(X)
    f = cfg.incident.field(cfg.k)
    if cfg.incident.exact:
        u, ex = us, f.value(X)
    else:
        u, ex = us + f.value(X), np.full(X.shape[0], np.nan + 0j)
    for x, a, b, e in zip(X, us, u, ex):
        w.writerow(["target", *map(_fmt, map(float, x)), _fmt(a.real), _fmt(a.imag), _fmt(b.real), _fmt(b.imag),
                    _fmt(float(e.real)), _fmt(float(e.imag))])
    probes = case.interior_probes()
    res = case.extinction(probes)
    for x, r in zip(probes, res):
        w.writerow(["extinction", *map(_fmt, map(float, x)), _fmt(float(r.real)), _fmt(float(r.imag)), "", "", "0", "0"])
    return buf.getvalue()


# --------------------------------------------------------------------------
# interpolation check
# --------------------------------------------------------------------------
def run_interp_check(cfg: ExperimentConfig):
    """Residual report of the interpolation conditions at random anchors."""
    from pwdi.interpcheck import check_surface

    _require(cfg.method == "nystrom", "interp-check runs on parametric (nystrom) geometries")
    rep = check_surface(smooth_patches(cfg), cfg.incident.field(cfg.k), cfg.k, cfg.eta, cfg.M, cfg.interpolant,
                        cfg.n_anchors, cfg.seed)
    M = cfg.M
    cols = ["anchor", "x", "y", "z"]
    cols += [f"rho_order{d}" for d in range(M + 2)] + [f"rhon_order{d}" for d in range(M + 2)] + ["contact_slope"]
    buf = io.StringIO()
    buf.write("# provenance: " + json.dumps(provenance(cfg), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for i in range(rep.anchors.shape[0]):
        vals = [*rep.anchors[i], *rep.value_residual[i], *rep.normal_residual[i], rep.contact_slope[i]]
        w.writerow([i] + [_fmt(float(v)) for v in vals])
    summary = {"max_residual": rep.max_residual, "min_contact_slope": rep.min_slope, "order": M,
               "interpolant": cfg.interpolant, "n_anchors": int(rep.anchors.shape[0])}
    return buf.getvalue(), summary


__all__ = [
    "ConfigError", "ExperimentConfig", "IncidentSpec", "TargetSpec", "run_convergence",
    "run_interp_check", "run_nearfield", "run_solve", "rows_to_csv", "eoc", "eoc_fit", "config_from_provenance",
]
