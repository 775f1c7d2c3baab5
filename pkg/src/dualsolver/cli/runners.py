"""Dispatch a validated problem to the matching solver and write artifacts."""
from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .. import ellipticity as el
from .. import plasticity as pl
from .. import spacetime as st
from ..core_dual import (AlgebraicSystem, SolverOptions, base_state_continuation,
                         circle_line, solve_dual)
from ..errors import DualSolverError, SchemaError
from ..potential import AuxPotential
from ..spacetime.solver import write_field_csv

# closed set of run statuses: solver statuses plus the ellipticity verdict
RUN_STATUSES = ("converged", "max_iter", "dtp_failure", "stagnation", "not_certified")


@dataclass
class RunReport:
    kind: str
    system: str
    status: str
    iterations: int = 0
    outer_residual: float = float("nan")
    inner_residual_max: float = float("nan")
    seconds: float = 0.0
    artifacts: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.status not in RUN_STATUSES:
            raise ValueError(f"status {self.status!r} outside {RUN_STATUSES}")

    @property
    def converged(self):
        return self.status == "converged"

    def text(self):
        lines = [
            f"kind: {self.kind}",
            f"system: {self.system}",
            f"status: {self.status}",
            f"iterations: {self.iterations}",
            f"outer residual: {self.outer_residual:.3e}",
            f"inner residual max: {self.inner_residual_max:.3e}",
            f"time: {self.seconds:.3f} s",
        ]
        lines += self.notes
        lines += [f"artifact: {a}" for a in self.artifacts]
        return "\n".join(lines)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_rows(path, header, rows):
    """RFC-4180 CSV; floats as shortest round-trip decimals."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def solver_options(problem, overrides):
    s = dict(problem.get("solver", {}))
    s.update({k: v for k, v in overrides.items() if v is not None})
    opts = SolverOptions(seed=int(overrides.get("seed") or 0))
    if "tol_inner" in s:
        opts.tol_inner = float(s["tol_inner"])
    if "tol_outer" in s:
        opts.tol_outer = float(s["tol_outer"])
    if "max_iter" in s:
        opts.max_outer = int(s["max_iter"])
    if "max_inner" in s:
        opts.max_inner = int(s["max_inner"])
    return opts, s


def _vector(value, n, path):
    v = np.asarray(value, dtype=float)
    if v.ndim == 0:
        return np.full(n, float(v))
    if v.shape != (n,):
        raise SchemaError(f"expected {n} entries, got {v.size}", path)
    return v


# algebraic ------------------------------------------------------------------------

def run_algebraic(problem, out, opts, settings):
    params = problem["system"]
    if params["name"] == "circle_line":
        sys = circle_line(params.get("alpha", 0.0))
    else:
        A = np.asarray(params["matrix"], dtype=float)
        b = np.asarray(params["rhs"], dtype=float)
        if A.ndim != 2 or b.shape != (A.shape[0],):
            raise SchemaError("matrix must be N x n and rhs of length N", "system/matrix")
        sys = AlgebraicSystem.linear(A, b)
    potd = problem.get("potential", {})
    base = potd.get("base", "zero")
    if isinstance(base, str):
        if base != "zero":
            raise SchemaError("algebraic base must be an array or 'zero'", "potential/base")
        base = np.zeros(sys.n)
    if isinstance(potd.get("a"), dict) or isinstance(potd.get("b"), dict):
        raise SchemaError("algebraic weights must be numbers or arrays", "potential/a")
    pot = AuxPotential(a=_vector(potd.get("a", 1.0), sys.n, "potential/a"),
                       b=_vector(potd.get("b", 0.0), sys.n, "potential/b"),
                       p=potd.get("p", 4.0), base=_vector(base, sys.n, "potential/base"))
    rounds = int(settings.get("continuation_rounds", 1))
    if rounds > 1:
        rep = base_state_continuation(sys, pot, rounds, opts)
    else:
        z0 = settings.get("z0")
        z0 = None if z0 is None else _vector(z0, sys.N, "solver/z0")
        rep = solve_dual(sys, pot, z0, opts)
    arts = [write_rows(os.path.join(out, "primal.csv"), ["index", "x"], enumerate(rep.primal)),
            write_rows(os.path.join(out, "dual.csv"), ["index", "z"], enumerate(rep.z))]
    return RunReport("algebraic", params["name"], rep.status.value, rep.outer_iterations,
                     rep.dual_gradient_norm, rep.inner_residual_max, artifacts=arts)


# pde ------------------------------------------------------------------------------

def run_pde(problem, out, opts, settings):
    params = dict(problem["system"])
    name = params.pop("name")
    allowed = {"transport": {"c", "x_min", "x_max"}, "heat": {"kappa", "mode", "x_min", "x_max"},
               "burgers": {"x_min", "x_max"}}[name]
    for key in params:
        if key not in allowed:
            raise SchemaError(f"parameter not used by {name}", f"system/{key}")
    sys = st.BUILTINS[name](**params)
    g = problem["grid"]
    grid = st.SpaceTimeGrid(g.get("x_min", params.get("x_min", 0.0)),
                            g.get("x_max", params.get("x_max", 1.0)), g["T"], g["nx"], g["nt"],
                            quad_order=g.get("quad_order", 2))
    potd = problem.get("potential", {})
    base = potd.get("base", "initial")
    if base == "exact":
        if sys.exact is None:
            raise SchemaError(f"{name} has no exact solution", "potential/base")
        field_ = sys.exact
    elif base == "initial":
        field_ = lambda x, t: sys.U0(x)
    elif base == "zero":
        field_ = lambda x, t: np.zeros(np.shape(x) + (sys.N,))
    else:
        const = _vector(base, sys.N, "potential/base")
        field_ = lambda x, t: np.broadcast_to(const, np.shape(x) + (sys.N,))
    for key in ("a", "b"):
        if isinstance(potd.get(key), dict):
            raise SchemaError("pde weights must be numbers or arrays", f"potential/{key}")
    pot = st.PdeAuxPotential(a=_vector(potd.get("a", 1.0), sys.N, "potential/a"),
                             b=_vector(potd.get("b", 0.0), sys.N, "potential/b"),
                             p=potd.get("p", 4.0), base=field_)
    bc = None
    if "dual_bc" in problem:
        dbc = problem["dual_bc"]
        values = {(v["row"], v["side"]): v["value"] for v in dbc.get("values", [])}
        bc = st.DualBC(pins=dbc.get("pins", {}), values=values)
        for row, side in values:
            if not bc.pinned(side, row):
                raise SchemaError(f"value given for unpinned row {row} on {side}",
                                  "dual_bc/values")
    try:
        sys.validate(bc if bc is not None else sys.dual_bc)
    except ValueError as exc:
        raise SchemaError(str(exc), "dual_bc") from exc
    state, prim, rep = st.solve_dual_field(sys, pot, grid, bc, opts)
    nodes = grid.nodes
    Un = st.project_to_nodes(grid, prim.U)
    arts = [os.path.join(out, "primal.csv"), os.path.join(out, "dual.csv")]
    write_field_csv(arts[0], nodes[:, 0], nodes[:, 1], Un)
    st.export_dual_csv(arts[1], state)
    notes = [f"backend: {rep.backend}", f"|D|inf: {rep.D_inf:.3e}"]
    if sys.exact is not None:
        notes.append(f"L2 error vs exact: {prim.l2_error(sys.exact):.6e}")
    return RunReport("pde", name, rep.status.value, rep.iterations, rep.gradient_norm,
                     rep.inner_residual_max, artifacts=arts, notes=notes)


# ellipticity ----------------------------------------------------------------------

def run_ellipticity(problem, out, opts, settings):
    params = dict(problem["system"])
    name = params.pop("name")
    scan = problem["scan"]
    a = scan.get("a", problem.get("potential", {}).get("a", 1.0))
    if isinstance(a, (list, dict)):
        raise SchemaError("ellipticity weight must be a number", "scan/a")
    kw = {"a": float(a)}
    if name == "transport" and "c" in params:
        kw["c"] = params.pop("c")
    for key in params:
        raise SchemaError(f"parameter not used by {name}", f"system/{key}")
    sys = el.BUILTINS[name](**kw)
    base = _vector(scan.get("base", np.zeros(sys.N)), sys.N, "scan/base")
    rng = np.random.default_rng(opts.seed)
    res = el.neighborhood_scan(sys, base, scan.get("radius", 0.0), scan.get("samples", 100), rng)
    rows = [(i, r.M_min_eig, r.A_min_eig, r.psd_certified, r.error or "")
            for i, r in enumerate(res.reports)]
    arts = [write_rows(os.path.join(out, "ellipticity.csv"),
                       ["sample", "M_min_eig", "A_min_eig", "certified", "error"], rows)]
    failures = res.mpd_failures
    status = ("converged" if res.all_certified
              else "dtp_failure" if failures else "not_certified")
    notes = [f"certified: {sum(r.psd_certified for r in res.reports)}/{len(res.reports)}",
             f"MPDLoss rows: {len(failures)}"]
    worst = min((r.A_min_eig for r in res.reports if np.isfinite(r.A_min_eig)), default=np.nan)
    notes.append(f"worst A_min_eig: {worst:.3e}")
    return RunReport("ellipticity", name, status, len(res.reports), artifacts=arts, notes=notes)


# plasticity -----------------------------------------------------------------------

def _plastic_model(kind, params):
    params = dict(params)
    name = params.pop("name")
    angle = params.pop("slip_angle", np.pi / 3)
    geom = (pl.SlipGeometry.single() if name == "single_slip"
            else pl.SlipGeometry.planar_double(angle))
    Model = pl.RateDependentModel if kind == "plasticity_rd" else pl.RateIndependentModel
    allowed = {"lam", "mu", "h0", "q_lat"} | ({"rho0", "r0", "m_rate"} if kind == "plasticity_rd"
                                              else set())
    for key in params:
        if key not in allowed:
            raise SchemaError(f"parameter not used by {kind}", f"system/{key}")
    return Model(geometry=geom, **params), name


def run_plasticity(problem, out, opts, settings):
    kind = problem["kind"]
    model, name = _plastic_model(kind, problem["system"])
    layout = pl.layout_for(model)
    potd = problem.get("potential", {})
    base = potd.get("base", {})
    if isinstance(base, dict):
        try:
            Ubar = pl.default_base(model, **base)
        except ValueError as exc:
            raise SchemaError(str(exc), "potential/base") from exc
    elif isinstance(base, str):
        raise SchemaError("plasticity base must be an array or {shear, g}", "potential/base")
    else:
        Ubar = _vector(base, layout.size, "potential/base")
    weights = {}
    for key in ("a", "b"):
        w = potd.get(key, {})
        if isinstance(w, list):
            raise SchemaError("plasticity weights are given per block", f"potential/{key}")
        weights[key] = ({blk: float(w) for blk in layout.blocks}
                        if isinstance(w, (int, float)) else dict(w))
    try:
        pot = pl.PlasticAuxPotential(layout, Ubar, weights["a"], weights["b"], potd.get("p", 4.0))
    except ValueError as exc:
        raise SchemaError(str(exc), "potential") from exc
    duals = []
    for i, pt in enumerate(problem.get("points", [])):
        try:
            duals.append(pl.DualPointValue(layout.kind, model.nslip,
                                           {k: np.asarray(v, dtype=float) for k, v in pt.items()}))
        except ValueError as exc:
            raise SchemaError(str(exc), f"points/{i}") from exc
    if "random_points" in problem:
        rp = problem["random_points"]
        rng = np.random.default_rng(opts.seed)
        duals += [pl.random_dual(layout.kind, model.nslip, rng, rp["scale"])
                  for _ in range(rp["count"])]
    if not duals:
        duals = [pl.DualPointValue.zeros(layout.kind, model.nslip)]
    nd = duals[0].flat().size
    header = (["point"] + [f"D{k}" for k in range(nd)] + [f"U{k}" for k in range(layout.size)]
              + ["iterations", "residual", "min_eig", "jacobian_asymmetry", "det_P_drift",
                 "error"])
    rows, status, iters, inner = [], "converged", 0, 0.0
    for i, D in enumerate(duals):
        try:
            U, rep = pl.dtp_solve(model, pot, D, tol=opts.tol_inner, max_iter=opts.max_inner)
        except DualSolverError as exc:
            status = "dtp_failure"
            rows.append([i, *D.flat(), *([None] * layout.size), None, None,
                         getattr(exc, "min_eig", None), None, None,
                         f"{type(exc).__name__}: {exc}"])
            continue
        iters = max(iters, rep.iterations)
        inner = max(inner, rep.residual_norm)
        rows.append([i, *D.flat(), *U, rep.iterations, rep.residual_norm, rep.min_eig,
                     rep.jacobian_asymmetry, rep.det_P_drift, ""])
    arts = [write_rows(os.path.join(out, "points.csv"), header, rows)]
    notes = [f"points: {len(duals)}", f"layout: {', '.join(layout.blocks)}"]
    return RunReport(kind, name, status, iters, inner, inner, artifacts=arts, notes=notes)


RUNNERS = {
    "algebraic": run_algebraic,
    "pde": run_pde,
    "ellipticity": run_ellipticity,
    "plasticity_rd": run_plasticity,
    "plasticity_ri": run_plasticity,
}


def run_problem(problem, out, overrides=None):
    overrides = overrides or {}
    os.makedirs(out, exist_ok=True)
    opts, settings = solver_options(problem, overrides)
    t0 = time.perf_counter()
    report = RUNNERS[problem["kind"]](problem, out, opts, settings)
    report.seconds = time.perf_counter() - t0
    path = os.path.join(out, "report.txt")
    report.artifacts.append(path)
    with open(path, "w") as fh:
        fh.write(report.text() + "\n")
    return report
