"""Experiment configuration, benchmark fields, sweeps and report emission."""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from . import schwarz
from .assembly import apply_dirichlet, assemble_load
from .coarse import SkeletonOperators, build_coarse_space, coarse_interpolate, \
    verify_stable_decomposition
from .errors import NumericalError, UsageError
from .mesh import Rect, build_coefficient_field, build_structured_mesh, \
    load_raster_field, read_raster_csv
from .partition import build_partition, build_partition_of_unity, extend_overlap

COARSE_TYPES = ("ms", "shem", "nshem-alt", "nshem-sin", "nshem-hier", "ohem")


# -- configuration ---------------------------------------------------------

class MeshConfig(BaseModel):
    n: int = Field(ge=2)


class PartitionConfig(BaseModel):
    H_cells: int = Field(ge=1)
    delta_layers: int = Field(default=2, ge=0)


class AdaptiveConfig(BaseModel):
    tau: float = Field(default=1.0 / 32.0, gt=0)
    min_one: bool = True
    laplacian_relative: bool = False


class CoarseConfig(BaseModel):
    type: Literal["ms", "shem", "nshem-alt", "nshem-sin", "nshem-hier", "ohem"] = "ms"
    m: int = Field(default=0, ge=0)
    adaptive: Optional[AdaptiveConfig] = None


class SolverConfig(BaseModel):
    tol: float = 1e-6
    maxit: int = Field(default=2000, ge=1)

    @model_validator(mode="after")
    def _check_tol(self):
        if not (0.0 < self.tol < 1.0):
            raise ValueError("solver.tol must lie in (0, 1)")
        return self


class InclusionSpec(BaseModel):
    x0: float
    y0: float
    x1: float
    y1: float
    value: Union[float, Literal["contrast"]] = "contrast"


class BenchmarkSpec(BaseModel):
    name: Literal["channels", "inclusions-crossing", "checker"]
    params: dict = Field(default_factory=dict)


class AlphaConfig(BaseModel):
    background: float = Field(default=1.0, gt=0)
    inclusions: list[InclusionSpec] = Field(default_factory=list)
    raster_path: Optional[str] = None
    contrast: float = Field(default=1.0, ge=1.0)
    benchmark: Optional[BenchmarkSpec] = None


class SweepConfig(BaseModel):
    contrast: Optional[list[float]] = None
    m: Optional[list[int]] = None
    delta: Optional[list[int]] = None
    type: Optional[list[Literal["ms", "shem", "nshem-alt", "nshem-sin",
                                "nshem-hier", "ohem"]]] = None

    @model_validator(mode="after")
    def _check_values(self):
        if self.contrast is not None and any(c < 1.0 for c in self.contrast):
            raise ValueError("sweep.contrast values must be >= 1")
        if self.delta is not None and any(d < 0 for d in self.delta):
            raise ValueError("sweep.delta values must be >= 0")
        return self


class ExperimentConfig(BaseModel):
    mesh: MeshConfig
    partition: PartitionConfig
    alpha: AlphaConfig = Field(default_factory=AlphaConfig)
    coarse: CoarseConfig = Field(default_factory=CoarseConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    sweep: Optional[SweepConfig] = None

    @model_validator(mode="after")
    def _check_divisibility(self):
        if self.mesh.n % self.partition.H_cells != 0:
            raise ValueError(
                f"mesh.n={self.mesh.n} is not divisible by partition.H_cells={self.partition.H_cells}")
        return self


def parse_config(text):
    """Parse and validate a JSON experiment configuration."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON: {exc}") from exc
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise UsageError(f"config field {loc or '<root>'}: {first['msg']}") from exc


class ResultRow(BaseModel):
    method: str
    m: int
    contrast: float
    delta: int
    coarse_dim: int
    iterations: int
    kappa: float
    lambda_m_plus_1: Optional[float] = None  # None encodes "all modes included"
    final_relres: float
    converged: bool
    error: Optional[str] = None


# -- benchmark coefficient geometries --------------------------------------

def benchmark_field(name, params):
    """Parameterized stand-ins for high-contrast benchmark geometries.

    Returns a list of InclusionSpec with value "contrast". All geometries
    need mesh/partition context via params n and H_cells.
    """
    params = dict(params)
    try:
        n = int(params["n"])
        H = int(params["H_cells"])
    except KeyError as exc:
        raise UsageError(f"benchmark field needs parameter {exc.args[0]!r}") from exc
    h = 1.0 / n
    ns = n // H
    rects = []
    if name == "channels":
        c = int(params.get("count", 3))
        per_band = bool(params.get("per_band", False))
        margin = int(params.get("margin", 0))
        stagger = bool(params.get("stagger", False))
        if c < 0:
            raise UsageError("channel count must be nonnegative")

        def span(idx):
            # margin > 0 keeps channels away from the Dirichlet boundary
            # (floating); staggering varies their lengths so no two are alike
            lm = margin + 3 * (idx % 4) if stagger else margin
            rm = margin + 3 * ((idx + 2) % 5) if stagger else margin
            return lm * h, 1.0 - rm * h

        if per_band:
            # c channels inside every subdomain row band: each vertical
            # interface is crossed by exactly c channels
            idx = 0
            for band in range(ns):
                for j in range(c):
                    start = band * H + (j + 1) * H // (c + 1) - 1
                    x0, x1 = span(idx)
                    rects.append((x0, start * h, x1, (start + 2) * h))
                    idx += 1
        else:
            for j in range(1, c + 1):
                start = round(j * n / (c + 1)) - 1
                x0, x1 = span(j - 1)
                rects.append((x0, start * h, x1, (start + 2) * h))
    elif name == "inclusions-crossing":
        sizes = [int(s) for s in params.get("sizes", (2, 4, 6))]
        if any(s < 1 for s in sizes):
            raise UsageError("inclusion sizes must be positive cell counts")
        # squares of the given side lengths straddling every vertical interface
        for bx in range(1, ns):
            X = bx * H
            for band in range(ns):
                for k, s in enumerate(sizes):
                    cy = band * H + (k + 1) * H // (len(sizes) + 1)
                    half = s / 2.0
                    rects.append(((X - half) * h, (cy - half) * h,
                                  (X + half) * h, (cy + half) * h))
    elif name == "checker":
        for by in range(ns):
            for bx in range(ns):
                if (bx + by) % 2 == 1:
                    rects.append((bx * H * h, by * H * h, (bx + 1) * H * h, (by + 1) * H * h))
    else:
        raise UsageError(f"unknown benchmark field {name!r}")
    return [InclusionSpec(x0=x0, y0=y0, x1=x1, y1=y1, value="contrast")
            for (x0, y0, x1, y1) in rects]


def resolve_field(config, mesh, contrast):
    """Build the coefficient field for one sweep point."""
    alpha = config.alpha
    if alpha.raster_path is not None:
        return load_raster_field(mesh, read_raster_csv(alpha.raster_path))
    specs = list(alpha.inclusions)
    if alpha.benchmark is not None:
        params = dict(alpha.benchmark.params)
        params.setdefault("n", config.mesh.n)
        params.setdefault("H_cells", config.partition.H_cells)
        specs = list(benchmark_field(alpha.benchmark.name, params)) + specs
    rects = [Rect(s.x0, s.y0, s.x1, s.y1,
                  contrast if s.value == "contrast" else float(s.value))
             for s in specs]
    return build_coefficient_field(mesh, alpha.background, rects)


# -- sweep execution -------------------------------------------------------

class RunContext:
    """Caches shared across the points of one sweep (single-threaded build)."""

    def __init__(self, config):
        self.config = config
        self.mesh = build_structured_mesh(config.mesh.n)
        self.partition = build_partition(self.mesh, config.partition.H_cells)
        self._ops = {}
        self._overlap = {}
        self._coarse = {}

    def ops(self, contrast):
        if contrast not in self._ops:
            field = resolve_field(self.config, self.mesh, contrast)
            self._ops[contrast] = SkeletonOperators(self.mesh, field, self.partition)
        return self._ops[contrast]

    def overlap(self, delta):
        if delta not in self._overlap:
            self._overlap[delta] = extend_overlap(self.partition, delta)
        return self._overlap[delta]

    def coarse(self, contrast, type_, m):
        key = (contrast, type_, m)
        if key not in self._coarse:
            adaptive = None
            if type_ == "shem" and self.config.coarse.adaptive is not None:
                adaptive = self.config.coarse.adaptive.model_dump()
            self._coarse[key] = build_coarse_space(self.ops(contrast), type_, m, adaptive)
        return self._coarse[key]


def method_name(config, type_):
    if type_ == "shem" and config.coarse.adaptive is not None:
        return "shem-adapt"
    return type_


def prepare_point(ctx, type_, m, delta, contrast):
    """Everything up to (but excluding) the Krylov solve for one point."""
    config = ctx.config
    ops = ctx.ops(contrast)
    system = apply_dirichlet(ops.A_full, assemble_load(ctx.mesh, 1.0), ctx.mesh)
    coarse_space = ctx.coarse(contrast, type_, m)
    overlap = ctx.overlap(delta)
    local_sets = [system.global_to_interior[s] for s in overlap.node_sets]
    R0 = coarse_space.vectors[:, system.interior_nodes]
    P = schwarz.build_preconditioner(system.A, local_sets, R0, mode="two-level")
    return system, coarse_space, P


def solve_point(ctx, type_, m, delta, contrast):
    config = ctx.config
    system, coarse_space, P = prepare_point(ctx, type_, m, delta, contrast)
    x, report = schwarz.pcg(system.A, P, system.b,
                            tol=config.solver.tol, maxit=config.solver.maxit)
    lam = coarse_space.lambda_m_plus_1
    return ResultRow(
        method=method_name(config, type_),
        m=m, contrast=contrast, delta=delta,
        coarse_dim=coarse_space.dim,
        iterations=report.iterations,
        kappa=report.kappa_estimate,
        lambda_m_plus_1=None if math.isinf(lam) else lam,
        final_relres=report.final_relres,
        converged=report.converged,
    ), x, report


def sweep_points(config):
    sweep = config.sweep or SweepConfig()
    types = sweep.type or [config.coarse.type]
    ms = sweep.m or [config.coarse.m]
    deltas = sweep.delta if sweep.delta is not None else [config.partition.delta_layers]
    contrasts = sweep.contrast or [config.alpha.contrast]
    return [(t, m, d, c) for t in types for m in ms for d in deltas for c in contrasts]


def run_sweep(config, threads=1):
    """Execute the Cartesian product of the sweep lists; one row per point.

    Failures are recorded per row and do not abort the sweep.
    """
    ctx = RunContext(config)
    points = sweep_points(config)

    def one(point):
        type_, m, d, c = point
        try:
            row, _, _ = solve_point(ctx, type_, m, d, c)
            return row
        except Exception as exc:  # per-row failure capture
            return ResultRow(method=method_name(config, type_), m=m, contrast=c,
                             delta=d, coarse_dim=0, iterations=0, kappa=0.0,
                             lambda_m_plus_1=None, final_relres=1.0,
                             converged=False, error=str(exc))

    if threads <= 1 or len(points) <= 1:
        return [one(p) for p in points]
    # warm the shared caches sequentially, then solve in parallel
    for type_, m, d, c in points:
        try:
            ctx.ops(c)
            ctx.coarse(c, type_, m)
            ctx.overlap(d)
        except Exception:
            pass  # the per-point runner reports the failure in its row
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, points))


def spectrum_rows(config):
    """Interface eigenvalue dump: one row (interface_id, k, lambda) per mode."""
    ctx = RunContext(config)
    ops = ctx.ops(config.alpha.contrast)
    rows = []
    for t in range(len(ctx.partition.interfaces)):
        for k, lam in enumerate(ops.spectrum(t).eigenvalues, start=1):
            rows.append((t, k, float(lam)))
    return rows


# -- report emission -------------------------------------------------------

def format_sci(x):
    """Three-significant-digit scientific notation, e.g. 3.64e6."""
    if x is None or math.isinf(x):
        return "inf"
    if x == 0.0:
        return "0"
    e = int(math.floor(math.log10(abs(x))))
    mant = x / 10.0 ** e
    if round(abs(mant), 2) >= 10.0:  # rounding pushed into the next decade
        mant /= 10.0
        e += 1
    return f"{mant:.2f}e{e}"


CSV_HEADER = "method,m,contrast,delta,coarse_dim,iterations,kappa,lambda_m_plus_1,final_relres,converged"


def emit_report(rows, fmt="csv"):
    if fmt == "csv":
        lines = [CSV_HEADER]
        for r in rows:
            lines.append(",".join([
                r.method, str(r.m), f"{r.contrast:g}", str(r.delta),
                str(r.coarse_dim), str(r.iterations), format_sci(r.kappa),
                format_sci(r.lambda_m_plus_1), f"{r.final_relres:.3e}",
                "true" if r.converged else "false",
            ]))
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = [
            "| method | m | contrast | delta | dim. | #it. (kappa) | lambda_m+1 |",
            "|---|---|---|---|---|---|---|",
        ]
        for r in rows:
            cell = f"{r.iterations} ({format_sci(r.kappa)})" if r.converged \
                else f"{r.iterations} ({format_sci(r.kappa)})*"
            lines.append(f"| {r.method} | {r.m} | {r.contrast:g} | {r.delta} "
                         f"| {r.coarse_dim} | {cell} | {format_sci(r.lambda_m_plus_1)} |")
        return "\n".join(lines) + "\n"
    raise UsageError(f"unknown report format {fmt!r}")


def emit_spectrum(rows):
    lines = ["interface_id,k,lambda"]
    for t, k, lam in rows:
        lines.append(f"{t},{k},{lam:.12e}")
    return "\n".join(lines) + "\n"


# -- invariant check suite -------------------------------------------------

def _check_config(n=16, H=4, contrast=1e4):
    return ExperimentConfig(
        mesh=MeshConfig(n=n),
        partition=PartitionConfig(H_cells=H, delta_layers=2),
        alpha=AlphaConfig(contrast=contrast,
                          benchmark=BenchmarkSpec(name="channels",
                                                  params={"count": 1, "per_band": True})),
        coarse=CoarseConfig(type="shem", m=2),
    )


def run_checks(seed=0):
    """Randomized invariant suite; returns (all_passed, list of check dicts)."""
    rng = np.random.default_rng(seed)
    results = []

    def record(name, passed, detail=""):
        results.append({"name": name, "passed": bool(passed), "detail": detail})

    config = _check_config()
    ctx = RunContext(config)
    ops = ctx.ops(config.alpha.contrast)

    # interface projection: contraction, Pythagoras, approximation bound
    worst = 0.0
    for t in range(len(ctx.partition.interfaces)):
        spec = ops.spectrum(t)
        M = spec.bdiag.shape[0]
        m = min(2, M)
        for _ in range(50):
            v = rng.standard_normal(M)
            coeff = spec.eigenvectors[:, :m].T @ (spec.bdiag * v)
            pv = spec.eigenvectors[:, :m] @ coeff
            a = lambda w: float(w @ (spec.abar @ w))
            slack = a(pv) + a(v - pv) - a(v)
            worst = max(worst, abs(slack) / max(a(v), 1e-300))
            if m < M:
                lhs = float((v - pv) @ (spec.bdiag * (v - pv)))
                rhs = a(v - pv) / spec.eigenvalues[m]
                worst = max(worst, (lhs - rhs) / max(rhs, 1e-300))
    record("interface-projection", worst <= 1e-10, f"worst slack {worst:.2e}")

    # partition of unity sums to one on interior nodes
    pou = build_partition_of_unity(ctx.partition, ctx.overlap(2))
    total = np.zeros(ctx.mesh.n_nodes)
    for nodes, theta in zip(pou.node_sets, pou.values):
        total[nodes] += theta
    interior = ctx.mesh.interior_nodes
    err = float(np.abs(total[interior] - 1.0).max())
    record("partition-of-unity", err == 0.0, f"max error {err:.2e}")

    # coarse basis is discrete harmonic and vanishes on the boundary
    coarse_space = ctx.coarse(config.alpha.contrast, "shem", 2)
    from .coarse import harmonicity_residual
    scale = abs(ops.A_full).max()
    res = max(harmonicity_residual(ops, v) for v in coarse_space.vectors)
    bnd = max(float(np.abs(v[ctx.mesh.boundary_mask]).max()) for v in coarse_space.vectors)
    record("coarse-harmonicity", res <= 1e-10 * scale and bnd == 0.0,
           f"residual {res:.2e}, boundary {bnd:.2e}")

    # preconditioner application is symmetric
    system, _, P = prepare_point(ctx, "shem", 2, 2, config.alpha.contrast)
    ok = True
    for _ in range(5):
        r1 = rng.standard_normal(system.n_dofs)
        r2 = rng.standard_normal(system.n_dofs)
        s1 = float(r1 @ schwarz.apply_preconditioner(P, r2))
        s2 = float(r2 @ schwarz.apply_preconditioner(P, r1))
        ok = ok and abs(s1 - s2) <= 1e-12 * max(abs(s1), abs(s2), 1e-300)
    record("preconditioner-symmetry", ok)

    # PCG solution agrees with a sparse direct solve
    from . import linalg
    x, report = schwarz.pcg(system.A, P, system.b, tol=1e-6)
    xd = linalg.spd_solve(linalg.spd_factorize(system.A), system.b)
    d = x - xd
    err = math.sqrt(max(float(d @ (system.A @ d)), 0.0) / float(xd @ (system.A @ xd)))
    record("pcg-direct-agreement", report.converged and err <= 1e-5,
           f"relative A-norm error {err:.2e}")

    # coarse interpolation is idempotent
    u = np.zeros(ctx.mesh.n_nodes)
    u[interior] = rng.standard_normal(interior.shape[0])
    i0 = coarse_interpolate(ops, coarse_space, u)
    i00 = coarse_interpolate(ops, coarse_space, i0)
    err = float(np.abs(i0 - i00).max()) / max(float(np.abs(i0).max()), 1e-300)
    record("idempotent-interpolation", err <= 1e-10, f"relative error {err:.2e}")

    # stable decomposition ratio against the spectral bound
    _, _, ratio = verify_stable_decomposition(ops, coarse_space, pou, u)
    lam = coarse_space.lambda_m_plus_1
    bound = 100.0 * (1.0 + (0.0 if math.isinf(lam) else 1.0 / lam))
    record("stable-decomposition", ratio <= bound, f"ratio {ratio:.2f}, bound {bound:.2f}")

    return all(r["passed"] for r in results), results
