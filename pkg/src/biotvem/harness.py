"""Manufactured solution of Example 1, error evaluation, EOC and study driver."""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .basis import n_monomials
from .coupling import Discretization, LoadData, assemble, discretize
from .exceptions import BiotVemError, ConfigurationError
from .mesh import export_mesh, example1_rule, generate_cube_mesh, import_mesh, tag_boundaries
from .params import ModelParams
from .solver import SolverConfig, divergence_norm, solve

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


# ------------------------------------------------------------ manufactured


@dataclass
class ManufacturedCase:
    """Closed-form fields and derived data.

    Bulk callables take (N, 3) points.  Surface callables take (N, 2) points
    in the Σ frame (here x_1, x_2 on the plane x_3 = 1).  ``traction`` and
    ``sigma_traction`` take ``(x, n)``.
    """

    params: ModelParams
    u: Callable
    grad_u: Callable
    lap_u: Callable
    div_u: Callable
    p: Callable
    grad_p: Callable
    f: Callable
    w: Callable
    grad_w: Callable
    hess_w: Callable
    phi: Callable
    grad_phi: Callable
    lap_phi: Callable
    bilap_w: Callable
    g: Callable
    m: Callable
    sigma: Callable
    traction: Callable
    sigma_traction: Callable
    sigma_flux: Callable
    lift: Callable = field(repr=False, default=None)

    def load_data(self) -> LoadData:
        return LoadData(
            f=self.f, g=self.g, m=self.m, traction=self.traction, sigma_traction=self.sigma_traction,
            sigma_flux=self.sigma_flux, u_bc=self.u, div_u=self.div_u, phi_bc=self.phi,
            w_bc=self.w, w_grad_bc=self.grad_w,
        )


def lift_to_sigma(xi):
    """Σ-frame points (x_1, x_2) to bulk points on the plane x_3 = 1."""
    xi = np.atleast_2d(xi)
    return np.column_stack([xi[:, 0], xi[:, 1], np.ones(len(xi))])


def build_case(params: ModelParams, *, u, grad_u, lap_u, div_u, p, grad_p, w, grad_w, hess_w, bilap_w,
               phi, grad_phi, lap_phi) -> ManufacturedCase:
    """Derive loads and interface data from closed-form fields with Σ = {x_3 = 1}.

    ``f = (ρ_f/τ)u − μΔu + ∇p``, ``g = (c_0/τ)φ − (α/τ)Δw − κΔφ`` and
    ``m = (ρ_p/τ²)w + DΔ²w + αΔφ + φ`` (plate load with the normal stress
    replaced by φ).  The Σ traction and flux loads make the interface
    equations hold for fields that are not transmission-consistent.
    """
    P = params
    n_sig = np.array([0.0, 0.0, 1.0])

    def f(x):
        return (P.rho_f / P.tau) * u(x) - P.mu * lap_u(x) + grad_p(x)

    def sigma(x):
        return P.mu * grad_u(x) - p(x)[:, None, None] * np.eye(3)

    def traction(x, n):
        return np.einsum("qij,qj->qi", sigma(x), np.atleast_2d(n))

    def lap_w(xi):
        return np.trace(hess_w(xi), axis1=1, axis2=2)

    def g(xi):
        return (P.c0 / P.tau) * phi(xi) - (P.alpha / P.tau) * lap_w(xi) - P.kappa * lap_phi(xi)

    def m(xi):
        return (P.rho_p / P.tau**2) * w(xi) + P.D * bilap_w(xi) + P.alpha * lap_phi(xi) + phi(xi)

    def sigma_traction(x, n):
        n = np.atleast_2d(n)
        uu = u(x)
        un = np.sum(uu * n, axis=1)
        ph = phi(x[:, :2])
        return traction(x, n) + P.gamma * (uu - un[:, None] * n) + ph[:, None] * n

    def sigma_flux(xi):
        return u(lift_to_sigma(xi)) @ n_sig - w(xi) / P.tau

    return ManufacturedCase(
        params=P, u=u, grad_u=grad_u, lap_u=lap_u, div_u=div_u, p=p, grad_p=grad_p, f=f, w=w, grad_w=grad_w,
        hess_w=hess_w, phi=phi, grad_phi=grad_phi, lap_phi=lap_phi, bilap_w=bilap_w, g=g, m=m, sigma=sigma,
        traction=traction, sigma_traction=sigma_traction, sigma_flux=sigma_flux, lift=lift_to_sigma,
    )


def example1_case(params: ModelParams | None = None) -> ManufacturedCase:
    """Example 1 on the unit cube with Σ = {x_3 = 1} and n_Σ = e_3.

    u = (cos x_3 sin x_2, cos x_1 sin x_3, cos x_2 sin x_1),
    p = sin 2πx_1 sin 2πx_2, w = u · n_Σ and φ = −(σ n_Σ) · n_Σ = p on Σ.
    """
    P = params or ModelParams()

    def cols(x):
        x = np.atleast_2d(x)
        return x[:, 0], x[:, 1], x[:, 2]

    def u(x):
        a, b, c = cols(x)
        return np.column_stack([np.cos(c) * np.sin(b), np.cos(a) * np.sin(c), np.cos(b) * np.sin(a)])

    def grad_u(x):
        a, b, c = cols(x)
        J = np.zeros((len(a), 3, 3))
        J[:, 0, 1] = np.cos(c) * np.cos(b)
        J[:, 0, 2] = -np.sin(c) * np.sin(b)
        J[:, 1, 0] = -np.sin(a) * np.sin(c)
        J[:, 1, 2] = np.cos(a) * np.cos(c)
        J[:, 2, 0] = np.cos(b) * np.cos(a)
        J[:, 2, 1] = -np.sin(b) * np.sin(a)
        return J

    def lap_u(x):
        return -2.0 * u(x)

    def div_u(x):
        return np.zeros(len(np.atleast_2d(x)))

    def p(x):
        a, b, _ = cols(x)
        return np.sin(TWO_PI * a) * np.sin(TWO_PI * b)

    def grad_p(x):
        a, b, _ = cols(x)
        return np.column_stack([
            TWO_PI * np.cos(TWO_PI * a) * np.sin(TWO_PI * b),
            TWO_PI * np.sin(TWO_PI * a) * np.cos(TWO_PI * b),
            np.zeros_like(a),
        ])

    def w(xi):
        return u(lift_to_sigma(xi))[:, 2]

    def grad_w(xi):
        xi = np.atleast_2d(xi)
        a, b = xi[:, 0], xi[:, 1]
        return np.column_stack([np.cos(a) * np.cos(b), -np.sin(a) * np.sin(b)])

    def hess_w(xi):
        xi = np.atleast_2d(xi)
        a, b = xi[:, 0], xi[:, 1]
        H = np.empty((len(a), 2, 2))
        H[:, 0, 0] = -np.sin(a) * np.cos(b)
        H[:, 1, 1] = -np.sin(a) * np.cos(b)
        H[:, 0, 1] = H[:, 1, 0] = -np.cos(a) * np.sin(b)
        return H

    def bilap_w(xi):
        return 4.0 * w(xi)

    def phi(xi):
        # −(σ n)·n = p − μ ∂_3 u_3 and u_3 does not depend on x_3
        X = lift_to_sigma(xi)
        return p(X) - P.mu * grad_u(X)[:, 2, 2]

    def grad_phi(xi):
        return grad_p(lift_to_sigma(xi))[:, :2]

    def lap_phi(xi):
        return -2.0 * TWO_PI**2 * p(lift_to_sigma(xi))

    return build_case(
        P, u=u, grad_u=grad_u, lap_u=lap_u, div_u=div_u, p=p, grad_p=grad_p, w=w, grad_w=grad_w, hess_w=hess_w,
        bilap_w=bilap_w, phi=phi, grad_phi=grad_phi, lap_phi=lap_phi,
    )


# ------------------------------------------------------------------ errors


@dataclass
class ErrorReport:
    h_bulk: float
    h_plate: float
    e_u: float
    e_p: float
    e_w: float
    e_phi: float
    iterations: int = 0

    @property
    def e_total(self):
        """Sum of the four field errors."""
        return self.e_u + self.e_p + self.e_w + self.e_phi

    @property
    def e_total_rss(self):
        """Root-sum-square of the field errors (diagnostic)."""
        return math.sqrt(self.e_u**2 + self.e_p**2 + self.e_w**2 + self.e_phi**2)

    def relative(self, case: "ManufacturedCase") -> dict:
        """Field errors divided by the same norm of the exact field (diagnostic)."""
        ref = exact_norms(case)
        return {k: getattr(self, f"e_{k}") / ref[k] for k in ("u", "p", "w", "phi")}


def exact_norms(case: ManufacturedCase, n: int = 14) -> dict:
    """Full Sobolev norms of the exact fields on the unit cube and Σ."""
    from numpy.polynomial.legendre import leggauss

    t, wt = leggauss(n)
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    X = np.stack(np.meshgrid(t, t, t, indexing="ij"), -1).reshape(-1, 3)
    W3 = np.einsum("i,j,k->ijk", wt, wt, wt).ravel()
    Y = np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
    W2 = np.outer(wt, wt).ravel()
    u = W3 @ (np.sum(case.u(X) ** 2, 1) + np.sum(case.grad_u(X) ** 2, (1, 2)))
    p = W3 @ case.p(X) ** 2
    w = W2 @ (case.w(Y) ** 2 + np.sum(case.grad_w(Y) ** 2, 1) + np.sum(case.hess_w(Y) ** 2, (1, 2)))
    phi = W2 @ (case.phi(Y) ** 2 + np.sum(case.grad_phi(Y) ** 2, 1))
    return {k: math.sqrt(v) for k, v in dict(u=u, p=p, w=w, phi=phi).items()}


def compute_errors(disc: Discretization, fields, case: ManufacturedCase) -> ErrorReport:
    """Full Sobolev-norm errors of the projected discrete fields.

    u: broken H¹ of u − Π^∇ u_h; p: L² of p − p_h; φ: H¹(Σ) of φ − Π⁰_1 φ_h;
    w: H²(Σ) of w − Π^{∇²} w_h.  Quadrature exactness 6 on every element.
    """
    lay = disc.layout
    x = fields.x
    uh = x[lay.block("u")]
    ph = x[lay.block("p")]
    phih = x[lay.block("phi")]
    wh = x[lay.block("w")]
    n1 = n_monomials(3, 1)
    n2 = n_monomials(3, 2)
    eu = ep = 0.0
    for el, pel in zip(disc.cells, disc.pcells):
        q = el.quad
        cu = el.pi_nabla @ uh[el.global_dofs]
        V = el.basis.values(q.points)[:, :n2]
        Gr = el.basis.gradients(q.points)[:, :n2]
        vals = np.column_stack([V @ cu[c * n2:(c + 1) * n2] for c in range(3)])
        jac = np.stack([np.einsum("qbj,b->qj", Gr, cu[c * n2:(c + 1) * n2]) for c in range(3)], axis=1)
        du = case.u(q.points) - vals
        dJ = case.grad_u(q.points) - jac
        eu += q.integrate(np.sum(du**2, axis=1) + np.sum(dJ**2, axis=(1, 2)))
        cp = ph[pel.dofs - lay.offsets["p"]]
        dp = case.p(q.points) - el.basis.values(q.points)[:, :n1] @ cp
        ep += q.integrate(dp**2)
    ew = ephi = 0.0
    for pl, pp in zip(disc.plates, disc.pplates):
        q = pp.quad
        c = pp.pi @ phih[pp.global_dofs]
        V = pp.basis.values(q.points)
        G = pp.basis.gradients(q.points)
        d0 = case.phi(q.points) - V @ c
        d1 = case.grad_phi(q.points) - np.einsum("qbj,b->qj", G, c)
        ephi += q.integrate(d0**2 + np.sum(d1**2, axis=1))
        q = pl.quad
        c = pl.pi @ wh[pl.global_dofs]
        V = pl.basis.values(q.points)
        G = pl.basis.gradients(q.points)
        H = pl.basis.hessians(q.points)
        d0 = case.w(q.points) - V @ c
        d1 = case.grad_w(q.points) - np.einsum("qbj,b->qj", G, c)
        d2 = case.hess_w(q.points) - np.einsum("qbij,b->qij", H, c)
        ew += q.integrate(d0**2 + np.sum(d1**2, axis=1) + np.sum(d2**2, axis=(1, 2)))
    return ErrorReport(
        h_bulk=float(disc.mesh.cell_diameters.max()), h_plate=float(disc.surface.h),
        e_u=math.sqrt(eu), e_p=math.sqrt(ep), e_w=math.sqrt(ew), e_phi=math.sqrt(ephi),
        iterations=int(fields.iterations),
    )


def eoc_rate(e1, e2, h1, h2):
    """r = log(e2 / e1) / log(h2 / h1)."""
    if h1 == h2:
        raise ConfigurationError("EOC needs distinct mesh sizes")
    return math.log(e2 / e1) / math.log(h2 / h1)


FIELDS = ("total", "u", "p", "w", "phi")


def eoc(reports) -> list:
    """Per-level rows with rates against h_bulk (total, u, p) or h_plate (w, φ)."""
    if len(reports) < 2:
        raise ConfigurationError("EOC needs at least two refinement levels")
    rows = []
    for j, r in enumerate(reports):
        row = {"level": j, "h_bulk": r.h_bulk, "h_plate": r.h_plate, "iters": r.iterations}
        for name in FIELDS:
            e = getattr(r, f"e_{name}")
            row[f"e_{name}"] = e
            if j == 0:
                row[f"r_{name}"] = float("nan")
            else:
                prev = reports[j - 1]
                hk = "h_plate" if name in ("w", "phi") else "h_bulk"
                row[f"r_{name}"] = eoc_rate(getattr(prev, f"e_{name}"), e, getattr(prev, hk), getattr(r, hk))
        rows.append(row)
    return rows


CSV_COLUMNS = ["level", "h_bulk", "h_plate", "e_total", "r_total", "e_u", "r_u", "e_p", "r_p",
               "e_w", "r_w", "e_phi", "r_phi", "iters"]


def write_eoc_csv(rows, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for row in rows:
            out = []
            for c in CSV_COLUMNS:
                v = row[c]
                if c in ("level", "iters"):
                    out.append(str(int(v)))
                elif isinstance(v, float) and math.isnan(v):
                    out.append("")
                else:
                    out.append(f"{v:.6e}")
            wr.writerow(out)


def format_table(rows) -> str:
    head = f"{'h_bulk':>9} {'h_plate':>9} {'e_total':>9} {'r':>5} {'e_u':>9} {'r':>5} {'e_p':>9} {'r':>5} " \
           f"{'e_w':>9} {'r':>5} {'e_phi':>9} {'r':>5} {'it':>3}"
    lines = [head]
    for r in rows:
        def rate(k):
            v = r[k]
            return "    *" if math.isnan(v) else f"{v:5.2f}"
        lines.append(
            f"{r['h_bulk']:9.2e} {r['h_plate']:9.2e} {r['e_total']:9.2e} {rate('r_total')} {r['e_u']:9.2e} "
            f"{rate('r_u')} {r['e_p']:9.2e} {rate('r_p')} {r['e_w']:9.2e} {rate('r_w')} {r['e_phi']:9.2e} "
            f"{rate('r_phi')} {r['iters']:3d}"
        )
    return "\n".join(lines)


# ------------------------------------------------------------------ export


def export_fields(disc: Discretization, fields, stream) -> str:
    """Mesh sections followed by DOF vectors and per-cell projected coefficients."""
    lay = disc.layout
    parts = [export_mesh(disc.mesh)]

    def section(name, arr, width=1):
        arr = np.asarray(arr, float).reshape(-1, width)
        lines = [f"{name} {len(arr)}"]
        lines += [" ".join(repr(float(v)) for v in row) for row in arr]
        return "\n".join(lines) + "\n"

    x = fields.x
    parts.append(section("U_DOFS", x[lay.block("u")]))
    parts.append(section("P_DOFS", x[lay.block("p")], 4))
    parts.append(section("PHI_DOFS", x[lay.block("phi")]))
    parts.append(section("W_DOFS", x[lay.block("w")], 3))
    uh = x[lay.block("u")]
    proj = np.array([el.pi_nabla @ uh[el.global_dofs] for el in disc.cells])
    parts.append(section("U_PROJECTION", proj, proj.shape[1]))
    text = "".join(parts)
    stream.write(text)
    return text


# ------------------------------------------------------------------ study


@dataclass
class StudyConfig:
    family: str = "cube"
    levels: tuple = (2, 4)
    files: tuple = ()
    params: ModelParams = field(default_factory=ModelParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: str | None = None


def parse_config(text: str) -> StudyConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    kv = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigurationError(f"line {no}: expected key = value")
        k, v = (t.strip() for t in s.split("=", 1))
        kv[k] = v
    cfg = StudyConfig()
    pkw = {}
    skw = {}
    for k, v in kv.items():
        try:
            if k == "mesh.family":
                cfg.family = v
            elif k == "mesh.levels":
                cfg.levels = tuple(int(t) for t in v.replace(",", " ").split())
            elif k == "mesh.files":
                cfg.files = tuple(t for t in v.replace(",", " ").split())
            elif k.startswith("params."):
                pkw[k[len("params."):]] = float(v)
            elif k == "solver.mode":
                skw["mode"] = v
            elif k == "solver.tol":
                skw["tol"] = float(v)
            elif k == "solver.max_iter":
                skw["max_iter"] = int(v)
            elif k == "output.dir":
                cfg.output_dir = v
            else:
                raise ConfigurationError(f"unknown key {k!r}")
        except ValueError:
            raise ConfigurationError(f"bad value for {k}: {v!r}") from None
    cfg.params = ModelParams().replace(**pkw)
    cfg.solver = SolverConfig(**skw)
    if cfg.family not in ("cube", "file"):
        raise ConfigurationError(f"unknown mesh family {cfg.family!r}")
    n_levels = len(cfg.levels) if cfg.family == "cube" else len(cfg.files)
    if n_levels == 0:
        raise ConfigurationError("empty refinement list")
    return cfg


def _level_meshes(cfg: StudyConfig):
    if cfg.family == "cube":
        for n in cfg.levels:
            yield tag_boundaries(generate_cube_mesh(n), example1_rule())
    else:
        for path in cfg.files:
            with open(path) as fh:
                mesh = import_mesh(fh)
            if not len(mesh.faces_with_tag("Sigma")):
                mesh = tag_boundaries(mesh, example1_rule())
            yield mesh


def check_example1_frame(disc: Discretization) -> None:
    """The case's surface callables assume Σ-frame coordinates (x_1, x_2) on x_3 = 1."""
    fr = disc.surface.frame
    ok = (np.allclose(fr.t1, [1, 0, 0], atol=1e-12) and np.allclose(fr.t2, [0, 1, 0], atol=1e-12)
          and np.allclose(fr.origin, [0, 0, 1], atol=1e-12))
    if not ok:
        raise ConfigurationError("Example 1 needs Sigma on the plane x3 = 1 with outward normal e3")


def solve_level(mesh, params: ModelParams, solver_cfg: SolverConfig, case=None):
    case = case or example1_case(params)
    disc = discretize(mesh)
    check_example1_frame(disc)
    system = assemble(disc, params, case.load_data())
    fields = solve(system, solver_cfg)
    return disc, system, fields


def run_study(cfg: StudyConfig, echo=print):
    case = example1_case(cfg.params)
    reports = []
    if not (cfg.levels if cfg.family == "cube" else cfg.files):
        raise ConfigurationError("empty refinement list")
    if cfg.output_dir:
        os.makedirs(cfg.output_dir, exist_ok=True)
    for j, mesh in enumerate(_level_meshes(cfg)):
        try:
            disc, system, fields = solve_level(mesh, cfg.params, cfg.solver, case)
            rep = compute_errors(disc, fields, case)
            dn = divergence_norm(disc, fields.u)
            log.info("level %d: %d DOFs, ‖div u_h‖ = %.2e", j, disc.layout.size, dn)
        except BiotVemError as exc:
            raise type(exc)(f"refinement {j}: {exc}") from exc
        reports.append(rep)
        if cfg.output_dir:
            with open(os.path.join(cfg.output_dir, f"fields_{j}.vem"), "w") as fh:
                export_fields(disc, fields, fh)
    if len(reports) >= 2:
        rows = eoc(reports)
    else:
        r = reports[0]
        rows = [{"level": 0, "h_bulk": r.h_bulk, "h_plate": r.h_plate, "iters": r.iterations,
                 **{f"e_{k}": getattr(r, f"e_{k}") for k in FIELDS}, **{f"r_{k}": float("nan") for k in FIELDS}}]
    if cfg.output_dir:
        write_eoc_csv(rows, os.path.join(cfg.output_dir, "eoc.csv"))
    if echo:
        echo(format_table(rows))
    return rows
