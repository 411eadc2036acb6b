"""Monolithic and fixed-point solvers for the assembled block system."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .exceptions import ConfigurationError, ConvergenceError, SolverError

log = logging.getLogger(__name__)

MODES = ("monolithic", "fixed_point")


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "monolithic"
    tol: float = 1e-10
    max_iter: int = 50
    residual_target: float = 1e-12

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown solver mode {self.mode!r}")
        if not self.tol > 0:
            raise ConfigurationError("tolerance must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigurationError("max_iter must be a positive integer")


@dataclass
class SolutionFields:
    x: np.ndarray
    u: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    w: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    increments: list = field(default_factory=list)


def _fields(system, x, iterations, residual, increments=()):
    parts = system.layout.split(x)
    return SolutionFields(x, parts["u"], parts["p"], parts["phi"], parts["w"], iterations, residual, list(increments))


def _factor(M, what):
    try:
        lu = spla.splu(M.tocsc())
    except RuntimeError as exc:
        raise SolverError(f"{what}: factorization failed ({exc})") from None
    return lu


def _refined(lu, M, rhs, steps=2):
    """LU solve followed by a few steps of iterative refinement."""
    x = lu.solve(rhs)
    for _ in range(steps):
        x = x + lu.solve(rhs - M @ x)
    return x


def _rel(r, b):
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(r) / (nb if nb > 0 else 1.0))


def solve_monolithic(system, cfg: SolverConfig | None = None) -> SolutionFields:
    """Direct sparse solve of the reduced system with iterative refinement."""
    cfg = cfg or SolverConfig()
    K, b = system.reduced()
    lu = _factor(K, "monolithic system")
    xf = lu.solve(b)
    res = _rel(b - K @ xf, b)
    for _ in range(3):
        if res <= cfg.residual_target:
            break
        xf = xf + lu.solve(b - K @ xf)
        res = _rel(b - K @ xf, b)
    if not np.all(np.isfinite(xf)) or res > 1e-10:
        raise SolverError(f"relative residual {res:.3e} exceeds 1e-10")
    return _fields(system, system.expand(xf), 1, res)


def _split_free(system):
    lay = system.layout
    free = lay.free
    bulk = free < lay.n_u + lay.n_p
    return np.nonzero(bulk)[0], np.nonzero(~bulk)[0]


def solve_fixed_point(system, cfg: SolverConfig | None = None, x0=None) -> SolutionFields:
    """Picard alternation between the bulk Stokes and plate sub-systems.

    Each sweep solves the bulk system with the current φ as interface datum,
    then the plate system with the new u.  Both sub-matrices are factorized
    once.  The iteration stops when the ℓ² norm of the change of all free
    DOFs drops below ``cfg.tol``.  ``x0`` is an optional full initial guess;
    the default is zero (so φ starts at 0).
    """
    cfg = cfg or SolverConfig(mode="fixed_point")
    K, b = system.reduced()
    K = K.tocsr()
    ib, ip = _split_free(system)
    Kbb = K[ib][:, ib]
    Kbp = K[ib][:, ip]
    Kpb = K[ip][:, ib]
    Kpp = K[ip][:, ip]
    Kbb, Kpp = Kbb.tocsc(), Kpp.tocsc()
    lub = _factor(Kbb, "bulk sub-system")
    lup = _factor(Kpp, "plate sub-system")
    if x0 is None:
        xf = np.zeros(K.shape[0])
    else:
        xf = np.asarray(x0, float)[system.layout.free].copy()
    xb, xp = xf[ib], xf[ip]
    incs = []
    for it in range(1, cfg.max_iter + 1):
        xb_new = _refined(lub, Kbb, b[ib] - Kbp @ xp)
        xp_new = _refined(lup, Kpp, b[ip] - Kpb @ xb_new)
        inc = float(np.sqrt(np.sum((xb_new - xb) ** 2) + np.sum((xp_new - xp) ** 2)))
        incs.append(inc)
        xb, xp = xb_new, xp_new
        log.debug("fixed point iteration %d: increment %.3e", it, inc)
        if inc < cfg.tol:
            xf = np.empty(K.shape[0])
            xf[ib], xf[ip] = xb, xp
            res = _rel(b - K @ xf, b)
            return _fields(system, system.expand(xf), it, res, incs)
    raise ConvergenceError(f"fixed point did not converge in {cfg.max_iter} iterations (last increment {incs[-1]:.3e})", incs)


def solve(system, cfg: SolverConfig | None = None, x0=None) -> SolutionFields:
    cfg = cfg or SolverConfig()
    if cfg.mode == "monolithic":
        return solve_monolithic(system, cfg)
    return solve_fixed_point(system, cfg, x0)


def compute_residuals(system, fields: SolutionFields) -> dict:
    """Per-field residual norms of the reduced system, relative to ‖b‖."""
    K, b = system.reduced()
    lay = system.layout
    free = lay.free
    r_free = b - K @ fields.x[free]
    r = np.zeros(lay.size)
    r[free] = r_free
    nb = np.linalg.norm(b) or 1.0
    out = {name: float(np.linalg.norm(r[lay.block(name)]) / nb) for name in ("u", "p", "phi", "w")}
    out["total"] = float(np.linalg.norm(r_free) / nb)
    return out


def residual_vector(system, x) -> np.ndarray:
    """Full-length residual (zero on constrained rows)."""
    K, b = system.reduced()
    lay = system.layout
    r = np.zeros(lay.size)
    r[lay.free] = b - K @ np.asarray(x)[lay.free]
    return r


def divergence_norm(disc, u) -> float:
    """‖div u_h‖_{0,Ω} from the per-cell P_1 divergence representation."""
    total = 0.0
    for el in disc.cells:
        c = el.div_rep @ u[el.global_dofs]
        total += float(c @ el.mass1 @ c)
    return float(np.sqrt(max(total, 0.0)))


def discrete_h1_norm(disc, u) -> float:
    """Broken ‖Π^∇ u_h‖_{1,Ω} (L² plus gradient part)."""
    from .basis import n_monomials

    n2 = n_monomials(3, 2)
    total = 0.0
    for el in disc.cells:
        q = el.quad
        c = (el.pi_nabla @ u[el.global_dofs]).reshape(3, n2)
        V = el.basis.values(q.points)[:, :n2]
        G = el.basis.gradients(q.points)[:, :n2]
        total += q.integrate(np.sum((V @ c.T) ** 2, 1) + np.sum(np.einsum("qbj,cb->qcj", G, c) ** 2, (1, 2)))
    return float(np.sqrt(total))
