"""Model coefficients of the coupled Stokes / Biot-Kirchhoff system."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .exceptions import ConfigurationError


@dataclass(frozen=True)
class ModelParams:
    """Coefficients; all strictly positive except ``c0 >= 0``.

    Attributes
    ----------
    rho_f : fluid density
    mu : viscosity
    gamma : slip rate
    rho_p : plate density
    D : flexural rigidity
    alpha : Biot-Willis coefficient
    c0 : storativity
    kappa : permeability
    tau : time step
    """

    rho_f: float = 1.0
    mu: float = 1.0
    gamma: float = 1.0
    rho_p: float = 1.0
    D: float = 1.0
    alpha: float = 1.0
    c0: float = 1.0
    kappa: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or v != v:
                raise ConfigurationError(f"parameter {f.name} must be a number")
            if f.name == "c0":
                if v < 0:
                    raise ConfigurationError("c0 must be non-negative")
            elif v <= 0:
                raise ConfigurationError(f"parameter {f.name} must be positive")

    def replace(self, **kw) -> "ModelParams":
        d = asdict(self)
        unknown = set(kw) - set(d)
        if unknown:
            raise ConfigurationError(f"unknown parameters: {sorted(unknown)}")
        d.update(kw)
        return ModelParams(**d)
