"""Physical coefficients of the flow and heat problems.

Fracture permeability follows the cubic law ``k = eps**2 / 12``; the heat
coefficients combine water and rock properties weighted by the porosity.
"""

from __future__ import annotations

from dataclasses import dataclass

GRAVITY = 9.81


def _positive(obj, *names):
    for name in names:
        value = getattr(obj, name)
        if not value > 0:
            raise ValueError(f"{type(obj).__name__}.{name} must be positive, got {value}")


@dataclass(frozen=True)
class FluidProperties:
    rho_w: float
    mu: float
    c_w: float
    lambda_w: float

    def __post_init__(self):
        _positive(self, "rho_w", "mu", "c_w", "lambda_w")


@dataclass(frozen=True)
class RockProperties:
    rho_m: float
    c_m: float
    lambda_m: float
    gamma_e: float
    theta_hat: float = 0.0

    def __post_init__(self):
        _positive(self, "rho_m", "c_m", "lambda_m", "gamma_e")
        if self.theta_hat < 0:
            raise ValueError("RockProperties.theta_hat must be a temperature >= 0 K")


@dataclass(frozen=True)
class FractureProperties:
    epsilon: float
    phi: float = 1.0
    g: float = GRAVITY

    def __post_init__(self):
        _positive(self, "epsilon", "g")
        if not 0 < self.phi <= 1:
            raise ValueError(f"porosity must lie in (0, 1], got {self.phi}")


@dataclass(frozen=True)
class DerivedCoefficients:
    """Coefficients entering the discrete problems, uniform on a fracture."""

    K: float
    zeta: float
    D: float
    iota: float
    c_e: float | None = None
    lambda_e: float | None = None
    theta_hat: float = 0.0

    def __post_init__(self):
        _positive(self, "K", "zeta")
        if self.D < 0 or self.iota < 0:
            raise ValueError("D and iota must be non-negative")


def permeability(fp: FractureProperties) -> float:
    return fp.epsilon**2 / 12.0


def hydraulic_conductivity(fp: FractureProperties, fl: FluidProperties) -> float:
    """Aperture-integrated hydraulic conductivity ``eps * k * rho_w * g / mu``."""
    return fp.epsilon * permeability(fp) * fl.rho_w * fp.g / fl.mu


def heat_coefficients(fp: FractureProperties, fl: FluidProperties, rp: RockProperties) -> dict:
    """Effective heat capacity and conductivity, and the scaled heat-equation coefficients.

    Returns:
        dict with keys ``zeta``, ``D``, ``iota``, ``c_e`` and ``lambda_e``.
    """
    phi = fp.phi
    c_e = phi * fl.rho_w * fl.c_w + (1.0 - phi) * rp.rho_m * rp.c_m
    lambda_e = fl.lambda_w**phi * rp.lambda_m ** (1.0 - phi)
    rc = fl.rho_w * fl.c_w
    return {
        "zeta": fp.epsilon * c_e / rc,
        "D": fp.epsilon * lambda_e / rc,
        "iota": rp.gamma_e / rc,
        "c_e": c_e,
        "lambda_e": lambda_e,
    }


def derive_coefficients(fp: FractureProperties, fl: FluidProperties, rp: RockProperties) -> DerivedCoefficients:
    heat = heat_coefficients(fp, fl, rp)
    return DerivedCoefficients(K=hydraulic_conductivity(fp, fl), theta_hat=rp.theta_hat, **heat)


def benchmark_coefficients(D: float = 1e-4) -> DerivedCoefficients:
    """Unit conductivity and capacity, no reaction: the setting of the synthetic benchmarks."""
    return DerivedCoefficients(K=1.0, zeta=1.0, D=D, iota=0.0)


# Water and granite data of the field-scale example.
FIELD_WATER = FluidProperties(rho_w=1000.0, mu=3.55, c_w=4099.0, lambda_w=0.667)
FIELD_ROCK = RockProperties(rho_m=2700.0, c_m=790.0, lambda_m=3.07, gamma_e=1.25e-3, theta_hat=353.15)
FIELD_FRACTURE = FractureProperties(epsilon=2e-3, phi=0.95)
