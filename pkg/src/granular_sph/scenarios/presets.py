"""Ready-made scenario configurations at desk scale."""
from __future__ import annotations

import math

from .config import ScenarioConfig

CRATER_DENSITIES = (700.0, 2200.0)
CRATER_HEIGHTS = (0.05, 0.1, 0.2)


def cratering(rho_sphere: float = 2200.0, drop_height: float = 0.2, fine: bool = False,
              **kw) -> ScenarioConfig:
    """Sphere drop into loose sand; ``fine`` halves the spacing and step."""
    base = dict(kind="cratering", name=f"crater_rho{rho_sphere:g}_H{drop_height:g}",
                d0=0.0025 if fine else 0.005, dt=5e-5 if fine else 1e-4, h_ratio=1.3,
                gamma_a=0.01, viscosity="bilateral", rho0=1510.0, youngs=1e5, poisson=0.3,
                mu_s=0.3, mu_2=0.3, I0=0.03, grain_d=1e-3, container_x=0.14, container_y=0.10,
                container_z=0.15, soil_depth=0.08, sphere_radius=0.0125,
                sphere_density=rho_sphere, drop_height=drop_height, settle_time=0.1,
                duration=0.2)
    base.update(kw)
    return ScenarioConfig(**base)


def cratering_matrix(**kw) -> list:
    return [cratering(rho, H, **kw) for rho in CRATER_DENSITIES for H in CRATER_HEIGHTS]


def cone(drop_fraction: float = 0.0, **kw) -> ScenarioConfig:
    """30 degree cone into Ottawa-like sand; drop height is a fraction of the cone length."""
    angle = math.radians(30.0)
    length = 0.5 * 0.0092 / math.tan(0.5 * angle)
    base = dict(kind="cone", name=f"cone_H{drop_fraction:g}L", d0=0.001, h_ratio=1.3, dt=2e-5,
                gamma_a=0.2, rho0=1780.0, youngs=1e6, poisson=0.3, mu_s=0.8, mu_2=1.0, I0=0.08,
                grain_d=0.007, container_x=0.04, container_y=0.04, container_z=0.05,
                soil_depth=0.03, cone_angle=angle, cone_diameter=0.0092,
                drop_height=drop_fraction * length, settle_time=0.02, duration=0.05,
                output_hz=0.0)
    base.update(kw)
    return ScenarioConfig(**base)


def collapse(**kw) -> ScenarioConfig:
    base = dict(kind="collapse", name="collapse", d0=0.005, h_ratio=1.3, dt=1e-4,
                container_x=0.25, container_y=0.05, container_z=0.08, soil_depth=0.05,
                column_x=0.05, column_z=0.05, settle_time=0.0, duration=0.3, mu_s=0.5, mu_2=0.5)
    base.update(kw)
    return ScenarioConfig(**base)


def drum(**kw) -> ScenarioConfig:
    """Cylinder at omega = 2.09 rad/s and v = 0.15 m/s through a GRC-like bed."""
    base = dict(kind="drum", name="drum", d0=0.01, h_ratio=1.2, dt=2.5e-4, gamma_a=0.01,
                rho0=1700.0, youngs=1e6, poisson=0.3, mu_s=0.7, mu_2=0.7, I0=0.03,
                container_x=0.5, container_y=0.16, container_z=0.12, soil_depth=0.06,
                drum_radius=0.05, drum_length=0.06, drum_omega=2.09, drum_speed=0.15,
                drum_sinkage=0.02, settle_time=0.1, duration=0.25)
    base.update(kw)
    return ScenarioConfig(**base)


PRESETS = {"cratering": cratering, "cone": cone, "collapse": collapse, "drum": drum}
