"""Scalar metrics: real-time factor, wheel slip, cratering law and its regression fit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, ParameterError

CRATER_COEFF = 0.14


class UndefinedMetric(ParameterError):
    """The metric has no finite value for the given inputs."""


def measure_rtf(wall_time: float, sim_time: float) -> float:
    """Wall-clock seconds per simulated second."""
    if not sim_time > 0:
        raise UndefinedMetric(f"RTF is undefined for simulated time {sim_time}")
    return wall_time / sim_time


def speedup(rtf_baseline: float, rtf: float) -> float:
    return rtf_baseline / rtf


def compute_slip(v_bar: float, omega: float, r_g: float) -> float:
    """s = 1 - v / (omega r_g)."""
    if not omega * r_g > 0:
        raise UndefinedMetric("slip needs omega * r_g > 0")
    return 1.0 - v_bar / (omega * r_g)


def crater_abscissa(rho_sphere: float, rho_grain: float, radius: float, height: float,
                    mu_s: float) -> float:
    """(1/mu_s) sqrt(rho_s/rho_g) (2R)^(2/3) H^(1/3)."""
    if min(rho_sphere, rho_grain, radius, mu_s) <= 0 or height < 0:
        raise ParameterError("cratering inputs must be positive")
    return math.sqrt(rho_sphere / rho_grain) * (2.0 * radius) ** (2.0 / 3.0) \
        * height ** (1.0 / 3.0) / mu_s


def empirical_depth(rho_sphere: float, rho_grain: float, radius: float, height: float,
                    mu_s: float) -> float:
    return CRATER_COEFF * crater_abscissa(rho_sphere, rho_grain, radius, height, mu_s)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    mse: float              # residuals of the fitted line, m^2
    mse_empirical: float    # measured D against 0.14 x, m^2

    def as_row(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "mse": self.mse, "mse_empirical": self.mse_empirical}


def fit_cratering_slope(points) -> FitResult:
    """Least-squares line D = a x + b through ``(x, D)`` pairs."""
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ContractError("a slope fit needs at least 3 (x, D) points")
    x, y = pts[:, 0], pts[:, 1]
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx <= 1e-300 * max(1.0, np.sum(x * x)) or np.ptp(x) == 0:
        raise ContractError("abscissae are all identical; the fit is singular")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    sst = np.sum((y - ym) ** 2)
    r2 = 1.0 - float(np.sum(resid ** 2) / sst) if sst > 0 else 1.0
    return FitResult(slope, intercept, r2, float(np.mean(resid ** 2)),
                     float(np.mean((y - CRATER_COEFF * x) ** 2)))
