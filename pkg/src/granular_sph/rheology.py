"""Elastic-trial / plastic-correction stress update for the cohesive mu(I) law.

After integration each fluid particle carries an elastic trial stress. The
correction either zeroes it (tension beyond the cohesive cut-off), keeps it
(admissible), or scales its deviatoric part radially onto the yield surface
while keeping the pressure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ContractError, ParameterError
from .model import MaterialParams

# Pressure floor used only inside the inertial-number evaluation.
PRESSURE_FLOOR = 1.0

STEP_TENSION = 1
STEP_ELASTIC = 3
STEP_PLASTIC = 4


@dataclass(frozen=True)
class TrialStress:
    p_star: float
    tau_star: np.ndarray
    tau_bar_star: float


def trial_decompose(sigma_star, tol: float = 1e-9) -> TrialStress:
    s = np.asarray(sigma_star, dtype=np.float64)
    if s.shape != (3, 3):
        raise ContractError("stress must be a 3x3 tensor")
    scale = np.linalg.norm(s)
    if np.max(np.abs(s - s.T)) > tol * max(scale, 1e-300):
        raise ContractError("trial stress is not symmetric")
    p = -np.trace(s) / 3.0
    tau = s + p * np.eye(3)
    return TrialStress(float(p), tau, float(math.sqrt(0.5 * np.sum(tau * tau))))


@njit(cache=True)
def mu_of_inertial(I, mu_s, mu_2, I0):
    # same as mu_s + (mu_2 - mu_s)/(1 + I0/I) but finite at I = 0
    if I <= 0.0:
        return mu_s
    return mu_s + (mu_2 - mu_s) * I / (I + I0)


@njit(cache=True)
def return_map_inplace(sig, tau_prev, rho0, G, mu_s, mu_2, I0, c, d, dt):
    """Correct ``sig`` (3x3, modified in place).

    Returns (new equivalent shear stress, mu used, step code).
    """
    p = -(sig[0, 0] + sig[1, 1] + sig[2, 2]) / 3.0
    p_cri = -c / mu_s
    if p < p_cri:
        for a in range(3):
            for b in range(3):
                sig[a, b] = 0.0
        return 0.0, mu_s, STEP_TENSION
    t00 = sig[0, 0] + p
    t11 = sig[1, 1] + p
    t22 = sig[2, 2] + p
    t01 = sig[0, 1]
    t02 = sig[0, 2]
    t12 = sig[1, 2]
    tau_bar = math.sqrt(0.5 * (t00 * t00 + t11 * t11 + t22 * t22)
                        + t01 * t01 + t02 * t02 + t12 * t12)
    gdot = (tau_bar - tau_prev) / (G * dt)
    if gdot < 0.0:
        gdot = 0.0
    p_eff = p if p > PRESSURE_FLOOR else PRESSURE_FLOOR
    I = gdot * d * math.sqrt(rho0 / p_eff)
    mu = mu_of_inertial(I, mu_s, mu_2, I0)
    tau_max = mu * p + c
    if tau_bar <= tau_max:
        return tau_bar, mu, STEP_ELASTIC
    if tau_max <= 0.0:
        # no admissible shear state at this pressure
        for a in range(3):
            for b in range(3):
                sig[a, b] = 0.0
        return 0.0, mu, STEP_TENSION
    s = tau_max / tau_bar
    sig[0, 0] = -p + s * t00
    sig[1, 1] = -p + s * t11
    sig[2, 2] = -p + s * t22
    sig[0, 1] = sig[1, 0] = s * t01
    sig[0, 2] = sig[2, 0] = s * t02
    sig[1, 2] = sig[2, 1] = s * t12
    return tau_max, mu, STEP_PLASTIC


@njit(cache=True)
def return_map_many(stress, tau_bar, idx, rho0, G, mu_s, mu_2, I0, c, d, dt):
    """Apply the correction to ``stress[idx]``; updates ``tau_bar`` in place."""
    for k in range(idx.size):
        i = idx[k]
        tb, _, _ = return_map_inplace(stress[i], tau_bar[i], rho0, G, mu_s, mu_2, I0, c, d, dt)
        tau_bar[i] = tb


def _material_args(m: MaterialParams):
    return (m.rho0, m.G, m.mu_s, m.mu_2, m.I0, m.cohesion_c, m.grain_d)


def mu_of_I(I: float, material: MaterialParams) -> float:
    return float(mu_of_inertial(float(I), material.mu_s, material.mu_2, material.I0))


def return_map_detailed(sigma_star, tau_bar_prev: float, material: MaterialParams, dt: float):
    """Like :func:`return_map` but also reports the friction coefficient and branch taken."""
    if not dt > 0:
        raise ParameterError("dt must be positive")
    if tau_bar_prev < 0:
        raise ParameterError("previous equivalent shear stress must be non-negative")
    trial_decompose(sigma_star)
    sig = np.array(sigma_star, dtype=np.float64)
    sig = 0.5 * (sig + sig.T)
    _, mu, step = return_map_inplace(sig, float(tau_bar_prev), *_material_args(material), float(dt))
    return sig, mu, step


def return_map(sigma_star, tau_bar_prev: float, material: MaterialParams, dt: float) -> np.ndarray:
    return return_map_detailed(sigma_star, tau_bar_prev, material, dt)[0]
