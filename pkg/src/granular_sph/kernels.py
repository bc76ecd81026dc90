"""Smoothing kernels with compact support 2h.

Two families are provided: the Monaghan cubic B-spline and the Wendland C2
("quintic") kernel, both normalized in 3D. The numba-compiled scalar
routines ``w_value`` and ``w_derivative`` are used directly by the force
loops; ``kernel_value`` and ``kernel_gradient`` are the checked public entry
points.
"""
from __future__ import annotations

import enum
import math

import numpy as np
from numba import njit

from .errors import ParameterError

SUPPORT_FACTOR = 2.0


class KernelKind(enum.IntEnum):
    CUBIC = 0
    WENDLAND_QUINTIC = 1


@njit(cache=True)
def w_value(r, h, kind):
    q = r / h
    if q >= 2.0:
        return 0.0
    if kind == 0:
        sigma = 1.0 / (math.pi * h * h * h)
        if q < 1.0:
            return sigma * (1.0 - 1.5 * q * q + 0.75 * q * q * q)
        t = 2.0 - q
        return sigma * 0.25 * t * t * t
    alpha = 21.0 / (16.0 * math.pi * h * h * h)
    t = 1.0 - 0.5 * q
    return alpha * t * t * t * t * (2.0 * q + 1.0)


@njit(cache=True)
def w_derivative(r, h, kind):
    """dW/dr."""
    q = r / h
    if q >= 2.0:
        return 0.0
    if kind == 0:
        sigma = 1.0 / (math.pi * h * h * h * h)
        if q < 1.0:
            return sigma * (-3.0 * q + 2.25 * q * q)
        t = 2.0 - q
        return -sigma * 0.75 * t * t
    alpha = 21.0 / (16.0 * math.pi * h * h * h * h)
    t = 1.0 - 0.5 * q
    return -5.0 * q * alpha * t * t * t


@njit(cache=True)
def grad_coeff(h, kind):
    """Normalization of dW/dr (sigma/h or alpha/h)."""
    if kind == 0:
        return 1.0 / (math.pi * h * h * h * h)
    return 21.0 / (16.0 * math.pi * h * h * h * h)


@njit(cache=True)
def grad_factor_c(r, inv_h, coeff, kind):
    """``grad_factor`` with ``inv_h = 1/h`` and ``coeff = grad_coeff(h, kind)`` precomputed."""
    q = r * inv_h
    if q >= 2.0 or r <= 0.0:
        return 0.0
    if kind == 0:
        if q < 1.0:
            return coeff * (-3.0 + 2.25 * q) * inv_h
        t = 2.0 - q
        return -coeff * 0.75 * t * t / r
    t = 1.0 - 0.5 * q
    return -5.0 * coeff * t * t * t * inv_h


@njit(cache=True)
def grad_factor(r, h, kind):
    """Scalar f such that grad W(r_vec) = f * r_vec; zero at r = 0."""
    return grad_factor_c(r, 1.0 / h, grad_coeff(h, kind), kind)


@njit(cache=True)
def _values(r, h, kind, out):
    for k in range(r.size):
        out[k] = w_value(r[k], h, kind)


@njit(cache=True)
def _gradients(rv, h, kind, out):
    for k in range(rv.shape[0]):
        r = math.sqrt(rv[k, 0] ** 2 + rv[k, 1] ** 2 + rv[k, 2] ** 2)
        f = grad_factor(r, h, kind)
        for a in range(3):
            out[k, a] = f * rv[k, a]


def _check_h(h):
    if not h > 0:
        raise ParameterError(f"smoothing length must be positive, got {h}")


def kernel_value(r, h: float, kind: KernelKind = KernelKind.CUBIC):
    """Kernel weight W(r, h) in 1/m^3; accepts a scalar or an array of distances."""
    _check_h(h)
    arr = np.asarray(r, dtype=np.float64)
    if np.any(arr < 0):
        raise ParameterError("distance must be non-negative")
    flat = np.ascontiguousarray(arr.ravel())
    out = np.empty_like(flat)
    _values(flat, float(h), int(kind), out)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def kernel_gradient(r_vec, h: float, kind: KernelKind = KernelKind.CUBIC) -> np.ndarray:
    """Gradient of W with respect to the first particle, r_vec = x_i - x_j.

    Accepts shape (3,) or (n, 3).
    """
    _check_h(h)
    rv = np.asarray(r_vec, dtype=np.float64)
    flat = np.ascontiguousarray(rv.reshape(-1, 3))
    out = np.empty_like(flat)
    _gradients(flat, float(h), int(kind), out)
    return out.reshape(rv.shape)
