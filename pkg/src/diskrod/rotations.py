"""Rotation-vector helpers for frame propagation along the rod.

All functions take a rotation vector ``psi`` (axis * angle, radians) and use
series expansions below ``SMALL_ANGLE`` so they are smooth through psi = 0.
"""

from __future__ import annotations

import numpy as np

SMALL_ANGLE = 1e-4


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix such that hat(v) @ w == cross(v, w)."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def _coeffs(omega: float) -> tuple[float, float, float]:
    """(sin w/w, (1-cos w)/w^2, (w-sin w)/w^3) with small-angle series."""
    if omega < SMALL_ANGLE:
        w2 = omega * omega
        c1 = 1.0 - w2 / 6.0 + w2 * w2 / 120.0
        c2 = 0.5 - w2 / 24.0 + w2 * w2 / 720.0
        c3 = 1.0 / 6.0 - w2 / 120.0 + w2 * w2 / 5040.0
    else:
        c1 = np.sin(omega) / omega
        c2 = (1.0 - np.cos(omega)) / omega**2
        c3 = (omega - np.sin(omega)) / omega**3
    return c1, c2, c3


def exp_so3(psi: np.ndarray) -> np.ndarray:
    """Rodrigues formula: rotation matrix of the rotation vector psi."""
    omega = float(np.linalg.norm(psi))
    c1, c2, _ = _coeffs(omega)
    k = hat(psi)
    return np.eye(3) + c1 * k + c2 * (k @ k)


def left_jacobian(psi: np.ndarray) -> np.ndarray:
    """J_l(psi) = integral of exp(t*hat(psi)) over t in [0, 1]."""
    omega = float(np.linalg.norm(psi))
    _, c2, c3 = _coeffs(omega)
    k = hat(psi)
    return np.eye(3) + c2 * k + c3 * (k @ k)


def right_jacobian(psi: np.ndarray) -> np.ndarray:
    """J_r(psi) = J_l(psi)^T; maps d(psi) to the body-frame rotation twist."""
    omega = float(np.linalg.norm(psi))
    _, c2, c3 = _coeffs(omega)
    k = hat(psi)
    return np.eye(3) - c2 * k + c3 * (k @ k)


def _dcoeffs_over_omega(omega: float) -> tuple[float, float]:
    """(c2'(w)/w, c3'(w)/w), series-stabilized; both finite at w = 0."""
    if omega < SMALL_ANGLE:
        w2 = omega * omega
        d2 = -1.0 / 12.0 + w2 / 180.0
        d3 = -1.0 / 60.0 + w2 / 1260.0
    else:
        s, c = np.sin(omega), np.cos(omega)
        d2 = (omega * s - 2.0 * (1.0 - c)) / omega**4
        d3 = (omega * (1.0 - c) - 3.0 * (omega - s)) / omega**5
    return d2, d3


def d_left_jacobian_apply(psi: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Jacobian matrix d(J_l(psi) @ a)/d(psi) for a fixed vector a.

    J_l(psi) a = a + c2 (psi x a) + c3 psi x (psi x a); differentiating the
    coefficients through omega = |psi| and the cross products through psi
    gives the closed form assembled here.
    """
    omega = float(np.linalg.norm(psi))
    _, c2, c3 = _coeffs(omega)
    d2, d3 = _dcoeffs_over_omega(omega)
    pa = np.cross(psi, a)
    ppa = np.cross(psi, pa)
    out = -c2 * hat(a) - c3 * (hat(pa) + hat(psi) @ hat(a))
    out += d2 * np.outer(pa, psi) + d3 * np.outer(ppa, psi)
    return out
