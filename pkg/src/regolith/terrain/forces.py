"""Soil cutting resistance from a passive failure wedge.

Resistance follows the classical flat-blade form
``F = w * (gamma * g * d^2 * N_gamma + c * d * N_c)`` with the N-factors
taken from the trial-wedge solution, minimized over the failure-plane
angle.  Soil-tool friction is half the internal friction angle; surcharge
and inertial terms are omitted (negligible at the crawl speeds simulated
here).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import minimize_scalar

from .heightfield import SoilParams

#: Trial failure-plane angle range (rad); the oracle tests scan the same range.
BETA_MIN = 0.05
BETA_MAX = math.pi / 2 - 0.05


@dataclass
class DigForce:
    resistance: float        # draft along the travel direction, N
    normal: float            # component normal to travel, N
    torque_about_edge: float  # N*m


def wedge_coefficients(beta: float, attack_angle: float,
                       friction_angle: float) -> tuple[float, float]:
    """(N_gamma, N_c) for one trial failure-plane angle, or (inf, inf)
    when the trial geometry is inadmissible."""
    rho = attack_angle
    delta = friction_angle / 2.0
    denom = (math.cos(rho + delta)
             + math.sin(rho + delta) / math.tan(beta + friction_angle))
    if denom <= 1e-9:
        return math.inf, math.inf
    cot_beta = 1.0 / math.tan(beta)
    n_gamma = (cot_beta + 1.0 / math.tan(rho)) / (2.0 * denom)
    n_c = (1.0 + cot_beta / math.tan(beta + friction_angle)) / denom
    if n_gamma < 0.0 or n_c < 0.0:
        return math.inf, math.inf
    return n_gamma, n_c


def _wedge_force(beta: float, depth: float, attack_angle: float,
                 soil: SoilParams) -> float:
    n_gamma, n_c = wedge_coefficients(beta, attack_angle,
                                      soil.internal_friction_angle)
    if math.isinf(n_gamma):
        return math.inf
    return (soil.bank_density * soil.gravity * depth ** 2 * n_gamma
            + soil.cohesion * depth * n_c)


def dig_resistance(depth: float, width: float, attack_angle: float,
                   speed: float, soil: SoilParams) -> DigForce:
    """Cutting force for a blade of the given width at the given depth.

    ``speed`` is accepted for interface stability but does not enter the
    quasi-static wedge model.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if width <= 0:
        raise ValueError("width must be positive")
    if not (0.0 < attack_angle < math.pi / 2):
        raise ValueError("attack_angle must be in (0, pi/2)")
    if depth == 0.0:
        return DigForce(0.0, 0.0, 0.0)

    # Coarse scan, then a bounded refinement around the best trial angle.
    n_scan = 64
    best_beta = BETA_MIN
    best = math.inf
    for k in range(n_scan + 1):
        beta = BETA_MIN + (BETA_MAX - BETA_MIN) * k / n_scan
        f = _wedge_force(beta, depth, attack_angle, soil)
        if f < best:
            best, best_beta = f, beta
    span = (BETA_MAX - BETA_MIN) / n_scan
    lo = max(BETA_MIN, best_beta - span)
    hi = min(BETA_MAX, best_beta + span)
    res = minimize_scalar(
        lambda b: _wedge_force(b, depth, attack_angle, soil),
        bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-8})
    force_per_width = min(best, float(res.fun))

    total = force_per_width * width
    angle = attack_angle + soil.internal_friction_angle / 2.0
    resistance = total * math.sin(angle)
    normal = total * math.cos(angle)
    return DigForce(resistance=resistance, normal=normal,
                    torque_about_edge=resistance * depth / 2.0)
