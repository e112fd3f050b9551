"""Reference generation: vehicle longitudinal model, gearbox and pressure maps.

Turns a driving cycle into the engine-side references (speed, torque, BMEP
and the two boost pressures) consumed by the controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cycles import DrivingCycle
from .params import EngineParams, VehicleSpec


def speed_per_1000rpm(gear: int, spec: VehicleSpec) -> float:
    """Vehicle speed (km/h) per 1000 rpm engine speed in the given gear."""
    return 120.0 * math.pi * spec.r_w / spec.total_ratio(gear)


def _rpm_in_gear(v_kmh: float, gear: int, spec: VehicleSpec) -> float:
    # shift logic runs on the gearbox table rather than the formula output
    return v_kmh / spec.kmh_per_1000rpm[gear - 1] * 1000.0


def gear_select(v_kmh: float, spec: VehicleSpec, previous: int | None = None) -> int:
    """Pick a gear for the current speed.

    Stateless rule: the lowest gear whose engine speed does not exceed that
    gear's shift point (top gear as fallback).  With ``previous`` given, the
    downshift happens only once the engine speed in the lower gear would stay
    below ``downshift_factor`` times its shift point, which keeps repeated
    up/down chatter away from the shift boundaries.
    """
    if v_kmh < 0.0:
        raise ValueError("vehicle speed must be non-negative")
    if previous is None:
        gear = 1
        while gear < 8 and _rpm_in_gear(v_kmh, gear, spec) > spec.shift_rpm[gear - 1]:
            gear += 1
        return gear
    gear = previous
    while gear < 8 and _rpm_in_gear(v_kmh, gear, spec) > spec.shift_rpm[gear - 1]:
        gear += 1
    while gear > 1 and _rpm_in_gear(v_kmh, gear - 1, spec) <= spec.downshift_factor * spec.shift_rpm[gear - 2]:
        gear -= 1
    return gear


def engine_speed_reference(v_ms: float, gear: int, spec: VehicleSpec) -> float:
    """Engine speed (rad/s) implied by vehicle speed and driveline ratio."""
    return v_ms * spec.total_ratio(gear) / spec.r_w


def engine_torque_reference(v_ms: float, accel: float, gear: int, spec: VehicleSpec) -> float:
    """Engine torque (N m) to hold the cycle's speed/acceleration demand.

    Wheel force is the sum of inertial, aerodynamic-drag and rolling terms;
    rolling resistance only applies while moving.  Negative demands (braking)
    are clamped to zero, braking is outside the engine's scope.
    """
    F_d = 0.5 * spec.rho_a * spec.c_d * spec.A_f * v_ms * v_ms
    F_r = spec.m_v * spec.c_r * spec.g if v_ms > 1e-9 else 0.0
    F_w = spec.m_v * accel + F_d + F_r
    Tq_w = F_w * spec.r_w
    return max(Tq_w / spec.total_ratio(gear), 0.0)


def pressure_references(Tq_eREF: float, params: EngineParams):
    """(BMEP_REF, p_imREF, p_icREF) for a torque demand.

    BMEP_REF = 2 pi n_r Tq / V_d, inverted through the affine torque map,
    and the intercooler reference adds the regulated throttle pressure drop.
    """
    bmep = 2.0 * math.pi * params.n_r * Tq_eREF / params.V_d
    p_imREF = (bmep + params.C_P0) / params.C_P1
    p_icREF = p_imREF + params.dp_thREF
    return bmep, p_imREF, p_icREF


@dataclass
class ReferenceTrajectory:
    """Engine references sampled on the simulation grid.

    Times run from ``-warmup`` (idle settling, not part of the cycle) to the
    cycle duration.  The speed reference is floored at idle so the engine
    model always has a valid operating point.
    """

    cycle_name: str
    t: np.ndarray
    v_ms: np.ndarray
    gear: np.ndarray
    omega_eREF: np.ndarray
    Tq_eREF: np.ndarray
    BMEP_REF: np.ndarray
    p_imREF: np.ndarray
    p_icREF: np.ndarray
    T_DC: float

    def __len__(self) -> int:
        return len(self.t)


def build_reference_trajectory(
    cycle: DrivingCycle,
    spec: VehicleSpec,
    params: EngineParams,
    dt: float,
    warmup: float = 0.0,
) -> ReferenceTrajectory:
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    spec.validate()
    n = int(round((cycle.duration + warmup) / dt)) + 1
    t = -warmup + dt * np.arange(n)
    v_kmh = cycle.speed_kmh_at(np.clip(t, 0.0, cycle.duration))
    v_kmh[t < 0.0] = 0.0
    accel = cycle.accel_at(np.clip(t, 0.0, cycle.duration))
    accel[t < 0.0] = 0.0
    v_ms = v_kmh / 3.6

    gears = np.empty(n, dtype=np.int64)
    gear = 1
    for k in range(n):
        gear = gear_select(float(v_kmh[k]), spec, previous=gear)
        gears[k] = gear

    omega = np.empty(n)
    torque = np.empty(n)
    for k in range(n):
        omega[k] = engine_speed_reference(float(v_ms[k]), int(gears[k]), spec)
        torque[k] = engine_torque_reference(float(v_ms[k]), float(accel[k]), int(gears[k]), spec)
    omega = np.maximum(omega, spec.idle_omega)

    bmep = 2.0 * math.pi * params.n_r * torque / params.V_d
    p_im = (bmep + params.C_P0) / params.C_P1
    p_ic = p_im + params.dp_thREF

    return ReferenceTrajectory(
        cycle_name=cycle.name,
        t=t,
        v_ms=v_ms,
        gear=gears,
        omega_eREF=omega,
        Tq_eREF=torque,
        BMEP_REF=bmep,
        p_imREF=p_im,
        p_icREF=p_ic,
        T_DC=cycle.duration,
    )
