"""Feedforward + PI boost controller with back-calculation anti-windup.

The throttle loop tracks the intake-manifold pressure reference through a
model-inverting feedforward plus PI feedback; the wastegate loop is feedback
only, regulating the intercooler pressure.  Integration of both integrators
is forward Euler at the controller step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .params import ControllerGains, EngineParams


@dataclass
class PiState:
    """Integrator and last raw/saturated outputs of one PI loop."""

    integrator: float = 0.0
    last_raw: float = 0.0
    last_sat: float = 0.0


@dataclass
class LoopGains:
    kp: float
    ti: float


def pi_antiwindup_step(error: float, raw_ref: float, sat_ref: float,
                       gains: LoopGains, state: PiState, dt: float) -> float:
    """One discrete anti-windup PI update, returning the feedback output.

    The integrator accumulates ``error + kp*(sat_ref - raw_ref)``; while the
    actuator saturates, the back-calculation term bleeds the integrator
    instead of letting it wind up.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    state.integrator += (error + gains.kp * (sat_ref - raw_ref)) * dt
    return gains.kp * error + (gains.kp / gains.ti) * state.integrator


def throttle_area_reference(
    p_imREF: float, p_ic: float, p_em: float, T_im: float, T_amb: float,
    omega_eREF: float, params: EngineParams, A_max: float,
) -> float:
    """Feedforward throttle area (m^2) for a manifold-pressure reference.

    Inverts the orifice model at the demanded engine inflow.  When the
    pressure ratio reaches one the flow coefficient vanishes and the request
    saturates wide open.
    """
    if min(p_imREF, p_ic, p_em, T_im, T_amb) <= 0.0:
        raise ValueError("pressures and temperatures must be positive")
    W_eiREF = (
        params.C_etavol * params.V_d * omega_eREF * p_imREF
        / (4.0 * math.pi * params.R_a * (params.r_c - 1.0) * T_im)
        * (params.r_c - (p_em / p_imREF) ** params.kappa_em)
    )
    if W_eiREF <= 0.0:
        return 0.0
    Pi = p_imREF / max(p_imREF, p_ic)
    k = params.kappa_th
    inner = Pi ** (2.0 / k) - Pi ** ((k + 1.0) / k)
    psi = Pi * math.sqrt(2.0 * k / (k - 1.0) * max(inner, 0.0))
    if psi <= 1e-12:
        return A_max  # zero pressure drop would demand unbounded area
    area = W_eiREF * math.sqrt(params.R_a * T_amb) / (p_ic * psi)
    return min(max(area, 0.0), A_max)


def throttle_feedforward(A_thREF: float, gains: ControllerGains) -> float:
    """Throttle position request from the area request (inverse area map)."""
    arg = (A_thREF - gains.a_0) / gains.a_2 + (gains.a_1 / gains.a_2) ** 2
    alpha = -gains.a_0 / (2.0 * gains.a_2) + math.sqrt(max(arg, 0.0))
    return min(max(alpha, gains.alpha_th_min), gains.alpha_th_max)


def throttle_position_to_area(alpha: float, gains: ControllerGains) -> float:
    """Quadratic position-to-area actuator map, capped at the physical bore."""
    area = gains.a_0 + gains.a_1 * alpha + gains.a_2 * alpha * alpha
    return min(max(area, 0.0), gains.A_th_max)


@dataclass
class BoostController:
    """Stateful two-loop boost controller (one instance per simulation)."""

    params: EngineParams
    gains: ControllerGains
    th: PiState = field(default_factory=PiState)
    wg: PiState = field(default_factory=PiState)

    def reset(self) -> None:
        self.th = PiState()
        self.wg = PiState()

    def step(
        self, p_imREF: float, p_icREF: float, omega_eREF: float,
        y_pim: float, y_pic: float, y_pem: float, y_Tim: float,
        p_amb: float, T_amb: float, dt: float,
    ):
        """Compute throttle area (m^2) and wastegate position for one step.

        Feedback acts on the measured (possibly faulted, noisy) sensors,
        matching the physical loop layout.  The boost reference is floored
        at ambient because the wastegate cannot regulate below it.
        """
        g = self.gains

        # throttle loop: feedforward + PI on the manifold-pressure error
        A_ref = throttle_area_reference(
            p_imREF, max(y_pic, 1e3), max(y_pem, 1e3), max(y_Tim, 1.0),
            T_amb, omega_eREF, self.params, g.A_th_max,
        )
        alpha_ff = throttle_feedforward(A_ref, g)
        e_im = (p_imREF - y_pim) / g.e_scale
        fb = pi_antiwindup_step(e_im, self.th.last_raw, self.th.last_sat,
                                LoopGains(g.K_p_th, g.T_i_th), self.th, dt)
        raw = alpha_ff + fb
        sat = min(max(raw, g.alpha_th_min), g.alpha_th_max)
        self.th.last_raw, self.th.last_sat = raw, sat
        A_th = throttle_position_to_area(sat, g)

        # wastegate loop: feedback only, on the intercooler-pressure error
        e_ic = (y_pic - max(p_icREF, p_amb)) / g.e_scale
        fb_wg = pi_antiwindup_step(e_ic, self.wg.last_raw, self.wg.last_sat,
                                   LoopGains(g.K_p_wg, g.T_i_wg), self.wg, dt)
        raw_wg = fb_wg
        sat_wg = min(max(raw_wg, g.u_wg_min), g.u_wg_max)
        self.wg.last_raw, self.wg.last_sat = raw_wg, sat_wg

        return A_th, sat_wg, {"A_thREF": A_ref, "alpha_ff": alpha_ff,
                              "alpha_raw": raw, "alpha_sat": sat,
                              "e_im": e_im, "e_ic": e_ic}
