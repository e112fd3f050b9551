"""Mean-value model of a turbocharged spark-ignited engine.

The model has 13 states (temperature/pressure pairs for the air filter,
compressor, intercooler, intake manifold, exhaust manifold and turbine
volumes, plus the turbocharger speed), six actuator channels and nine
sensors.  All functions here are pure; the stateful closed-loop machinery
lives in :mod:`tcsibench.simulate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel as K
from .params import AmbientConditions, EngineParams

STATE_NAMES = (
    "T_af", "p_af", "T_c", "p_c", "T_ic", "p_ic", "T_im",
    "p_im", "T_em", "p_em", "T_t", "p_t", "omega_t",
)

#: balance-equation label for each state derivative, used in blow-up reports
STATE_EQUATIONS = (
    "e1", "e2", "e3", "e4", "e5", "e6", "e7", "e8", "e9", "e10", "e11", "e12", "e13",
)

SENSOR_NAMES = ("y_Tc", "y_pc", "y_Tic", "y_pic", "y_Tim", "y_pim", "y_Waf", "y_Tqe", "y_pem")

FAULT_NAMES = (
    "f_paf", "f_Cvol", "f_Waf", "f_Wc", "f_Wic", "f_Wth",
    "f_xth", "f_yWaf", "f_ypim", "f_ypic", "f_yTic",
)


class ModelBlowupError(RuntimeError):
    """A state derivative went non-finite; carries the offending balance."""

    def __init__(self, equation: str, time: float | None = None):
        self.equation = equation
        self.time = time
        at = "" if time is None else f" at t={time:.3f} s"
        super().__init__(f"model blow-up in {equation}{at}")


@dataclass
class EngineState:
    """The 13 dynamic states (K, Pa, rad/s)."""

    T_af: float
    p_af: float
    T_c: float
    p_c: float
    T_ic: float
    p_ic: float
    T_im: float
    p_im: float
    T_em: float
    p_em: float
    T_t: float
    p_t: float
    omega_t: float

    @classmethod
    def initial(cls, params: EngineParams, ambient: AmbientConditions) -> "EngineState":
        vals = []
        for _ in range(6):
            vals.extend([ambient.T_amb, ambient.p_amb])
        vals.append(params.omega_t_init)
        return cls(*vals)

    @classmethod
    def from_array(cls, arr) -> "EngineState":
        return cls(*(float(v) for v in arr))

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.T_af, self.p_af, self.T_c, self.p_c, self.T_ic, self.p_ic,
             self.T_im, self.p_im, self.T_em, self.p_em, self.T_t, self.p_t,
             self.omega_t],
            dtype=np.float64,
        )

    def validate(self) -> None:
        arr = self.to_array()
        if np.any(arr[:12] <= 0.0):
            raise ValueError("temperatures and pressures must be strictly positive")
        if self.omega_t < 0.0:
            raise ValueError("turbo speed must be non-negative")


@dataclass
class ActuatorCommand:
    """The six actuator channels."""

    A_th: float            # m^2 commanded throttle area
    u_wg: float            # wastegate position in [0, 1]
    omega_eREF: float      # rad/s engine speed
    lambda_afr: float = 1.0
    p_amb: float = 101325.0
    T_amb: float = 293.0

    def validate(self) -> None:
        if not 0.0 <= self.u_wg <= 1.0:
            raise ValueError("u_wg must lie in [0, 1]")
        if self.A_th < 0.0:
            raise ValueError("A_th must be non-negative")
        if self.lambda_afr <= 0.0:
            raise ValueError("lambda must be positive")

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.A_th, self.u_wg, self.omega_eREF, self.lambda_afr, self.p_amb, self.T_amb],
            dtype=np.float64,
        )


@dataclass
class FaultSignals:
    """Instantaneous additive fault terms; all zero when healthy."""

    f_paf: float = 0.0     # kg/s flow equivalent of the filter pressure loss
    f_Cvol: float = 0.0    # kg/s additive on engine intake flow
    f_Waf: float = 0.0     # kg/s
    f_Wc: float = 0.0      # kg/s
    f_Wic: float = 0.0     # kg/s
    f_Wth: float = 0.0     # kg/s
    f_xth: float = 0.0     # m^2 throttle area error
    f_yWaf: float = 0.0    # kg/s flow sensor error
    f_ypim: float = 0.0    # Pa
    f_ypic: float = 0.0    # Pa
    f_yTic: float = 0.0    # K

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.f_paf, self.f_Cvol, self.f_Waf, self.f_Wc, self.f_Wic, self.f_Wth,
             self.f_xth, self.f_yWaf, self.f_ypim, self.f_ypic, self.f_yTic],
            dtype=np.float64,
        )

    @classmethod
    def from_array(cls, arr) -> "FaultSignals":
        return cls(*(float(v) for v in arr))


@dataclass
class SensorReading:
    y_Tc: float
    y_pc: float
    y_Tic: float
    y_pic: float
    y_Tim: float
    y_pim: float
    y_Waf: float
    y_Tqe: float
    y_pem: float

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.y_Tc, self.y_pc, self.y_Tic, self.y_pic, self.y_Tim,
             self.y_pim, self.y_Waf, self.y_Tqe, self.y_pem],
            dtype=np.float64,
        )


@dataclass
class AlgebraicOutputs:
    """Internal flows, temperatures, ratios and torques of one evaluation."""

    W_af: float = 0.0
    W_c: float = 0.0
    W_ic: float = 0.0
    W_th: float = 0.0
    W_ei: float = 0.0
    W_f: float = 0.0
    W_eo: float = 0.0
    W_wg: float = 0.0
    W_t: float = 0.0
    W_turbo: float = 0.0
    W_exh: float = 0.0
    T_af_in: float = 0.0
    T_c_in: float = 0.0
    T_ic_in: float = 0.0
    T_th: float = 0.0
    T_eo: float = 0.0
    T_t_in: float = 0.0
    T_wg: float = 0.0
    T_t_out: float = 0.0
    T_turbo: float = 0.0
    T_exh: float = 0.0
    Pi_c: float = 0.0
    Pi_th: float = 0.0
    Pi_thCRIT: float = 0.0
    Pi_t: float = 0.0
    Pi_tCRIT: float = 0.0
    Phi_c: float = 0.0
    Psi_c: float = 0.0
    Psi_th: float = 0.0
    Psi_t: float = 0.0
    eta_c: float = 0.0
    eta_t: float = 0.0
    BSR: float = 0.0
    Tq_t: float = 0.0
    Tq_c: float = 0.0
    Tq_e: float = 0.0
    omega_e: float = 0.0
    surge_clip: bool = False

    @classmethod
    def from_array(cls, g) -> "AlgebraicOutputs":
        vals = [float(v) for v in g[: K.N_ALG - 1]]
        return cls(*vals, surge_clip=bool(g[K.G_SURGE] > 0.5))


def restriction_flow(p_up: float, p_down: float, T_in: float, H: float, p_lin: float) -> float:
    """Signed mass flow through a flow restriction (kg/s).

    Positive when ``p_up > p_down``.  Below the linearization limit the
    square-root pressure dependence is replaced by a linear segment that is
    continuous at ``p_lin`` and has finite slope at zero pressure difference.
    """
    if T_in <= 0.0 or H <= 0.0:
        raise ValueError("restriction requires positive temperature and resistance")
    if p_up <= 0.0 or p_down <= 0.0:
        raise ValueError("restriction requires positive pressures")
    return float(K.restriction(p_up, p_down, T_in, H, p_lin))


def compressor(state: EngineState, params: EngineParams, f_Wc: float = 0.0):
    """Compressor flow, torque and map quantities at the given state.

    Returns ``(W_c, Tq_c, Pi_c, Psi_c, Phi_c, eta_c)``.  The square-root
    argument of the flow characteristic is clipped to [0, 1]; the clip at the
    head limit is reported through :class:`AlgebraicOutputs` as ``surge_clip``
    when evaluated via :func:`eval_derivatives`.
    """
    alg = _eval_alg(state, _idle_command(state, params), FaultSignals(f_Wc=f_Wc), params)
    return alg.W_c, alg.Tq_c, alg.Pi_c, alg.Psi_c, alg.Phi_c, alg.eta_c


def throttle_flow(
    p_ic: float, p_im: float, T_ic: float, A_th: float,
    f_Wth: float, f_xth: float, params: EngineParams,
) -> float:
    """Compressible throttle flow with additive flow fault and area fault."""
    if p_ic <= 0.0 or p_im <= 0.0 or T_ic <= 0.0:
        raise ValueError("throttle flow requires positive pressures and temperature")
    if A_th < 0.0:
        raise ValueError("throttle area must be non-negative")
    area = max(A_th + f_xth, 0.0)
    psi = K.flow_coefficient(p_im / p_ic, params.kappa_th)
    return p_ic * area / math.sqrt(T_ic * params.R_a) * psi + f_Wth


def engine_flows(
    p_im: float, T_im: float, p_em: float, omega_e: float, lam: float,
    f_Cvol: float, params: EngineParams, T_amb: float = 293.0,
):
    """Engine intake/fuel/exhaust flows and temperatures.

    Returns ``(W_ei, W_f, W_eo, T_eo, T_t_in)``.  The mechanical intake flow
    is clamped at zero before the additive fault term so the engine never
    pumps backwards.
    """
    if lam <= 0.0:
        raise ValueError("lambda must be positive")
    if p_im <= 0.0 or T_im <= 0.0:
        raise ValueError("intake conditions must be positive")
    vol = (params.r_c - (p_em / p_im) ** (1.0 / params.kappa_ei)) / (params.r_c - 1.0)
    W_ei = params.C_etavol * vol * params.V_im * omega_e * p_im / (4.0 * math.pi * params.R_a * T_im)
    W_ei = max(W_ei, 0.0) + f_Cvol
    W_f = W_ei / (params.AF_s * lam)
    W_eo = W_ei + W_f
    T_eo = W_eo * params.C_eo + params.T_0
    cp_em = params.R_em * params.kappa_em / (params.kappa_em - 1.0)
    if W_eo > 1.0e-12:
        expo = -params.h_ext * math.pi * params.d_pipe * params.l_pipe * params.n_pipe / (W_eo * cp_em)
        T_t_in = T_amb + (T_eo - T_amb) * math.exp(expo)
    else:
        T_t_in = T_amb
    return W_ei, W_f, W_eo, T_eo, T_t_in


def turbine_wastegate(state: EngineState, u_wg: float, params: EngineParams):
    """Turbine/wastegate flows, torque and temperatures at the given state.

    Returns ``(W_t, W_wg, W_turbo, Tq_t, eta_t, T_t_out, T_turbo, BSR)``.
    """
    alg = _eval_alg(state, _idle_command(state, params, u_wg=u_wg), FaultSignals(), params)
    return (alg.W_t, alg.W_wg, alg.W_turbo, alg.Tq_t, alg.eta_t,
            alg.T_t_out, alg.T_turbo, alg.BSR)


def torque_model(p_im: float, params: EngineParams) -> float:
    """Brake torque from intake manifold pressure via the affine BMEP map."""
    if p_im <= 0.0:
        raise ValueError("p_im must be positive")
    bmep = max(params.C_P1 * p_im - params.C_P0, 0.0)
    return params.V_d * bmep / (2.0 * math.pi * params.n_r)


def _idle_command(state: EngineState, params: EngineParams, u_wg: float = 0.0) -> ActuatorCommand:
    return ActuatorCommand(A_th=0.0, u_wg=u_wg, omega_eREF=0.0,
                           lambda_afr=params.lambda_afr)


def _eval_alg(state, cmd, faults, params) -> AlgebraicOutputs:
    deriv = np.empty(K.N_STATE)
    alg = np.empty(K.N_ALG)
    K.derivatives(state.to_array(), cmd.to_array(), faults.to_array(), K.pack_params(params), deriv, alg)
    return AlgebraicOutputs.from_array(alg)


def sensor_vector(alg_state, faults, noise=None) -> np.ndarray:
    """Assemble the 9 sensor values from states and algebraic outputs.

    ``alg_state`` is ``(state_array, alg_array)``.  Sensor faults are additive
    and never feed back into the dynamics.  The flow sensor meters the filter
    restriction; an air leak downstream of it (f_Waf) bypasses the sensor.
    """
    s, g = alg_state
    f = faults
    y = np.array(
        [
            s[K.I_TC],
            s[K.I_PC],
            s[K.I_TIC] + f[K.F_YTIC],
            s[K.I_PIC] + f[K.F_YPIC],
            s[K.I_TIM],
            s[K.I_PIM] + f[K.F_YPIM],
            g[K.G_WAF] - f[K.F_WAF] + f[K.F_YWAF],
            g[K.G_TQE],
            s[K.I_PEM],
        ],
        dtype=np.float64,
    )
    if noise is not None:
        y = y + noise
    return y


def eval_derivatives(
    state: EngineState,
    cmd: ActuatorCommand,
    faults: FaultSignals,
    params: EngineParams,
    time: float | None = None,
):
    """Evaluate the 13 state derivatives, algebraic outputs and sensors.

    Raises :class:`ModelBlowupError` naming the offending balance equation if
    any derivative is non-finite.
    """
    s = state.to_array()
    u = cmd.to_array()
    f = faults.to_array()
    P = K.pack_params(params)
    deriv = np.empty(K.N_STATE)
    alg = np.empty(K.N_ALG)
    K.derivatives(s, u, f, P, deriv, alg)
    if not np.all(np.isfinite(deriv)):
        bad = int(np.argmax(~np.isfinite(deriv)))
        raise ModelBlowupError(STATE_EQUATIONS[bad], time)
    y = SensorReading(*sensor_vector((s, alg), f))
    return deriv, AlgebraicOutputs.from_array(alg), y
