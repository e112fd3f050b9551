"""Physical parameters of the engine, vehicle and controller.

All values are SI unless a comment says otherwise.  Parameter sets can be
overridden from a plain ``key = value`` text file; unknown keys are rejected
so that a typo in a physics constant cannot silently fall back to a default.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace

GRAVITY = 9.81  # m/s^2
P_AMB_NOMINAL = 101325.0  # Pa, sea-level reference used by the torque map


class ConfigError(ValueError):
    """Raised for malformed config files or unknown/invalid keys."""


@dataclass
class AmbientConditions:
    p_amb: float = 101325.0  # Pa
    T_amb: float = 293.0  # K

    def validate(self) -> None:
        if self.p_amb <= 0.0 or self.T_amb <= 0.0:
            raise ConfigError("ambient pressure and temperature must be positive")


@dataclass
class EngineParams:
    """Constants of the mean-value engine model.

    Fields default to the bench calibration of the modelled 1.8 l
    four-cylinder turbocharged engine.  Derived quantities (specific heats,
    torque-map coefficients) are filled in ``__post_init__`` when left None.
    """

    # ambient air
    kappa_ic: float = 1.4       # ratio of specific heats, intake side
    R_a: float = 287.2          # J/(kg K)

    # engine block
    bore: float = 0.0831        # m
    V_d: float = 0.0018         # m^3 displacement
    n_cyl: int = 4
    n_r: float = 2.0            # revolutions per power stroke
    r_c: float = 9.5            # compression ratio
    Pi_bl: float = 2.0          # boost layout
    xi_aux: float = 1.0         # auxiliary device factor
    eta_ig: float = 0.4         # gross indicated efficiency
    AF_s: float = 15.1          # stoichiometric air/fuel ratio
    lambda_afr: float = 1.0     # air/fuel equivalence ratio (actuator default)
    C_etavol: float = 0.8       # volumetric efficiency constant
    kappa_ei: float = 1.3
    R_em: float = 290.0         # J/(kg K), exhaust side
    V_im: float = 0.0018        # m^3 intake manifold
    V_em: float = 0.0025        # m^3 exhaust manifold
    C_Tq1: float = 0.2e6        # Pa, BMEP map offset
    C_Tq2: float = 1.2e6        # Pa, BMEP map slope reference
    T_0: float = 1100.0         # K, engine-out temperature at zero mass flow
    C_eo: float = 3000.0        # K s/kg, engine-out temperature slope
    q_HV: float = 4.4e7         # J/kg fuel lower heating value
    a_0: float = 1.1647e-5      # throttle area map constants (A = a0 + a1*x + a2*x^2)
    a_1: float = 3.0718e-5
    a_2: float = 0.0029

    # air filter
    V_af: float = 0.01          # m^3
    H_af: float = 2.0e8         # flow resistance
    p_lin_af: float = 2000.0    # Pa, linearization limit

    # compressor
    V_c: float = 0.005          # m^3
    D_c: float = 0.06           # m wheel diameter
    eta_cMAX: float = 0.8
    eta_cMIN: float = 0.3
    Phi_cMAX: float = 0.12
    Psi_cMAX: float = 2.3
    H_c: float = 4.0e8          # stalled-wheel leak-through resistance
    p_lin_c: float = 500.0      # Pa

    # throttle
    kappa_th: float = 2.0       # as calibrated on the bench; thermodynamically unusual
    Pi_thMAX: float = 0.9
    dp_thREF: float = 10000.0   # Pa regulated pressure drop across throttle

    # intercooler
    V_ic: float = 0.005         # m^3
    H_ic: float = 4.0e8
    p_lin_ic: float = 500.0     # Pa
    h_ic: float = 0.8           # cooler effectiveness (0 disables outlet cooling)

    # exhaust and turbine inlet
    V_ex: float = 0.02          # m^3
    kappa_em: float = 1.3
    d_pipe: float = 0.04        # m
    l_pipe: float = 0.45        # m
    n_pipe: float = 4.0
    h_ext: float = 95.0         # W/(m^2 K) external heat transfer
    mu_em: float = 4.0e-5       # kg/(m s)
    k_em: float = 0.07          # W/(m K)
    H_ex: float = 3.0e8
    p_lin_ex: float = 300.0     # Pa

    # turbocharger
    omega_f: float = 1.0e-6     # friction coefficient
    J_t: float = 3.0e-5         # kg m^2
    omega_t_init: float = 3000.0   # rad/s
    omega_t_min: float = 2000.0    # rad/s
    omega_t_max: float = 2.4e4     # rad/s
    omega_t_blend: float = 500.0   # rad/s pump fade-in width above the floor

    # turbine and wastegate
    d_t: float = 0.05           # m
    c_p_eg: float = 1200.0      # J/(kg K)
    eta_tMAX: float = 0.75
    eta_tMIN: float = 0.3
    BSR_effMAX: float = 0.7
    k_1t: float = 5.7e-6        # kg sqrt(K)/(s Pa) turbine flow constant
    k_2t: float = 1.4
    c_D_wg: float = 0.9
    A_wgMAX: float = 3.5e-4     # m^2

    # derived unless overridden
    c_vi: float | None = None   # J/(kg K) intake-side cv
    c_ve: float | None = None   # J/(kg K) exhaust-side cv
    C_P0: float | None = None   # Pa, torque map: BMEP = C_P1*p_im - C_P0
    C_P1: float | None = None   # dimensionless

    def __post_init__(self) -> None:
        if self.c_vi is None:
            self.c_vi = self.R_a / (self.kappa_ic - 1.0)
        if self.c_ve is None:
            self.c_ve = self.R_em / (self.kappa_em - 1.0)
        if self.C_P0 is None:
            self.C_P0 = self.C_Tq1
        if self.C_P1 is None:
            self.C_P1 = self.C_Tq2 / P_AMB_NOMINAL
        self.validate()

    @property
    def R_comp(self) -> float:
        """Compressor wheel radius (m)."""
        return self.D_c / 2.0

    def validate(self) -> None:
        positive = [
            "R_a", "R_em", "V_af", "V_c", "V_ic", "V_im", "V_em", "V_ex",
            "H_af", "H_ic", "H_ex", "H_c", "p_lin_af", "p_lin_ic", "p_lin_ex",
            "V_d", "r_c", "AF_s", "J_t", "c_p_eg", "D_c", "d_t", "c_vi", "c_ve",
        ]
        for name in positive:
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"engine parameter {name} must be positive")
        for name in ("kappa_ic", "kappa_ei", "kappa_em"):
            if getattr(self, name) <= 1.0:
                raise ConfigError(f"engine parameter {name} must exceed 1")
        # kappa_th is stored as calibrated (2.0), only sanity-check the branch math
        if self.kappa_th <= 1.0:
            raise ConfigError("kappa_th must exceed 1")
        if not (0.0 < self.eta_cMAX <= 1.0 and 0.0 < self.eta_tMAX <= 1.0):
            raise ConfigError("maximum efficiencies must lie in (0, 1]")
        if self.omega_t_min <= 0.0 or self.omega_t_max <= self.omega_t_min:
            raise ConfigError("turbo speed bounds must satisfy 0 < min < max")


@dataclass
class VehicleSpec:
    """Longitudinal vehicle data and gearbox used for reference generation."""

    m_v: float = 1700.0         # kg
    c_d: float = 0.29
    c_r: float = 0.013
    A_f: float = 2.28           # m^2
    r_w: float = 0.3234         # m
    rho_a: float = 1.29         # kg/m^3
    g: float = GRAVITY
    final_drive: float = 2.774
    reverse_ratio: float = 4.015
    gear_ratios: tuple[float, ...] = (5.250, 3.029, 1.950, 1.457, 1.221, 1.000, 0.809, 0.673)
    # estimated upshift engine speeds per gear (rpm)
    shift_rpm: tuple[float, ...] = (2800.0, 2700.0, 2600.0, 2400.0, 2200.0, 2000.0, 1800.0, 1600.0)
    # gearbox table of vehicle speed per 1000 rpm (km/h); used for shift logic
    kmh_per_1000rpm: tuple[float, ...] = (8.070, 14.00, 21.70, 29.00, 34.70, 42.30, 52.34, 62.90)
    downshift_factor: float = 0.9   # downshift at 90 % of the upshift speed
    idle_rpm: float = 800.0

    def validate(self) -> None:
        if len(self.gear_ratios) != 8 or len(self.shift_rpm) != 8 or len(self.kmh_per_1000rpm) != 8:
            raise ConfigError("vehicle spec needs 8 gears of ratios, shift points and speed factors")
        if any(r <= 0.0 for r in self.gear_ratios) or any(s <= 0.0 for s in self.shift_rpm):
            raise ConfigError("gear ratios and shift speeds must be positive")
        if any(a <= b for a, b in zip(self.gear_ratios, self.gear_ratios[1:])):
            raise ConfigError("gear ratios must strictly decrease from 1st to 8th")
        if self.r_w <= 0.0 or self.m_v <= 0.0:
            raise ConfigError("wheel radius and vehicle mass must be positive")

    def total_ratio(self, gear: int) -> float:
        """Overall driveline ratio (engine rev per wheel rev) for gear 1..8."""
        if not 1 <= gear <= 8:
            raise ConfigError(f"gear index {gear} out of range 1..8")
        return self.final_drive * self.gear_ratios[gear - 1]

    @property
    def idle_omega(self) -> float:
        return self.idle_rpm * math.pi / 30.0


@dataclass
class ControllerGains:
    """PI gains, saturation bounds and throttle-map constants for both loops.

    Pressure errors are normalized by ``e_scale`` before entering the PI
    update so the back-calculation term acts on the same magnitude as the
    error; the effective proportional gain in per-Pa terms is K_p/e_scale.
    """

    e_scale: float = 1.0e5      # Pa
    K_p_th: float = 0.3         # dimensionless (3e-6 per Pa at default scale)
    T_i_th: float = 0.5         # s
    K_p_wg: float = 1.0         # dimensionless (1e-5 per Pa at default scale)
    T_i_wg: float = 1.0         # s
    alpha_th_min: float = 0.0
    alpha_th_max: float = 90.0
    u_wg_min: float = 0.0
    u_wg_max: float = 1.0
    a_0: float = 1.1647e-5
    a_1: float = 3.0718e-5
    a_2: float = 0.0029
    A_th_max: float = 5.0e-4    # m^2, wide-open effective throttle area

    def validate(self) -> None:
        if self.T_i_th <= 0.0 or self.T_i_wg <= 0.0:
            raise ConfigError("integral times must be positive")
        if self.e_scale <= 0.0:
            raise ConfigError("error scale must be positive")
        if self.alpha_th_min >= self.alpha_th_max or self.u_wg_min >= self.u_wg_max:
            raise ConfigError("saturation bounds must satisfy min < max")
        if self.a_2 == 0.0:
            raise ConfigError("throttle map curvature a_2 must be nonzero")
        if self.A_th_max <= 0.0:
            raise ConfigError("A_th_max must be positive")

    @classmethod
    def from_engine(cls, engine: EngineParams, **overrides) -> "ControllerGains":
        gains = cls(a_0=engine.a_0, a_1=engine.a_1, a_2=engine.a_2)
        return replace(gains, **overrides)


def _coerce(raw: str, like) -> object:
    if isinstance(like, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {raw!r}")
    if isinstance(like, int) and not isinstance(like, bool):
        return int(float(raw))
    if isinstance(like, float) or like is None:
        return float(raw)
    if isinstance(like, tuple):
        parts = [p for p in raw.replace(",", " ").split() if p]
        return tuple(float(p) for p in parts)
    return raw


def parse_kv_file(path: str) -> dict[str, str]:
    """Parse a ``key = value`` text file, '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = stripped.split("=", 1)
            key = key.strip()
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = raw.strip()
    return out


def apply_overrides(obj, overrides: dict[str, str], *, source: str = "config"):
    """Return a copy of a parameter dataclass with string overrides applied.

    Unknown keys raise ``ConfigError`` so typos in physics constants are
    caught instead of silently ignored.
    """
    known = {f.name: getattr(obj, f.name) for f in fields(obj)}
    updates = {}
    for key, raw in overrides.items():
        if key not in known:
            raise ConfigError(f"{source}: unknown parameter {key!r}")
        try:
            updates[key] = _coerce(raw, known[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}: bad value for {key!r}: {raw!r}") from exc
    new = replace(obj, **updates)
    new.validate()
    return new


def load_engine_params(path: str | None = None, env_prefix: str | None = None) -> EngineParams:
    """Build engine parameters from defaults, an optional file and environment.

    Environment variables named ``<prefix><KEY>`` override file values; the
    prefix defaults to none (disabled).
    """
    params = EngineParams()
    if path is not None:
        params = apply_overrides(params, parse_kv_file(path), source=path)
    if env_prefix:
        env = {
            key[len(env_prefix):]: val
            for key, val in os.environ.items()
            if key.startswith(env_prefix)
        }
        if env:
            params = apply_overrides(params, env, source=f"env {env_prefix}*")
    return params
