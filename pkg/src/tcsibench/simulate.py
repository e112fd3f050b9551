"""Closed-loop fixed-step simulation of engine + controller + fault schedule.

One run integrates two copies of the engine with classical RK4: the plant
(faults injected) and a fault-free observer twin driven by the same actuator
commands.  The twin is the default residual generator's estimate; logging it
alongside the plant sensors makes every run self-contained for diagnosis.
"""

from __future__ import annotations

import hashlib
import math
import time as _time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import _kernel as K
from .controller import BoostController
from .cycles import DrivingCycle, load_cycle
from .engine import FAULT_NAMES, SENSOR_NAMES, STATE_EQUATIONS, STATE_NAMES
from .faults import FaultContext, FaultSchedule, realize
from .params import AmbientConditions, ConfigError, ControllerGains, EngineParams, VehicleSpec
from .reference import build_reference_trajectory

OBSERVER_NAMES = tuple("yhat" + n[1:] for n in SENSOR_NAMES)

COLUMNS = (
    ("t",)
    + ("omega_eREF", "Tq_eREF", "gear", "p_imREF", "p_icREF")
    + ("A_th", "u_wg", "lambda_afr", "p_amb", "T_amb")
    + SENSOR_NAMES
    + OBSERVER_NAMES
    + STATE_NAMES
    + FAULT_NAMES
    + ("Tq_e",)
)

# default per-sensor noise std (y_Tc, y_pc, y_Tic, y_pic, y_Tim, y_pim,
# y_Waf, y_Tqe, y_pem).  The compressor-outlet thermocouple and the exhaust
# pressure tap sit in harsh locations and run noisy; charge-path pressure,
# flow and torque sensors are bench-grade precision instruments.
DEFAULT_NOISE_STD = (12.0, 350.0, 4.0, 350.0, 3.5, 300.0, 4.0e-5, 0.6, 5000.0)


@dataclass
class SimConfig:
    cycle: str = "eudc"
    fault: str = "none"
    dt: float = 1.0e-3
    log_hz: float = 100.0
    noise: bool = True
    noise_std: tuple[float, ...] = DEFAULT_NOISE_STD
    seed: int = 1234
    warmup: float = 5.0
    fxth_area: float = 6.0e-6   # m^2 throttle-area error used when uncalibrated

    def validate(self) -> None:
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if self.log_hz <= 0.0 or self.log_hz > 1.0 / self.dt + 1e-9:
            raise ConfigError("log_hz must lie in (0, 1/dt]")
        if len(self.noise_std) != 9 or any(s < 0.0 for s in self.noise_std):
            raise ConfigError("noise_std needs 9 non-negative entries")
        if self.warmup < 0.0:
            raise ConfigError("warmup must be non-negative")

    @property
    def decimation(self) -> int:
        return max(int(round(1.0 / (self.dt * self.log_hz))), 1)


@dataclass
class SimResult:
    """Time-aligned log of one run plus enough metadata to reproduce it."""

    config: SimConfig
    columns: tuple[str, ...]
    data: np.ndarray            # (n_log, n_columns)
    T_DC: float
    fault_spans: list[tuple[float, float]]
    seed: int
    wall_time_s: float
    input_hash: str
    blowup: tuple[float, str] | None = None

    def __getitem__(self, column: str) -> np.ndarray:
        return self.data[:, self.columns.index(column)]

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    def sensor_matrix(self) -> np.ndarray:
        idx = [self.columns.index(n) for n in SENSOR_NAMES]
        return self.data[:, idx]

    def observer_matrix(self) -> np.ndarray:
        idx = [self.columns.index(n) for n in OBSERVER_NAMES]
        return self.data[:, idx]

    def save(self, out_dir: str | Path) -> Path:
        """Write run.csv, torque tracking and fault signal series + manifest."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        header = ",".join(self.columns)
        np.savetxt(out / "run.csv", self.data, delimiter=",", header=header,
                   comments="", fmt="%.10g")
        track = np.column_stack([self.t, self["Tq_eREF"], self["Tq_e"]])
        np.savetxt(out / "torque_tracking.csv", track, delimiter=",",
                   header="t,Tq_eREF,Tq_e", comments="", fmt="%.10g")
        fault_cols = [self.columns.index(n) for n in FAULT_NAMES]
        fault_abs = np.abs(self.data[:, fault_cols])
        peak = fault_abs.max(axis=0)
        norm = np.where(peak > 0.0, fault_abs / np.where(peak > 0, peak, 1.0), 0.0)
        sig = np.column_stack([self.t, norm.max(axis=1)])
        np.savetxt(out / "fault_signal.csv", sig, delimiter=",",
                   header="t,fault_activation", comments="", fmt="%.10g")
        self._write_manifest(out / "manifest.txt")
        return out

    def _write_manifest(self, path: Path) -> None:
        lines = ["[run]"]
        for f in fields(self.config):
            lines.append(f"{f.name} = {getattr(self.config, f.name)}")
        lines.append(f"seed = {self.seed}")
        lines.append(f"cycle_duration_s = {self.T_DC:.10g}")
        lines.append(f"rows = {self.data.shape[0]}")
        lines.append(f"wall_time_s = {self.wall_time_s:.3f}")
        lines.append(f"input_sha256 = {self.input_hash}")
        status = "ok" if self.blowup is None else f"blowup at t={self.blowup[0]:.4f}s in {self.blowup[1]}"
        lines.append(f"status = {status}")
        lines.append("columns = " + ",".join(self.columns))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path: str | Path) -> "SimResult":
        """Reload a saved run; metadata not present in the CSV is defaulted."""
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(config=SimConfig(), columns=tuple(header), data=data,
                   T_DC=float(data[-1, 0]) if len(data) else 0.0,
                   fault_spans=[], seed=-1, wall_time_s=0.0, input_hash="")


class SimulationBlowup(RuntimeError):
    """Carries the partial log so callers can persist it before exiting."""

    def __init__(self, partial: SimResult, time_s: float, equation: str):
        self.partial = partial
        self.time_s = time_s
        self.equation = equation
        super().__init__(f"simulation blow-up in {equation} at t={time_s:.4f} s")


def rk4_step(deriv_fn, y, dt: float):
    """One classical 4th-order Runge-Kutta step for dy/dt = deriv_fn(y)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    k1 = deriv_fn(y)
    k2 = deriv_fn(y + 0.5 * dt * k1)
    k3 = deriv_fn(y + 0.5 * dt * k2)
    k4 = deriv_fn(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _input_hash(cycle: DrivingCycle, params: EngineParams, config: SimConfig) -> str:
    h = hashlib.sha256()
    h.update(cycle.times.tobytes())
    h.update(cycle.speeds_kmh.tobytes())
    h.update(repr(params).encode())
    h.update(repr(config).encode())
    return h.hexdigest()[:16]


def run_closed_loop(
    config: SimConfig,
    params: EngineParams | None = None,
    vehicle: VehicleSpec | None = None,
    gains: ControllerGains | None = None,
    ambient: AmbientConditions | None = None,
) -> SimResult:
    """Simulate one driving cycle under the configured fault schedule.

    Deterministic for a fixed config and seed.  Raises
    :class:`SimulationBlowup` carrying the partial log if the integration
    produces non-finite derivatives.
    """
    config.validate()
    params = params if params is not None else EngineParams()
    vehicle = vehicle if vehicle is not None else VehicleSpec()
    gains = gains if gains is not None else ControllerGains.from_engine(params)
    ambient = ambient if ambient is not None else AmbientConditions()
    gains.validate()
    ambient.validate()

    cycle = load_cycle(config.cycle)
    refs = build_reference_trajectory(cycle, vehicle, params, config.dt, config.warmup)
    schedule = FaultSchedule.for_fault(config.fault, cycle.duration, area_error=config.fxth_area)

    dt = config.dt
    n = len(refs)
    decim = config.decimation
    k_warm = int(round(config.warmup / dt))
    n_log = 1 + (n - 1 - k_warm) // decim

    P = K.pack_params(params)
    s_p = np.empty(K.N_STATE)
    for i in range(6):
        s_p[2 * i] = ambient.T_amb
        s_p[2 * i + 1] = ambient.p_amb
    s_p[12] = params.omega_t_init
    s_o = s_p.copy()

    alg_p = np.empty(K.N_ALG)
    alg_o = np.empty(K.N_ALG)
    work = np.empty((5, K.N_STATE))
    scratch = np.empty(K.N_ALG)
    f_zero = np.zeros(K.N_FAULT)
    deriv0 = np.empty(K.N_STATE)
    u0 = np.array([0.0, 0.0, refs.omega_eREF[0], params.lambda_afr,
                   ambient.p_amb, ambient.T_amb])
    K.derivatives(s_p, u0, f_zero, P, deriv0, alg_p)
    K.derivatives(s_o, u0, f_zero, P, deriv0, alg_o)

    rng = np.random.default_rng(config.seed)
    sigma = np.asarray(config.noise_std) if config.noise else np.zeros(9)
    noise = rng.standard_normal((n, 9)) * sigma if config.noise else None

    ctrl = BoostController(params, gains)
    log = np.empty((n_log, len(COLUMNS)))
    log_row = 0

    p_amb = ambient.p_amb
    T_amb = ambient.T_amb
    lam = params.lambda_afr
    fault_run = schedule.profile is not None
    CP0, CP1 = params.C_P0, params.C_P1
    Vd, nr = params.V_d, params.n_r
    tq_scale = Vd / (2.0 * math.pi * nr)
    started = _time.perf_counter()

    u_arr = np.empty(K.N_ACT)
    u_arr[3] = lam
    u_arr[4] = p_amb
    u_arr[5] = T_amb
    f_arr = f_zero

    for k in range(n):
        t = refs.t[k]

        if fault_run:
            ctx = FaultContext(
                W_af_obs=alg_o[K.G_WAF], W_c_obs=alg_o[K.G_WC], W_ic_obs=alg_o[K.G_WIC],
                W_th_obs=alg_o[K.G_WTH], W_ei_obs=alg_o[K.G_WEI],
                p_af_obs=s_o[K.I_PAF], p_c_obs=s_o[K.I_PC], p_ic_obs=s_o[K.I_PIC],
                p_im_obs=s_o[K.I_PIM], T_af_obs=s_o[K.I_TAF],
                W_af_plant=alg_p[K.G_WAF], p_im_plant=s_p[K.I_PIM],
                p_ic_plant=s_p[K.I_PIC], p_amb=p_amb, T_amb=T_amb,
            )
            f_arr = realize(t, schedule, ctx, params,
                            default_area_error=config.fxth_area).to_array()

        # plant sensors (noisy, faulted) and observer estimates
        # metered flow: the sensor sees the filter restriction (f_paf shifts
        # the restriction itself, the f_Waf leak enters downstream of it)
        T_sel_p = T_amb if p_amb > s_p[K.I_PAF] else s_p[K.I_TAF]
        W_af_p = K.restriction(p_amb, s_p[K.I_PAF], T_sel_p, params.H_af, params.p_lin_af) \
            + f_arr[K.F_PAF]
        Tq_e_p = tq_scale * max(CP1 * s_p[K.I_PIM] - CP0, 0.0)
        T_sel_o = T_amb if p_amb > s_o[K.I_PAF] else s_o[K.I_TAF]
        W_af_o = K.restriction(p_amb, s_o[K.I_PAF], T_sel_o, params.H_af, params.p_lin_af)
        Tq_e_o = tq_scale * max(CP1 * s_o[K.I_PIM] - CP0, 0.0)

        y = np.array([
            s_p[K.I_TC], s_p[K.I_PC],
            s_p[K.I_TIC] + f_arr[K.F_YTIC], s_p[K.I_PIC] + f_arr[K.F_YPIC],
            s_p[K.I_TIM], s_p[K.I_PIM] + f_arr[K.F_YPIM],
            W_af_p + f_arr[K.F_YWAF], Tq_e_p, s_p[K.I_PEM],
        ])
        if noise is not None:
            y += noise[k]
        yhat = (s_o[K.I_TC], s_o[K.I_PC], s_o[K.I_TIC], s_o[K.I_PIC],
                s_o[K.I_TIM], s_o[K.I_PIM], W_af_o, Tq_e_o, s_o[K.I_PEM])

        A_th, u_wg, _ = ctrl.step(
            refs.p_imREF[k], refs.p_icREF[k], refs.omega_eREF[k],
            y[5], y[3], y[8], y[4], p_amb, T_amb, dt,
        )

        if k >= k_warm and (k - k_warm) % decim == 0:
            row = log[log_row]
            row[0] = t
            row[1] = refs.omega_eREF[k]
            row[2] = refs.Tq_eREF[k]
            row[3] = refs.gear[k]
            row[4] = refs.p_imREF[k]
            row[5] = refs.p_icREF[k]
            row[6] = A_th
            row[7] = u_wg
            row[8] = lam
            row[9] = p_amb
            row[10] = T_amb
            row[11:20] = y
            row[20:29] = yhat
            row[29:42] = s_p
            row[42:53] = f_arr
            row[53] = Tq_e_p
            log_row += 1

        u_arr[0] = A_th
        u_arr[1] = u_wg
        u_arr[2] = refs.omega_eREF[k]
        bad = K.advance_pair(s_p, s_o, u_arr, f_arr, P, dt,
                             alg_p, alg_o, work, scratch, f_zero)
        if bad:
            equation = _diagnose_blowup(s_p, s_o, u_arr, f_arr, P)
            partial = SimResult(
                config=config, columns=COLUMNS, data=log[:log_row].copy(),
                T_DC=cycle.duration, fault_spans=schedule.active_spans(),
                seed=config.seed, wall_time_s=_time.perf_counter() - started,
                input_hash=_input_hash(cycle, params, config),
                blowup=(float(t), equation),
            )
            raise SimulationBlowup(partial, float(t), equation)

    return SimResult(
        config=config, columns=COLUMNS, data=log[:log_row],
        T_DC=cycle.duration, fault_spans=schedule.active_spans(),
        seed=config.seed, wall_time_s=_time.perf_counter() - started,
        input_hash=_input_hash(cycle, params, config),
    )


def _diagnose_blowup(s_p, s_o, u_arr, f_arr, P) -> str:
    deriv = np.empty(K.N_STATE)
    alg = np.empty(K.N_ALG)
    for s, f in ((s_p, f_arr), (s_o, np.zeros(K.N_FAULT))):
        if not np.all(np.isfinite(s)):
            bad = int(np.argmax(~np.isfinite(s)))
            return STATE_EQUATIONS[bad]
        K.derivatives(s, u_arr, f, P, deriv, alg)
        if not np.all(np.isfinite(deriv)):
            bad = int(np.argmax(~np.isfinite(deriv)))
            return STATE_EQUATIONS[bad]
    return STATE_EQUATIONS[0]
