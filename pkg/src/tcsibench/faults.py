"""Catalog of the 11 injectable faults and their time profiles.

Each fault is one of three shapes (abrupt step, incipient ramp, repeated
pulses) with a magnitude rule: percentage of the local healthy flow,
a fixed pressure/temperature offset, or a throttle-area error.  Percent
faults scale against the concurrent fault-free flow supplied by the
observer twin, so the injected size follows the operating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import _kernel as K
from .engine import FAULT_NAMES, FaultSignals
from .params import EngineParams


class FaultConfigError(ValueError):
    """Unknown fault id or inconsistent profile."""


@dataclass(frozen=True)
class FaultProfile:
    fault: str
    shape: str                      # "abrupt" | "incipient" | "pulsed"
    start: float = 0.0              # window start
    end: float = 1.0                # window end
    fractional_window: bool = True  # window expressed as fraction of T_DC
    pulse_period: float = 0.0       # s; first pulse begins at t = period
    pulse_on: float = 0.0           # s on-time per period
    percent: float = 0.2            # of local healthy flow / sensor value
    offset_K: float = 20.0          # temperature sensor offset
    pressure_drop: float = 20.0e3   # Pa, air-filter restriction severity
    area_error: float | None = None # m^2; calibrated per campaign when None

    def __post_init__(self) -> None:
        if self.fault not in FAULT_NAMES:
            raise FaultConfigError(f"unknown fault id {self.fault!r}")
        if self.shape not in ("abrupt", "incipient", "pulsed"):
            raise FaultConfigError(f"unknown fault shape {self.shape!r}")
        if self.shape == "pulsed":
            if self.pulse_period <= 0.0 or self.pulse_on <= 0.0:
                raise FaultConfigError("pulsed profile needs positive period and on-time")
            if self.pulse_on >= self.pulse_period:
                raise FaultConfigError("pulse on-time must be shorter than the period")

    def window(self, T_DC: float) -> tuple[float, float]:
        if self.fractional_window:
            lo, hi = self.start * T_DC, self.end * T_DC
        else:
            lo, hi = self.start, min(self.end, T_DC) if self.end > 0 else T_DC
        if not (0.0 <= lo < hi <= T_DC + 1e-9):
            raise FaultConfigError(f"{self.fault}: window [{lo}, {hi}] outside [0, {T_DC}]")
        return lo, hi

    def active_spans(self, T_DC: float) -> list[tuple[float, float]]:
        """Time spans with nonzero activation, for detection bookkeeping."""
        lo, hi = self.window(T_DC)
        if self.shape != "pulsed":
            return [(lo, hi)]
        spans = []
        k = 1
        while k * self.pulse_period < T_DC:
            t0 = k * self.pulse_period
            t1 = min(t0 + self.pulse_on, T_DC)
            if t1 > lo and t0 < hi:
                spans.append((max(t0, lo), min(t1, hi)))
            k += 1
        return spans


# default catalog; windows follow the documented scenario set
CATALOG: dict[str, FaultProfile] = {
    "f_paf": FaultProfile("f_paf", "abrupt", start=200.0, end=-1.0, fractional_window=False),
    "f_Cvol": FaultProfile("f_Cvol", "pulsed", pulse_period=150.0, pulse_on=30.0),
    "f_Waf": FaultProfile("f_Waf", "incipient", start=200.0, end=-1.0, fractional_window=False),
    "f_Wc": FaultProfile("f_Wc", "abrupt", start=0.4, end=1.0),
    "f_Wic": FaultProfile("f_Wic", "abrupt", start=0.4, end=0.8),
    "f_Wth": FaultProfile("f_Wth", "pulsed", pulse_period=200.0, pulse_on=40.0),
    "f_xth": FaultProfile("f_xth", "abrupt", start=0.4, end=1.0),
    "f_yWaf": FaultProfile("f_yWaf", "pulsed", pulse_period=150.0, pulse_on=30.0),
    "f_ypim": FaultProfile("f_ypim", "incipient", start=200.0, end=-1.0, fractional_window=False),
    "f_ypic": FaultProfile("f_ypic", "pulsed", pulse_period=200.0, pulse_on=40.0),
    "f_yTic": FaultProfile("f_yTic", "pulsed", pulse_period=150.0, pulse_on=30.0),
}


@dataclass(frozen=True)
class FaultSchedule:
    """At most one active fault profile (single-fault scenarios only)."""

    profile: FaultProfile | None
    T_DC: float

    @classmethod
    def none(cls, T_DC: float) -> "FaultSchedule":
        return cls(profile=None, T_DC=T_DC)

    @classmethod
    def for_fault(cls, fault: str, T_DC: float, *, area_error: float | None = None) -> "FaultSchedule":
        if fault in ("none", "", None):
            return cls.none(T_DC)
        if fault not in CATALOG:
            raise FaultConfigError(
                f"unknown fault {fault!r}; choose one of none, {', '.join(FAULT_NAMES)}"
            )
        profile = CATALOG[fault]
        # the catalog's absolute times assume cycles of >= 400 s; shrink them
        # proportionally for shorter (test) cycles so every fault can fire
        scale = min(T_DC / 400.0, 1.0)
        if scale < 1.0:
            updates = {}
            if not profile.fractional_window:
                updates["start"] = profile.start * scale
                if profile.end > 0.0:
                    updates["end"] = profile.end * scale
            if profile.shape == "pulsed":
                updates["pulse_period"] = profile.pulse_period * scale
                updates["pulse_on"] = profile.pulse_on * scale
            if updates:
                profile = replace(profile, **updates)
        if area_error is not None:
            profile = replace(profile, area_error=area_error)
        return cls(profile=profile, T_DC=T_DC)

    def active_spans(self) -> list[tuple[float, float]]:
        if self.profile is None:
            return []
        return self.profile.active_spans(self.T_DC)


def activation(t: float, profile: FaultProfile, T_DC: float) -> float:
    """Fault activation in [0, 1] at time t.

    Abrupt: 1 inside the window.  Incipient: linear ramp 0 -> 1 across the
    window.  Pulsed: unit square wave, first pulse starting one period into
    the cycle.
    """
    lo, hi = profile.window(T_DC)
    if t < lo or t > hi or t < 0.0:
        return 0.0
    if profile.shape == "abrupt":
        return 1.0
    if profile.shape == "incipient":
        return (t - lo) / (hi - lo)
    k = int(t // profile.pulse_period)
    if k < 1:
        return 0.0
    return 1.0 if (t - k * profile.pulse_period) < profile.pulse_on else 0.0


def leakage_flow(p_high: float, p_low: float, T_amb: float, k_leak: float, kappa: float) -> float:
    """Compressible flow through a leakage orifice of effective area k_leak.

    Choked below the critical pressure ratio, isentropic-orifice expression
    above it; both branches meet continuously at the critical ratio.
    """
    if not p_high >= p_low > 0.0:
        raise ValueError("need p_high >= p_low > 0")
    ratio = p_low / p_high
    crit = (2.0 / (kappa + 1.0)) ** (kappa / (kappa - 1.0))
    if ratio >= crit:
        inner = ratio ** (2.0 / kappa) - ratio ** ((kappa + 1.0) / kappa)
        psi = math.sqrt(2.0 * kappa / (kappa - 1.0) * max(inner, 0.0))
    else:
        psi = math.sqrt(kappa * (2.0 / (kappa + 1.0)) ** ((kappa + 1.0) / (kappa - 1.0)))
    return k_leak * p_high / math.sqrt(T_amb) * psi


@dataclass
class FaultContext:
    """Local healthy-flow and pressure context for magnitude scaling.

    Flow values come from the fault-free observer twin; the plant entries are
    the clean (pre-fault) sensor quantities of the current step.
    """

    W_af_obs: float = 0.0
    W_c_obs: float = 0.0
    W_ic_obs: float = 0.0
    W_th_obs: float = 0.0
    W_ei_obs: float = 0.0
    p_af_obs: float = 101325.0
    p_c_obs: float = 101325.0
    p_ic_obs: float = 101325.0
    p_im_obs: float = 101325.0
    T_af_obs: float = 293.0
    W_af_plant: float = 0.0
    p_im_plant: float = 101325.0
    p_ic_plant: float = 101325.0
    p_amb: float = 101325.0
    T_amb: float = 293.0




def realize(
    t: float,
    schedule: FaultSchedule,
    ctx: FaultContext,
    params: EngineParams,
    *,
    default_area_error: float = 6.0e-6,
) -> FaultSignals:
    """Instantaneous additive fault terms for the plant at time t."""
    prof = schedule.profile
    if prof is None:
        return FaultSignals()
    act = activation(t, prof, schedule.T_DC)
    if act == 0.0:
        return FaultSignals()
    f = FaultSignals()
    name = prof.fault
    if name == "f_paf":
        # flow equivalent of an upstream pressure loss across the filter
        T_in_nom = ctx.T_amb if ctx.p_amb > ctx.p_af_obs else ctx.T_af_obs
        w_nom = K.restriction(ctx.p_amb, ctx.p_af_obs, T_in_nom, params.H_af, params.p_lin_af)
        p_red = max(ctx.p_amb - prof.pressure_drop * act, 1e3)
        T_in_red = ctx.T_amb if p_red > ctx.p_af_obs else ctx.T_af_obs
        w_red = K.restriction(p_red, ctx.p_af_obs, T_in_red, params.H_af, params.p_lin_af)
        f.f_paf = w_red - w_nom
    elif name == "f_Cvol":
        # stuck intake-valve timing degrades the volumetric efficiency
        f.f_Cvol = -prof.percent * ctx.W_ei_obs * act
    elif name == "f_Waf":
        # unmetered ambient air drawn in downstream of the flow sensor
        # (the intake runs below ambient pressure ahead of the compressor)
        f.f_Waf = prof.percent * abs(ctx.W_af_obs) * act
    elif name == "f_Wc":
        f.f_Wc = -prof.percent * abs(ctx.W_c_obs) * act
    elif name == "f_Wic":
        f.f_Wic = -prof.percent * abs(ctx.W_ic_obs) * act
    elif name == "f_Wth":
        f.f_Wth = -prof.percent * abs(ctx.W_th_obs) * act
    elif name == "f_xth":
        area = prof.area_error if prof.area_error is not None else default_area_error
        f.f_xth = area * act
    elif name == "f_yWaf":
        f.f_yWaf = prof.percent * ctx.W_af_plant * act
    elif name == "f_ypim":
        f.f_ypim = prof.percent * ctx.p_im_plant * act
    elif name == "f_ypic":
        f.f_ypic = prof.percent * ctx.p_ic_plant * act
    elif name == "f_yTic":
        f.f_yTic = prof.offset_K * act
    else:  # pragma: no cover - guarded by FaultProfile validation
        raise FaultConfigError(f"unhandled fault {name!r}")
    return f
