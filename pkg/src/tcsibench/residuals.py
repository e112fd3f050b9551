"""Residual generation, calibration, detection and the FSM/FIM matrices.

Residuals are estimate minus measurement per sensor (r = yhat - y), low-pass
filtered, then normalized by the mean and standard deviation of a fault-free
calibration run.  A fault is detected when a normalized residual stays
beyond the threshold J longer than the detection time t_f.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .simulate import SimResult

RESIDUAL_NAMES = ("r_Tc", "r_pc", "r_Tic", "r_pic", "r_Tim", "r_pim", "r_Waf", "r_Tqe", "r_pem")

FAULT_ORDER = ("f_paf", "f_Cvol", "f_Waf", "f_Wc", "f_Wic", "f_Wth",
               "f_xth", "f_ypic", "f_ypim", "f_yTic", "f_yWaf")

DEFAULT_THRESHOLD = 5.0   # on normalized residuals
DEFAULT_DETECTION_TIME = 3.0  # s
DEFAULT_FILTER_TAU = 0.5  # s first-order low-pass on raw residuals

# Expected sensitivity pattern of the default residual set (rows follow
# RESIDUAL_NAMES, columns FAULT_ORDER); regression target for campaigns.
EXPECTED_FSM = np.array([
    # paf Cvol Waf  Wc  Wic  Wth  xth ypic ypim yTic yWaf
    [1,   1,   0,   1,  0,   0,   0,  0,   0,   0,   0],   # r_Tc
    [1,   1,   1,   1,  1,   1,   0,  0,   0,   0,   0],   # r_pc
    [0,   1,   0,   1,  0,   0,   0,  0,   0,   1,   0],   # r_Tic
    [1,   1,   1,   1,  1,   1,   0,  1,   0,   0,   0],   # r_pic
    [0,   1,   0,   1,  0,   1,   0,  0,   0,   0,   0],   # r_Tim
    [1,   1,   1,   1,  1,   1,   0,  0,   1,   0,   0],   # r_pim
    [1,   1,   1,   1,  1,   1,   1,  0,   0,   0,   1],   # r_Waf
    [1,   1,   1,   1,  1,   1,   0,  0,   0,   0,   0],   # r_Tqe
    [1,   1,   0,   1,  0,   0,   0,  0,   0,   0,   0],   # r_pem
], dtype=bool)

#: the residual that each sensor fault acts on directly
SENSOR_FAULT_RESIDUAL = {"f_yWaf": "r_Waf", "f_ypim": "r_pim", "f_ypic": "r_pic", "f_yTic": "r_Tic"}


class CalibrationError(ValueError):
    """Raised for degenerate (zero-variance) residual channels."""


@dataclass
class ResidualSeries:
    """Time base plus the nine residual channels (raw or processed)."""

    t: np.ndarray
    values: np.ndarray  # shape (n, 9)

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.t), len(RESIDUAL_NAMES)):
            raise ValueError("residual series must be (n, 9) aligned with time")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("residual series contains non-finite values")

    def channel(self, name: str) -> np.ndarray:
        return self.values[:, RESIDUAL_NAMES.index(name)]


@dataclass
class ResidualCalibration:
    mu: np.ndarray      # (9,) channel means of the fault-free run
    sigma: np.ndarray   # (9,) fault-free standard deviations
    source: str = ""

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["residual", "mu", "sigma"])
            for i, name in enumerate(RESIDUAL_NAMES):
                w.writerow([name, repr(float(self.mu[i])), repr(float(self.sigma[i]))])

    @classmethod
    def load(cls, path: str | Path) -> "ResidualCalibration":
        mu = np.empty(len(RESIDUAL_NAMES))
        sigma = np.empty(len(RESIDUAL_NAMES))
        with open(path, "r", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        for row in rows[1:]:
            idx = RESIDUAL_NAMES.index(row[0])
            mu[idx] = float(row[1])
            sigma[idx] = float(row[2])
        return cls(mu=mu, sigma=sigma, source=str(path))


@dataclass
class DetectionEvent:
    residual: str
    start: float
    duration: float
    peak: float

    @property
    def end(self) -> float:
        return self.start + self.duration

    def overlaps(self, spans) -> bool:
        return any(self.start < hi and self.end > lo for lo, hi in spans)


def lowpass(values: np.ndarray, dt: float, tau: float) -> np.ndarray:
    """First-order low-pass along axis 0, initialized at the first sample."""
    if tau <= 0.0:
        return values.copy()
    alpha = dt / (tau + dt)
    out = np.empty_like(values)
    out[0] = values[0]
    acc = values[0].astype(np.float64, copy=True)
    for k in range(1, len(values)):
        acc += alpha * (values[k] - acc)
        out[k] = acc
    return out


def generate_residuals(run: SimResult, tau: float = DEFAULT_FILTER_TAU) -> ResidualSeries:
    """Raw (filtered) residuals of a run: observer estimate minus measurement.

    The observer channels are the fault-free model twin replayed on the
    logged actuator commands, so sensor faults appear only in their own
    residual while plant-side faults bend every balance they touch.
    """
    if len(run.t) < 2:
        raise ValueError("run log too short for residual generation")
    r = run.observer_matrix() - run.sensor_matrix()
    dt = float(run.t[1] - run.t[0])
    return ResidualSeries(t=run.t.copy(), values=lowpass(r, dt, tau))


def calibrate(series: ResidualSeries, source: str = "") -> ResidualCalibration:
    """Per-channel mean and standard deviation of a fault-free run."""
    mu = series.values.mean(axis=0)
    sigma = series.values.std(axis=0)
    floor = 1e-12
    for i, s in enumerate(sigma):
        if s <= floor:
            raise CalibrationError(
                f"channel {RESIDUAL_NAMES[i]} has zero variance; "
                "calibration needs a noisy fault-free run"
            )
    return ResidualCalibration(mu=mu, sigma=sigma, source=source)


def normalize(series: ResidualSeries, calib: ResidualCalibration) -> ResidualSeries:
    return ResidualSeries(t=series.t, values=(series.values - calib.mu) / calib.sigma)


def detect(
    series: ResidualSeries,
    threshold: float = DEFAULT_THRESHOLD,
    t_f: float = DEFAULT_DETECTION_TIME,
) -> list[DetectionEvent]:
    """Detection events: maximal |r| > J excursions lasting longer than t_f."""
    if threshold <= 0.0 or t_f <= 0.0:
        raise ValueError("threshold and detection time must be positive")
    events: list[DetectionEvent] = []
    t = series.t
    dt = float(t[1] - t[0]) if len(t) > 1 else 0.0
    for i, name in enumerate(RESIDUAL_NAMES):
        above = np.abs(series.values[:, i]) > threshold
        k = 0
        n = len(above)
        while k < n:
            if not above[k]:
                k += 1
                continue
            j = k
            while j < n and above[j]:
                j += 1
            duration = t[j - 1] - t[k] + dt
            if duration > t_f:
                peak = float(np.abs(series.values[k:j, i]).max())
                events.append(DetectionEvent(name, float(t[k]), float(duration), peak))
            k = j
    return events


@dataclass
class FSMMatrix:
    """Boolean residual-by-fault sensitivity matrix."""

    values: np.ndarray
    residuals: tuple[str, ...] = RESIDUAL_NAMES
    faults: tuple[str, ...] = FAULT_ORDER

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=bool)
        if self.values.shape != (len(self.residuals), len(self.faults)):
            raise ValueError("FSM shape must be (n_residuals, n_faults)")

    def column(self, fault: str) -> np.ndarray:
        return self.values[:, self.faults.index(fault)]

    def save(self, path: str | Path) -> None:
        _save_matrix(path, self.values, self.residuals, self.faults)

    def render(self) -> str:
        return _render_matrix(self.values, self.residuals, self.faults, mark="1", empty="0")


@dataclass
class FIMMatrix:
    """Boolean fault-by-fault matrix; entry (i, j) set means fault i is not
    isolable from fault j."""

    values: np.ndarray
    faults: tuple[str, ...] = FAULT_ORDER

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=bool)
        n = len(self.faults)
        if self.values.shape != (n, n):
            raise ValueError("FIM must be square over the fault list")
        if not np.all(np.diag(self.values)):
            raise ValueError("FIM diagonal must be all ones")

    def save(self, path: str | Path) -> None:
        _save_matrix(path, self.values, self.faults, self.faults)

    def render(self) -> str:
        return _render_matrix(self.values, self.faults, self.faults, mark="X", empty=".")


def _save_matrix(path, values, row_labels, col_labels) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([""] + list(col_labels))
        for label, row in zip(row_labels, values.astype(int)):
            w.writerow([label] + list(row))


def _render_matrix(values, row_labels, col_labels, mark="X", empty=".") -> str:
    width = max(len(c) for c in col_labels) + 1
    left = max(len(r) for r in row_labels) + 1
    lines = [" " * left + "".join(c.rjust(width) for c in col_labels)]
    for label, row in zip(row_labels, values):
        cells = "".join((mark if v else empty).rjust(width) for v in row)
        lines.append(label.ljust(left) + cells)
    return "\n".join(lines)


def build_fsm(
    fault_events: dict[str, list[DetectionEvent]],
    fault_spans: dict[str, list[tuple[float, float]]],
) -> FSMMatrix:
    """Sensitivity matrix from one detection pass per single-fault run.

    An entry is set when the residual produced at least one detection event
    overlapping the fault's active window, which keeps warm-up or decay
    transients outside the window from counting.
    """
    missing = [f for f in FAULT_ORDER if f not in fault_events]
    if missing:
        raise ValueError(f"campaign incomplete, missing runs for: {', '.join(missing)}")
    values = np.zeros((len(RESIDUAL_NAMES), len(FAULT_ORDER)), dtype=bool)
    for j, fault in enumerate(FAULT_ORDER):
        spans = fault_spans[fault]
        for ev in fault_events[fault]:
            if ev.overlaps(spans):
                values[RESIDUAL_NAMES.index(ev.residual), j] = True
    return FSMMatrix(values=values)


def fim_from_fsm(fsm: FSMMatrix) -> tuple[FIMMatrix, list[str]]:
    """Isolation matrix under signature-subset semantics.

    Fault i is not isolable from fault j when every residual i triggers is
    also triggered by j (support inclusion), so j can explain any evidence
    for i.  Undetectable faults (all-zero columns) are flagged and are not
    isolable from anything.
    """
    n = len(fsm.faults)
    vals = np.zeros((n, n), dtype=bool)
    undetectable = [fsm.faults[j] for j in range(n) if not fsm.values[:, j].any()]
    for i in range(n):
        ci = fsm.values[:, i]
        for j in range(n):
            if i == j:
                vals[i, j] = True
            elif not ci.any():
                vals[i, j] = True
            else:
                vals[i, j] = bool(np.all(~ci | fsm.values[:, j]))
    return FIMMatrix(values=vals, faults=fsm.faults), undetectable


def compare_fsm(actual: FSMMatrix, expected: np.ndarray = EXPECTED_FSM):
    """Agreement fraction plus the entry-by-entry disagreements."""
    diffs = []
    exp = np.asarray(expected, dtype=bool)
    for i, rname in enumerate(actual.residuals):
        for j, fname in enumerate(actual.faults):
            if actual.values[i, j] != exp[i, j]:
                diffs.append((rname, fname, int(exp[i, j]), int(actual.values[i, j])))
    agreement = 1.0 - len(diffs) / exp.size
    return agreement, diffs
