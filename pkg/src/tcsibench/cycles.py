"""Driving-cycle ingestion.

Cycles are two-column CSV files, ``time_s,speed_kmh`` (header optional,
UTF-8).  Fixtures for WLTP, NEDC, EUDC, FTP-75 (1 Hz) and a short synthetic
trapezoid are bundled as package data; the WLTP and FTP-75 fixtures are
representative approximations of the standard profiles, sufficient to drive
the testbed but not certified traces.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

BUILTIN_CYCLES = ("wltp", "nedc", "eudc", "ftp75", "synthetic")


class CycleError(ValueError):
    """Malformed cycle file or unknown cycle name."""


@dataclass
class DrivingCycle:
    name: str
    times: np.ndarray        # s, strictly increasing from 0
    speeds_kmh: np.ndarray   # km/h, >= 0

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64)
        self.speeds_kmh = np.asarray(self.speeds_kmh, dtype=np.float64)
        if self.times.ndim != 1 or self.times.shape != self.speeds_kmh.shape:
            raise CycleError("cycle needs matching 1-d time and speed arrays")
        if len(self.times) < 2:
            raise CycleError("cycle needs at least two samples")
        if self.times[0] != 0.0:
            raise CycleError("cycle time base must start at 0")
        if np.any(np.diff(self.times) <= 0.0):
            raise CycleError("cycle times must be strictly increasing")
        if np.any(self.speeds_kmh < 0.0):
            raise CycleError("cycle speeds must be non-negative")

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def speed_kmh_at(self, t) -> np.ndarray:
        """Linear interpolation; 0 outside the recorded window."""
        return np.interp(t, self.times, self.speeds_kmh, left=0.0, right=0.0)

    def speed_ms_at(self, t) -> np.ndarray:
        return self.speed_kmh_at(t) / 3.6

    def sample_accels(self) -> np.ndarray:
        """Acceleration (m/s^2) at the sample instants.

        Central finite differences on the sampled trace, one-sided at the
        endpoints.
        """
        v = self.speeds_kmh / 3.6
        t = self.times
        a = np.empty_like(v)
        a[0] = (v[1] - v[0]) / (t[1] - t[0])
        a[-1] = (v[-1] - v[-2]) / (t[-1] - t[-2])
        a[1:-1] = (v[2:] - v[:-2]) / (t[2:] - t[:-2])
        return a

    def accel_at(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.sample_accels(), left=0.0, right=0.0)


def parse_cycle_csv(text: str, name: str) -> DrivingCycle:
    rows = [r for r in csv.reader(text.splitlines()) if r and any(c.strip() for c in r)]
    if not rows:
        raise CycleError(f"cycle {name!r}: empty file")
    start = 0
    try:
        float(rows[0][0])
    except (ValueError, IndexError):
        start = 1  # header row
    times = []
    speeds = []
    for i, row in enumerate(rows[start:], start=start + 1):
        if len(row) < 2:
            raise CycleError(f"cycle {name!r} line {i}: expected two columns")
        try:
            times.append(float(row[0]))
            speeds.append(float(row[1]))
        except ValueError as exc:
            raise CycleError(f"cycle {name!r} line {i}: {exc}") from exc
    return DrivingCycle(name=name, times=np.array(times), speeds_kmh=np.array(speeds))


def load_cycle(name_or_path: str) -> DrivingCycle:
    """Load a bundled cycle by name or any two-column CSV by path."""
    key = name_or_path.lower()
    if key in BUILTIN_CYCLES:
        ref = resources.files("tcsibench").joinpath(f"cycles/{key}.csv")
        return parse_cycle_csv(ref.read_text(encoding="utf-8"), key)
    path = Path(name_or_path)
    if not path.exists():
        raise CycleError(
            f"unknown cycle {name_or_path!r}; use one of {', '.join(BUILTIN_CYCLES)} or a CSV path"
        )
    return parse_cycle_csv(path.read_text(encoding="utf-8"), path.stem)
