#!/usr/bin/env python3
"""Regenerate the bundled driving-cycle CSV fixtures.

Each cycle is defined by speed breakpoints (s, km/h) and written resampled
at 1 Hz.  EUDC/NEDC follow the standard segment layout; the WLTP and FTP-75
profiles are hand-built approximations with the standard phase durations and
peak speeds.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

DEST = Path(__file__).resolve().parents[1] / "src" / "tcsibench" / "cycles"

EUDC = [
    (0, 0), (20, 0), (61, 70), (111, 70), (119, 50), (188, 50), (201, 70),
    (251, 70), (286, 100), (316, 100), (336, 120), (346, 120), (380, 0), (400, 0),
]

# one 195 s urban block of the NEDC
ECE15 = [
    (0, 0), (11, 0), (15, 15), (23, 15), (28, 0), (49, 0), (61, 32), (85, 32),
    (96, 0), (117, 0), (143, 50), (155, 50), (163, 35), (176, 35), (188, 0), (195, 0),
]

WLTP = [
    # low phase
    (0, 0), (11, 0), (29, 40), (45, 25), (65, 42), (89, 0), (109, 0), (131, 48),
    (156, 30), (182, 52), (211, 0), (240, 0), (262, 35), (285, 20), (306, 45),
    (330, 56.5), (360, 40), (381, 0), (406, 0), (428, 38), (453, 24), (478, 44),
    (508, 0), (535, 0), (556, 30), (573, 15), (589, 0),
    # medium phase
    (604, 0), (631, 55), (663, 40), (693, 62), (726, 45), (760, 76.6), (795, 60),
    (828, 70), (860, 35), (889, 55), (920, 30), (949, 58), (978, 20), (1000, 40), (1022, 0),
    # high phase
    (1037, 0), (1070, 60), (1105, 75), (1140, 60), (1175, 85), (1210, 70),
    (1245, 97.4), (1285, 80), (1320, 90), (1355, 70), (1390, 82), (1425, 60),
    (1450, 30), (1477, 0),
    # extra-high phase
    (1490, 0), (1525, 80), (1560, 100), (1595, 115), (1630, 131.3), (1665, 120),
    (1700, 125), (1735, 100), (1765, 60), (1788, 20), (1800, 0),
]

FTP75 = [
    # cold-start phase
    (0, 0), (20, 0), (48, 40), (70, 25), (95, 50), (125, 91.2), (160, 75),
    (190, 85), (225, 55), (250, 30), (275, 48), (300, 0), (320, 0), (345, 35),
    (370, 25), (395, 45), (420, 30), (445, 50), (470, 25), (490, 10), (505, 0),
    # stabilized phase
    (525, 0), (550, 35), (575, 28), (600, 45), (625, 30), (650, 40), (675, 20),
    (700, 38), (725, 0), (745, 0), (770, 32), (795, 42), (820, 28), (845, 50),
    (870, 36), (895, 55.2), (920, 40), (945, 48), (970, 30), (995, 42),
    (1020, 25), (1045, 38), (1070, 15), (1090, 0), (1110, 0), (1135, 30),
    (1160, 45), (1185, 32), (1210, 48), (1235, 28), (1260, 40), (1285, 20),
    (1310, 34), (1335, 16), (1355, 8), (1372, 0),
    # hot-start phase
    (1392, 0), (1420, 42), (1442, 28), (1467, 52), (1497, 88), (1532, 72),
    (1562, 82), (1597, 52), (1622, 28), (1647, 45), (1672, 0), (1692, 0),
    (1717, 34), (1742, 24), (1767, 44), (1792, 30), (1817, 48), (1842, 22),
    (1860, 8), (1874, 0),
]

SYNTHETIC = [(0, 0), (5, 0), (20, 60), (40, 60), (55, 0), (60, 0)]


def nedc_breakpoints() -> list[tuple[float, float]]:
    pts: list[tuple[float, float]] = [(0, 0), (40, 0)]
    t0 = 40.0
    for _ in range(4):
        for t, v in ECE15:
            if t == 0 and pts[-1][0] == t0:
                continue
            pts.append((t0 + t, v))
        t0 += 195.0
    for t, v in EUDC:
        if t == 0 and pts[-1][0] == t0:
            continue
        pts.append((t0 + t, v))
    return pts


def write_cycle(name: str, breakpoints) -> None:
    t_bp = np.array([p[0] for p in breakpoints], dtype=float)
    v_bp = np.array([p[1] for p in breakpoints], dtype=float)
    t = np.arange(0.0, t_bp[-1] + 0.5, 1.0)
    v = np.interp(t, t_bp, v_bp)
    DEST.mkdir(parents=True, exist_ok=True)
    with open(DEST / f"{name}.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("time_s,speed_kmh\n")
        for ti, vi in zip(t, v):
            fh.write(f"{ti:.0f},{vi:.2f}\n")
    print(f"wrote {name}: {len(t)} rows, {t[-1]:.0f} s, max {v.max():.1f} km/h")


def main() -> None:
    write_cycle("eudc", EUDC)
    write_cycle("nedc", nedc_breakpoints())
    write_cycle("wltp", WLTP)
    write_cycle("ftp75", FTP75)
    write_cycle("synthetic", SYNTHETIC)


if __name__ == "__main__":
    main()
