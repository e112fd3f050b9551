"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The heavy fixture runs the full diagnosis campaign on the EUDC cycle once
(fault-free calibration run plus the 11 single-fault runs at dt = 1 ms) and
is shared across the detection-related criteria.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from tcsibench import residuals as R
from tcsibench.simulate import DEFAULT_NOISE_STD, SimConfig, run_closed_loop
from tcsibench.structural import (
    build_dc_motor_example,
    build_engine_structural_model,
    structural_isolability,
)

J_THRESHOLD = 5.0
DETECTION_TIME = 3.0
BASE_SEED = 1234


def report(criterion: str, passed: bool, detail: str = "") -> None:
    mark = "PASS" if passed else "FAIL"
    print(f"[{mark}] {criterion}" + (f" -- {detail}" if detail else ""))


@pytest.fixture(scope="session")
def campaign():
    """Fault-free EUDC run, calibration, and one run per catalogued fault."""
    t0 = time.perf_counter()
    nominal_cfg = SimConfig(cycle="eudc", fault="none", dt=1e-3, seed=BASE_SEED)
    nominal = run_closed_loop(nominal_cfg)
    series = R.generate_residuals(nominal)
    calib = R.calibrate(series)
    normalized_nominal = R.normalize(series, calib)

    # throttle-area fault sized to +20 % flow at the mid-cycle operating point
    mid = int(np.argmin(np.abs(nominal.t - nominal.T_DC / 2.0)))
    fxth_area = 0.2 * float(nominal["A_th"][mid])

    runs, events, spans, walls = {}, {}, {}, {}
    for i, fault in enumerate(R.FAULT_ORDER):
        cfg = SimConfig(cycle="eudc", fault=fault, dt=1e-3,
                        seed=BASE_SEED + 1 + i, fxth_area=fxth_area)
        res = run_closed_loop(cfg)
        runs[fault] = res
        norm = R.normalize(R.generate_residuals(res), calib)
        events[fault] = R.detect(norm, threshold=J_THRESHOLD, t_f=DETECTION_TIME)
        spans[fault] = res.fault_spans
        walls[fault] = res.wall_time_s

    fsm = R.build_fsm(events, spans)
    return {
        "nominal_cfg": nominal_cfg,
        "nominal": nominal,
        "calibration": calib,
        "normalized_nominal": normalized_nominal,
        "events": events,
        "spans": spans,
        "walls": walls,
        "fsm": fsm,
        "total_wall": time.perf_counter() - t0,
    }


def test_criterion_1_structural_engine_fim():
    """Engine structural FIM: exactly the two mutual non-isolable pairs."""
    t0 = time.perf_counter()
    res = structural_isolability(build_engine_structural_model())
    elapsed = time.perf_counter() - t0
    order = res.fim.faults
    expected = np.eye(len(order), dtype=bool)
    for a, b in (("f_paf", "f_Waf"), ("f_Wth", "f_xth")):
        i, j = order.index(a), order.index(b)
        expected[i, j] = expected[j, i] = True
    ok = bool(np.array_equal(res.fim.values, expected)) and elapsed < 1.0
    report("criterion 1: structural engine FIM", ok,
           f"pairs {{f_paf,f_Waf}},{{f_Wth,f_xth}} only, {elapsed*1e3:.0f} ms")
    assert np.array_equal(res.fim.values, expected)
    assert elapsed < 1.0


def test_criterion_2_structural_dcmotor_fim():
    """DC-motor structural FIM equals the published 4x4 pattern."""
    t0 = time.perf_counter()
    res = structural_isolability(build_dc_motor_example())
    elapsed = time.perf_counter() - t0
    expected = np.array(
        [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=bool)
    ok = bool(np.array_equal(res.fim.values, expected)) and elapsed < 1.0
    report("criterion 2: structural dc-motor FIM", ok,
           f"{{f_R,f_i}} mutually non-isolable, {elapsed*1e3:.0f} ms")
    assert np.array_equal(res.fim.values, expected)
    assert elapsed < 1.0


def test_criterion_3_fault_free_quietness(campaign):
    """Nominal EUDC: normalized residuals within J for >= 99 % of samples
    per channel, and zero detection events under the t_f rule."""
    norm = campaign["normalized_nominal"]
    frac = (np.abs(norm.values) < J_THRESHOLD).mean(axis=0)
    events = R.detect(norm, threshold=J_THRESHOLD, t_f=DETECTION_TIME)
    ok = bool(frac.min() >= 0.99) and not events
    report("criterion 3: fault-free residual quietness", ok,
           f"min quiet fraction {frac.min():.4f}, events {len(events)}")
    assert frac.min() >= 0.99
    assert events == []


def test_criterion_4_per_fault_detection(campaign):
    """Every catalogued fault is detected on EUDC by at least one residual
    marked sensitive in the expected pattern, within its active window; each
    run stays under the 60 s wall-clock budget."""
    failures = []
    for j, fault in enumerate(R.FAULT_ORDER):
        expected_rows = {R.RESIDUAL_NAMES[i] for i in range(9) if R.EXPECTED_FSM[i, j]}
        hit = any(
            ev.residual in expected_rows and ev.overlaps(campaign["spans"][fault])
            for ev in campaign["events"][fault]
        )
        if not hit:
            failures.append(fault)
    slow = {f: w for f, w in campaign["walls"].items() if w >= 60.0}
    ok = not failures and not slow
    worst = max(campaign["walls"].values())
    report("criterion 4: per-fault detection", ok,
           f"11/11 detected, slowest run {worst:.1f} s" if ok else
           f"undetected: {failures}, slow: {slow}")
    assert not failures
    assert not slow


def test_criterion_5_sensor_fault_purity(campaign):
    """Sensor-fault FSM columns carry exactly one entry, at their own
    residual."""
    fsm = campaign["fsm"]
    ok = True
    details = []
    for fault, residual in R.SENSOR_FAULT_RESIDUAL.items():
        col = fsm.column(fault)
        expected = np.zeros(9, dtype=bool)
        expected[R.RESIDUAL_NAMES.index(residual)] = True
        if not np.array_equal(col, expected):
            ok = False
            got = [R.RESIDUAL_NAMES[i] for i in np.flatnonzero(col)]
            details.append(f"{fault}: {got}")
    report("criterion 5: sensor-fault purity", ok,
           "each sensor fault triggers only its own residual" if ok else "; ".join(details))
    assert ok


def test_criterion_6_fsm_fidelity(campaign):
    """Campaign FSM agrees with the expected sensitivity pattern on >= 90 %
    of the 99 entries; disagreements are reported entry by entry."""
    agreement, diffs = R.compare_fsm(campaign["fsm"])
    print(campaign["fsm"].render())
    for rname, fname, exp, got in diffs:
        print(f"  differs: {rname} x {fname}: expected {exp}, got {got}")
    ok = agreement >= 0.90
    report("criterion 6: FSM fidelity", ok,
           f"agreement {agreement:.1%} ({len(diffs)} differing entries)")
    assert agreement >= 0.90


def test_criterion_7_torque_tracking(campaign):
    """EUDC torque tracking: RMS error over non-idle samples at most 10 %
    of the reference RMS."""
    nominal = campaign["nominal"]
    ref = nominal["Tq_eREF"]
    act = nominal["Tq_e"]
    mask = ref > 1.0
    rms_ref = float(np.sqrt(np.mean(ref[mask] ** 2)))
    rms_err = float(np.sqrt(np.mean((act[mask] - ref[mask]) ** 2)))
    ratio = rms_err / rms_ref
    ok = ratio <= 0.10
    report("criterion 7: torque tracking", ok,
           f"RMS error {rms_err:.1f} N m = {ratio:.1%} of reference RMS {rms_ref:.1f} N m")
    assert ratio <= 0.10


def test_criterion_8_numerical_core_oracles():
    """Numerical-core fixtures at 1e-9 relative tolerance (RK4 order test at
    its stated band)."""
    import math

    from tcsibench import _kernel as K
    from tcsibench.engine import restriction_flow
    from tcsibench.params import EngineParams, VehicleSpec
    from tcsibench.reference import (engine_speed_reference, pressure_references,
                                     speed_per_1000rpm)
    from tcsibench.simulate import rk4_step

    rel = lambda a, b: abs(a - b) <= 1e-9 * max(abs(a), abs(b))
    params = EngineParams()
    vehicle = VehicleSpec()
    checks = {}

    checks["restriction_flow"] = rel(
        restriction_flow(102000.0, 100000.0, 293.0, 2e8, 2000.0),
        0.059001937840565705)
    checks["throttle_critical_ratio"] = rel(
        (2.0 / (params.kappa_th + 1.0)) ** (params.kappa_th / (params.kappa_th - 1.0)),
        4.0 / 9.0)
    checks["turbine_critical_ratio"] = rel(
        (2.0 / (params.kappa_em + 1.0)) ** (params.kappa_em / (params.kappa_em - 1.0)),
        0.5457277338140649)

    cont_ok = True
    for kappa in (1.3, 1.4, 2.0):
        crit = (2.0 / (kappa + 1.0)) ** (kappa / (kappa - 1.0))
        lo = K.flow_coefficient(crit * (1 - 1e-13), kappa)
        hi = K.flow_coefficient(crit * (1 + 1e-13), kappa)
        cont_ok &= abs(lo - hi) <= 1e-9 * lo
    checks["flow_coefficient_continuity"] = cont_ok

    def integrate(dt):
        x = np.array([1.0])
        for _ in range(int(round(1.0 / dt))):
            x = rk4_step(lambda v: -v, x, dt)
        return abs(float(x[0]) - math.exp(-1.0))

    ratio = integrate(0.02) / integrate(0.01)
    checks["rk4_fourth_order"] = 13.0 <= ratio <= 19.0

    checks["gear_speed_formula"] = rel(speed_per_1000rpm(1, vehicle), 8.371540337179434) \
        and rel(speed_per_1000rpm(8, vehicle), 65.30547811321253)
    checks["engine_speed_formula"] = rel(
        engine_speed_reference(17.47, 8, vehicle), 100.84965349412491)
    checks["drag_force"] = rel(0.5 * vehicle.rho_a * vehicle.c_d * vehicle.A_f * 27.78**2,
                               329.1220976616)
    checks["roll_force"] = rel(vehicle.m_v * vehicle.c_r * vehicle.g, 216.801)
    checks["bmep_formula"] = rel(pressure_references(143.0, params)[0], 998328.3321407565)

    failed = [name for name, ok in checks.items() if not ok]
    report("criterion 8: numerical-core oracles", not failed,
           f"{len(checks)} fixtures" + (f"; failed: {failed}" if failed else ""))
    assert not failed


def test_criterion_9_determinism_and_step_robustness(campaign, tmp_path):
    """Identical config+seed reruns are byte-identical; EUDC intake-pressure
    traces at dt = 1 ms and 0.5 ms agree within 1 % RMS."""
    nominal = campaign["nominal"]
    rerun = run_closed_loop(campaign["nominal_cfg"])
    d1, d2 = tmp_path / "first", tmp_path / "second"
    nominal.save(d1)
    rerun.save(d2)
    identical = (d1 / "run.csv").read_bytes() == (d2 / "run.csv").read_bytes()

    coarse = run_closed_loop(SimConfig(cycle="eudc", fault="none", dt=1e-3,
                                       noise=False, seed=BASE_SEED))
    fine = run_closed_loop(SimConfig(cycle="eudc", fault="none", dt=5e-4,
                                     noise=False, seed=BASE_SEED))
    p1, p2 = coarse["p_im"], fine["p_im"]
    n = min(len(p1), len(p2))
    rms_diff = float(np.sqrt(np.mean((p1[:n] - p2[:n]) ** 2)))
    rms_ref = float(np.sqrt(np.mean(p2[:n] ** 2)))
    frac = rms_diff / rms_ref

    ok = identical and frac < 0.01
    report("criterion 9: determinism and step robustness", ok,
           f"byte-identical rerun: {identical}; dt-halving p_im RMS diff {frac:.3%}")
    assert identical
    assert frac < 0.01
