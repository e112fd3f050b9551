"""Numeric core of the engine model.

Everything here works on flat float64 arrays so the hot loop can be compiled
with numba when it is available.  The public, typed API lives in
``tcsibench.engine``; this module is an implementation detail shared by the
single-point evaluators and the closed-loop simulator.

State vector layout (13 entries):
    0 T_af   1 p_af   2 T_c    3 p_c    4 T_ic   5 p_ic   6 T_im
    7 p_im   8 T_em   9 p_em  10 T_t   11 p_t   12 omega_t

Actuator vector layout (6 entries):
    0 A_th  1 u_wg  2 omega_e  3 lambda  4 p_amb  5 T_amb

Fault vector layout (11 entries, catalog order):
    0 f_paf  1 f_Cvol  2 f_Waf  3 f_Wc  4 f_Wic  5 f_Wth
    6 f_xth  7 f_yWaf  8 f_ypim  9 f_ypic  10 f_yTic
"""

from __future__ import annotations

import math

import numpy as np

try:  # pragma: no cover - exercised implicitly by the test suite
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


N_STATE = 13
N_ACT = 6
N_FAULT = 11

# state indices
I_TAF, I_PAF, I_TC, I_PC, I_TIC, I_PIC, I_TIM, I_PIM, I_TEM, I_PEM, I_TT, I_PT, I_WT = range(13)

# actuator indices
A_ATH, A_UWG, A_WE, A_LAM, A_PAMB, A_TAMB = range(6)

# fault indices
F_PAF, F_CVOL, F_WAF, F_WC, F_WIC, F_WTH, F_XTH, F_YWAF, F_YPIM, F_YPIC, F_YTIC = range(11)

# parameter-vector indices (packed by pack_params)
(
    P_RA, P_REM, P_KIC, P_KEI, P_KEM, P_KTH,
    P_VAF, P_VC, P_VIC, P_VIM, P_VEM, P_VEX,
    P_HAF, P_PLAF, P_HIC, P_PLIC, P_HEX, P_PLEX, P_HC, P_PLC,
    P_ETACMAX, P_ETACMIN, P_PHICMAX, P_PSICMAX, P_DC,
    P_VD, P_NR, P_RC, P_CVOL, P_AFS, P_T0, P_CEO,
    P_HTOT, P_DPIPE, P_LPIPE, P_NPIPE,
    P_JT, P_OMF, P_DT, P_CPEG, P_ETATMAX, P_ETATMIN, P_BSREFF,
    P_K1T, P_K2T, P_CDWG, P_AWGMAX,
    P_WTMIN, P_WTMAX, P_WTBLEND,
    P_CVI, P_CVE, P_CP0, P_CP1, P_EPSIC,
    P_PFLOOR, P_TFLOOR,
) = range(57)

N_PARAM = 57

# algebraic-output indices
(
    G_WAF, G_WC, G_WIC, G_WTH, G_WEI, G_WF, G_WEO, G_WWG, G_WT, G_WTURBO, G_WEXH,
    G_TAFIN, G_TCIN, G_TICIN, G_TTH, G_TEO, G_TTIN, G_TWG, G_TTOUT, G_TTURBO, G_TEXH,
    G_PIC_RATIO, G_PITH, G_PITHCRIT, G_PIT, G_PITCRIT,
    G_PHIC, G_PSIC, G_PSITH, G_PSIT,
    G_ETAC, G_ETAT, G_BSR,
    G_TQT, G_TQC, G_TQE, G_OMEGAE, G_SURGE,
) = range(38)

N_ALG = 38


def pack_params(p) -> np.ndarray:
    """Flatten an EngineParams dataclass into the kernel parameter vector."""
    vec = np.empty(N_PARAM, dtype=np.float64)
    vec[P_RA] = p.R_a
    vec[P_REM] = p.R_em
    vec[P_KIC] = p.kappa_ic
    vec[P_KEI] = p.kappa_ei
    vec[P_KEM] = p.kappa_em
    vec[P_KTH] = p.kappa_th
    vec[P_VAF] = p.V_af
    vec[P_VC] = p.V_c
    vec[P_VIC] = p.V_ic
    vec[P_VIM] = p.V_im
    vec[P_VEM] = p.V_em
    vec[P_VEX] = p.V_ex
    vec[P_HAF] = p.H_af
    vec[P_PLAF] = p.p_lin_af
    vec[P_HIC] = p.H_ic
    vec[P_PLIC] = p.p_lin_ic
    vec[P_HEX] = p.H_ex
    vec[P_PLEX] = p.p_lin_ex
    vec[P_HC] = p.H_c
    vec[P_PLC] = p.p_lin_c
    vec[P_ETACMAX] = p.eta_cMAX
    vec[P_ETACMIN] = p.eta_cMIN
    vec[P_PHICMAX] = p.Phi_cMAX
    vec[P_PSICMAX] = p.Psi_cMAX
    vec[P_DC] = p.D_c
    vec[P_VD] = p.V_d
    vec[P_NR] = p.n_r
    vec[P_RC] = p.r_c
    vec[P_CVOL] = p.C_etavol
    vec[P_AFS] = p.AF_s
    vec[P_T0] = p.T_0
    vec[P_CEO] = p.C_eo
    vec[P_HTOT] = p.h_ext
    vec[P_DPIPE] = p.d_pipe
    vec[P_LPIPE] = p.l_pipe
    vec[P_NPIPE] = p.n_pipe
    vec[P_JT] = p.J_t
    vec[P_OMF] = p.omega_f
    vec[P_DT] = p.d_t
    vec[P_CPEG] = p.c_p_eg
    vec[P_ETATMAX] = p.eta_tMAX
    vec[P_ETATMIN] = p.eta_tMIN
    vec[P_BSREFF] = p.BSR_effMAX
    vec[P_K1T] = p.k_1t
    vec[P_K2T] = p.k_2t
    vec[P_CDWG] = p.c_D_wg
    vec[P_AWGMAX] = p.A_wgMAX
    vec[P_WTMIN] = p.omega_t_min
    vec[P_WTMAX] = p.omega_t_max
    vec[P_WTBLEND] = p.omega_t_blend
    vec[P_CVI] = p.c_vi
    vec[P_CVE] = p.c_ve
    vec[P_CP0] = p.C_P0
    vec[P_CP1] = p.C_P1
    vec[P_EPSIC] = p.h_ic
    vec[P_PFLOOR] = 1.2e3
    vec[P_TFLOOR] = 210.0
    return vec


@njit(cache=True)
def restriction(p_up, p_down, T_in, H, p_lin):
    """Signed incompressible-restriction mass flow (kg/s).

    Magnitude sqrt(max(p)/(H T)) * sqrt(|dp|); below p_lin the sqrt(|dp|)
    factor is replaced by |dp|/sqrt(p_lin) so flow and slope stay finite at
    zero pressure difference.  Sign follows p_up - p_down.
    """
    hi = p_up if p_up >= p_down else p_down
    dp = p_up - p_down
    mag_dp = abs(dp)
    pref = math.sqrt(hi / (H * T_in))
    if mag_dp >= p_lin:
        mag = pref * math.sqrt(mag_dp)
    else:
        mag = pref * mag_dp / math.sqrt(p_lin)
    if dp >= 0.0:
        return mag
    return -mag


@njit(cache=True)
def flow_coefficient(ratio, kappa):
    """Choked/unchoked orifice flow coefficient Psi(ratio) for given kappa."""
    crit = (2.0 / (kappa + 1.0)) ** (kappa / (kappa - 1.0))
    if ratio <= crit:
        return math.sqrt(kappa) * (2.0 / (kappa + 1.0)) ** ((kappa + 1.0) / (2.0 * (kappa - 1.0)))
    inner = ratio ** (2.0 / kappa) - ratio ** ((kappa + 1.0) / kappa)
    if inner < 0.0:
        inner = 0.0
    return math.sqrt(2.0 * kappa / (kappa - 1.0) * inner)


@njit(cache=True)
def derivatives(s, u, f, P, deriv, alg):
    """Evaluate the full algebraic chain and the 13 state derivatives."""
    T_af = s[0]
    p_af = s[1]
    T_c = s[2]
    p_c = s[3]
    T_ic = s[4]
    p_ic = s[5]
    T_im = s[6]
    p_im = s[7]
    T_em = s[8]
    p_em = s[9]
    T_t = s[10]
    p_t = s[11]
    w_t = s[12]

    A_th = u[0]
    u_wg = u[1]
    w_e = u[2]
    lam = u[3]
    p_amb = u[4]
    T_amb = u[5]

    R_a = P[P_RA]
    R_em = P[P_REM]
    c_vi = P[P_CVI]
    c_ve = P[P_CVE]
    cp_i = R_a + c_vi
    cp_e = R_em + c_ve

    if w_t < P[P_WTMIN]:
        w_t = P[P_WTMIN]
    elif w_t > P[P_WTMAX]:
        w_t = P[P_WTMAX]

    # --- air filter intake ---
    T_af_in = T_amb if p_amb > p_af else T_af
    W_af = restriction(p_amb, p_af, T_af_in, P[P_HAF], P[P_PLAF]) + f[F_WAF] + f[F_PAF]

    # --- compressor ---
    Pi_c = p_c / p_af
    x_ic = (P[P_KIC] - 1.0) / P[P_KIC]
    head = Pi_c ** x_ic - 1.0
    D3 = P[P_DC] * P[P_DC] * P[P_DC]
    R2w2 = (P[P_DC] / 2.0) ** 2 * w_t * w_t
    Psi_c = 4.0 * math.pi ** 2 * cp_i * T_af / R2w2 * head
    sarg = 1.0 - Psi_c / (P[P_PSICMAX] * P[P_PSICMAX])
    surge = 0.0
    if sarg < 0.0:
        sarg = 0.0
        surge = 1.0
    elif sarg > 1.0:
        sarg = 1.0
    fade = (w_t - P[P_WTMIN]) / P[P_WTBLEND]
    if fade < 0.0:
        fade = 0.0
    elif fade > 1.0:
        fade = 1.0
    W_pump = math.sqrt(sarg) * P[P_PHICMAX] * D3 * w_t * p_af / (2.0 * math.pi * T_af * R_a)
    # stalled wheel passes gradient-driven flow through its passages
    W_leakthrough = restriction(p_af, p_c, T_af, P[P_HC], P[P_PLC])
    # leak faults drain mass between volumes: the upstream balance sees the
    # wheel/orifice flow, only the receiving volume sees the faulted flow
    W_c_up = fade * W_pump + (1.0 - fade) * W_leakthrough
    W_c = W_c_up + f[F_WC]

    Phi_c = 2.0 * math.pi * W_c_up * R_a * T_af / (D3 * w_t * p_af)
    eta_c = Phi_c * P[P_ETACMAX] / (P[P_PHICMAX] * P[P_PHICMAX]) * (2.0 * P[P_PHICMAX] - Phi_c)
    if eta_c < P[P_ETACMIN]:
        eta_c = P[P_ETACMIN]
    elif eta_c > P[P_ETACMAX]:
        eta_c = P[P_ETACMAX]
    Tq_c = W_c_up * cp_i * T_af * head / (eta_c * w_t)
    T_c_in = T_af * (1.0 + head / eta_c)

    # --- intercooler path ---
    T_ic_in_raw = T_c if p_c > p_ic else T_ic
    eps = P[P_EPSIC]
    T_ic_in = (1.0 - eps) * T_ic_in_raw + eps * T_amb
    W_ic_up = restriction(p_c, p_ic, T_ic_in, P[P_HIC], P[P_PLIC])
    W_ic = W_ic_up + f[F_WIC]

    # --- throttle ---
    T_th = T_ic if p_ic > p_im else T_im
    Pi_th = p_im / p_ic
    k_th = P[P_KTH]
    Pi_thCRIT = (2.0 / (k_th + 1.0)) ** (k_th / (k_th - 1.0))
    Psi_th = flow_coefficient(Pi_th, k_th)
    A_eff = A_th + f[F_XTH]
    if A_eff < 0.0:
        A_eff = 0.0
    W_th_up = p_ic * A_eff / math.sqrt(T_ic * R_a) * Psi_th
    W_th = W_th_up + f[F_WTH]

    # --- engine flows ---
    ratio_em = p_em / p_im
    vol = (P[P_RC] - ratio_em ** (1.0 / P[P_KEI])) / (P[P_RC] - 1.0)
    W_ei = P[P_CVOL] * vol * P[P_VIM] * w_e * p_im / (4.0 * math.pi * R_a * T_im)
    if W_ei < 0.0:
        W_ei = 0.0  # no reverse flow through the engine
    W_ei = W_ei + f[F_CVOL]
    W_f = W_ei / (P[P_AFS] * lam)
    W_eo = W_ei + W_f
    T_eo = W_eo * P[P_CEO] + P[P_T0]
    cp_em = R_em * P[P_KEM] / (P[P_KEM] - 1.0)
    if W_eo > 1.0e-12:
        expo = -P[P_HTOT] * math.pi * P[P_DPIPE] * P[P_LPIPE] * P[P_NPIPE] / (W_eo * cp_em)
        T_t_in = T_amb + (T_eo - T_amb) * math.exp(expo)
    else:
        T_t_in = T_amb

    # --- turbine and wastegate ---
    T_wg = T_em if p_em > p_t else T_t
    Pi_t = p_t / p_em
    k_em_r = P[P_KEM]
    Pi_tCRIT = (2.0 / (k_em_r + 1.0)) ** (k_em_r / (k_em_r - 1.0))
    Psi_t = flow_coefficient(Pi_t, k_em_r)
    W_wg = p_em * u_wg * P[P_CDWG] * P[P_AWGMAX] / math.sqrt(T_em * R_em) * Psi_t

    x_em = (k_em_r - 1.0) / k_em_r
    drop = 1.0 - Pi_t ** x_em
    if drop < 0.0:
        drop = 0.0
    inner_bsr = 2.0 * P[P_CPEG] * T_em * drop
    if inner_bsr < 1.0e-9:
        inner_bsr = 1.0e-9
    BSR = P[P_DT] * w_t / (2.0 * math.sqrt(inner_bsr))
    rel = (BSR - P[P_BSREFF]) / P[P_BSREFF]
    eta_t = P[P_ETATMAX] * (1.0 - rel * rel)
    if eta_t < P[P_ETATMIN]:
        eta_t = P[P_ETATMIN]
    elif eta_t > P[P_ETATMAX]:
        eta_t = P[P_ETATMAX]
    T_t_out = T_em * drop * eta_t

    wtin = 1.0 - Pi_t ** P[P_K2T]
    if wtin < 0.0:
        wtin = 0.0
    W_t = P[P_K1T] * p_em / math.sqrt(T_em) * math.sqrt(wtin)
    Tq_t = W_t * P[P_CPEG] * T_t_out / w_t
    W_turbo = -(W_t + W_wg)
    mix = (W_t + W_wg) * P[P_CPEG]
    if mix > 1.0e-12:
        T_turbo = (W_t * P[P_CPEG] * T_t_out + W_wg * P[P_CPEG] * T_wg) / mix
    else:
        T_turbo = T_wg

    # --- exhaust system ---
    T_exh = T_amb if p_amb > p_t else T_t
    W_exh = restriction(p_amb, p_t, T_exh, P[P_HEX], P[P_PLEX])

    # --- crankshaft torque map ---
    bmep = P[P_CP1] * p_im - P[P_CP0]
    if bmep < 0.0:
        bmep = 0.0
    Tq_e = P[P_VD] * bmep / (2.0 * math.pi * P[P_NR])

    # --- state derivatives: paired energy/mass balances per volume ---
    dT_af = R_a * T_af / (p_af * P[P_VAF] * c_vi) * (
        cp_i * W_af * T_af_in - cp_i * W_c_up * T_af - (W_af - W_c_up) * c_vi * T_af
    )
    dp_af = R_a * T_af / P[P_VAF] * (W_af - W_c_up) + p_af / T_af * dT_af

    dT_c = R_a * T_c / (p_c * P[P_VC] * c_vi) * (
        cp_i * W_c * T_c_in - cp_i * W_ic_up * T_c - (W_c - W_ic_up) * c_vi * T_c
    )
    dp_c = R_a * T_c / P[P_VC] * (W_c - W_ic_up) + p_c / T_c * dT_c

    dT_ic = R_a * T_ic / (p_ic * P[P_VIC] * c_vi) * (
        cp_i * W_ic * T_ic_in - cp_i * W_th_up * T_ic - (W_ic - W_th_up) * c_vi * T_ic
    )
    dp_ic = R_a * T_ic / P[P_VIC] * (W_ic - W_th_up) + p_ic / T_ic * dT_ic

    # an inward manifold leak admits ambient-temperature air; outward or
    # healthy flow carries the throttle-side temperature
    T_leak_im = T_amb if f[F_WTH] > 0.0 else T_th
    dT_im = R_a * T_im / (p_im * P[P_VIM] * c_vi) * (
        cp_i * (W_th_up * T_th + f[F_WTH] * T_leak_im)
        - cp_i * W_ei * T_im - (W_th - W_ei) * c_vi * T_im
    )
    dp_im = R_a * T_im / P[P_VIM] * (W_th - W_ei) + p_im / T_im * dT_im

    dT_em = R_em * T_em / (p_em * P[P_VEM] * c_ve) * (
        cp_e * W_turbo * T_em - cp_e * (-W_eo) * T_t_in - (W_turbo + W_eo) * c_ve * T_em
    )
    dp_em = R_em * T_em / P[P_VEM] * (W_turbo + W_eo) + p_em / T_em * dT_em

    dT_t = R_em * T_t / (p_t * P[P_VEX] * c_ve) * (
        cp_e * W_exh * T_exh - cp_e * W_turbo * T_turbo - (W_exh - W_turbo) * c_ve * T_t
    )
    dp_t = R_em * T_t / P[P_VEX] * (W_exh - W_turbo) + p_t / T_t * dT_t

    dw_t = ((Tq_t - Tq_c) - P[P_OMF] * w_t) / P[P_JT]

    deriv[0] = dT_af
    deriv[1] = dp_af
    deriv[2] = dT_c
    deriv[3] = dp_c
    deriv[4] = dT_ic
    deriv[5] = dp_ic
    deriv[6] = dT_im
    deriv[7] = dp_im
    deriv[8] = dT_em
    deriv[9] = dp_em
    deriv[10] = dT_t
    deriv[11] = dp_t
    deriv[12] = dw_t

    alg[G_WAF] = W_af
    alg[G_WC] = W_c
    alg[G_WIC] = W_ic
    alg[G_WTH] = W_th
    alg[G_WEI] = W_ei
    alg[G_WF] = W_f
    alg[G_WEO] = W_eo
    alg[G_WWG] = W_wg
    alg[G_WT] = W_t
    alg[G_WTURBO] = W_turbo
    alg[G_WEXH] = W_exh
    alg[G_TAFIN] = T_af_in
    alg[G_TCIN] = T_c_in
    alg[G_TICIN] = T_ic_in
    alg[G_TTH] = T_th
    alg[G_TEO] = T_eo
    alg[G_TTIN] = T_t_in
    alg[G_TWG] = T_wg
    alg[G_TTOUT] = T_t_out
    alg[G_TTURBO] = T_turbo
    alg[G_TEXH] = T_exh
    alg[G_PIC_RATIO] = Pi_c
    alg[G_PITH] = Pi_th
    alg[G_PITHCRIT] = Pi_thCRIT
    alg[G_PIT] = Pi_t
    alg[G_PITCRIT] = Pi_tCRIT
    alg[G_PHIC] = Phi_c
    alg[G_PSIC] = Psi_c
    alg[G_PSITH] = Psi_th
    alg[G_PSIT] = Psi_t
    alg[G_ETAC] = eta_c
    alg[G_ETAT] = eta_t
    alg[G_BSR] = BSR
    alg[G_TQT] = Tq_t
    alg[G_TQC] = Tq_c
    alg[G_TQE] = Tq_e
    alg[G_OMEGAE] = w_e
    alg[G_SURGE] = surge


@njit(cache=True)
def clamp_state(s, P):
    """Post-step floors and turbo-speed bounds applied in place."""
    for i in range(0, 12, 2):
        if s[i] < P[P_TFLOOR]:
            s[i] = P[P_TFLOOR]
        if s[i + 1] < P[P_PFLOOR]:
            s[i + 1] = P[P_PFLOOR]
    if s[12] < P[P_WTMIN]:
        s[12] = P[P_WTMIN]
    elif s[12] > P[P_WTMAX]:
        s[12] = P[P_WTMAX]


@njit(cache=True)
def rk4_engine_step(s, u, f, P, dt, alg, work, alg_scratch):
    """One classical Runge-Kutta step on the engine states, in place.

    ``alg`` receives the algebraic outputs of the first stage (the values at
    the pre-step state); later stages write into ``alg_scratch``.  ``work``
    is a scratch array of shape (5, 13).  Returns 0 on success, 1 if any
    derivative went non-finite.
    """
    k1 = work[0]
    k2 = work[1]
    k3 = work[2]
    k4 = work[3]
    tmp = work[4]

    derivatives(s, u, f, P, k1, alg)
    for i in range(N_STATE):
        tmp[i] = s[i] + 0.5 * dt * k1[i]
    derivatives(tmp, u, f, P, k2, alg_scratch)
    for i in range(N_STATE):
        tmp[i] = s[i] + 0.5 * dt * k2[i]
    derivatives(tmp, u, f, P, k3, alg_scratch)
    for i in range(N_STATE):
        tmp[i] = s[i] + dt * k3[i]
    derivatives(tmp, u, f, P, k4, alg_scratch)

    ok = 0
    for i in range(N_STATE):
        step = dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not math.isfinite(step):
            ok = 1
        s[i] = s[i] + step
    clamp_state(s, P)
    return ok


@njit(cache=True)
def advance_pair(s_plant, s_obs, u, f, P, dt, alg_plant, alg_obs, work, alg_scratch, f_zero):
    """Advance plant (with faults) and fault-free observer twin by one step."""
    bad = rk4_engine_step(s_plant, u, f, P, dt, alg_plant, work, alg_scratch)
    bad += rk4_engine_step(s_obs, u, f_zero, P, dt, alg_obs, work, alg_scratch)
    return bad
