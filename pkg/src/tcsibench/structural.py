"""Structural diagnosability analysis.

A structural model records, per equation, which unknown variables, known
signals and faults appear in it, ignoring the analytic form.  Maximum
matching between equations and unknowns yields the canonical decomposition;
the structurally overdetermined (redundant) part is what makes faults
detectable, and removing one fault's equation before recomputing it gives
the classic isolability test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .residuals import FIMMatrix


class StructuralModelError(ValueError):
    """Inconsistent incidence data (e.g. a fault with no home equation)."""


@dataclass
class StructuralModel:
    name: str
    equations: list[str]
    unknowns: dict[str, set[str]]          # equation -> unknown variables
    knowns: dict[str, set[str]] = field(default_factory=dict)
    faults: dict[str, str] = field(default_factory=dict)  # fault -> equation
    fault_order: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        eqset = set(self.equations)
        if len(eqset) != len(self.equations):
            raise StructuralModelError("duplicate equation labels")
        for eq in self.unknowns:
            if eq not in eqset:
                raise StructuralModelError(f"incidence for unknown equation {eq!r}")
        for fault, eq in self.faults.items():
            if eq not in eqset:
                raise StructuralModelError(f"fault {fault!r} placed in unknown equation {eq!r}")
        if not self.fault_order:
            self.fault_order = tuple(sorted(self.faults))
        for fault in self.fault_order:
            if fault not in self.faults:
                raise StructuralModelError(f"fault order names unknown fault {fault!r}")

    @property
    def variables(self) -> list[str]:
        out: set[str] = set()
        for eq in self.equations:
            out |= self.unknowns.get(eq, set())
        return sorted(out)

    def serialize(self, path: str | Path) -> None:
        """One line per equation: label | unknowns | knowns | faults."""
        lines = []
        inv_faults: dict[str, list[str]] = {}
        for fault, eq in self.faults.items():
            inv_faults.setdefault(eq, []).append(fault)
        for eq in self.equations:
            unk = " ".join(sorted(self.unknowns.get(eq, set())))
            kno = " ".join(sorted(self.knowns.get(eq, set())))
            fts = " ".join(sorted(inv_faults.get(eq, [])))
            lines.append(f"{eq} | {unk} | {kno} | {fts}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def maximum_matching(adjacency: dict[str, set[str]]) -> dict[str, str]:
    """Maximum-cardinality bipartite matching (equation -> variable).

    Deterministic Kuhn augmenting-path search over the lexicographically
    sorted node lists; fine for the model sizes used here.
    """
    eqs = sorted(adjacency)
    match_var: dict[str, str] = {}   # variable -> equation
    match_eq: dict[str, str] = {}    # equation -> variable

    def try_augment(eq: str, seen: set[str]) -> bool:
        for var in sorted(adjacency[eq]):
            if var in seen:
                continue
            seen.add(var)
            owner = match_var.get(var)
            if owner is None or try_augment(owner, seen):
                match_var[var] = eq
                match_eq[eq] = var
                return True
        return False

    for eq in eqs:
        if adjacency[eq]:
            try_augment(eq, set())
    return match_eq


def _overdetermined_part(adjacency: dict[str, set[str]]) -> set[str]:
    """Equations in the structurally overdetermined part (M+).

    Alternating-path closure from the unmatched equations of any maximum
    matching: free equation -> its variables -> the equations matched to
    those variables, and so on.  The result is matching-independent.
    """
    matching = maximum_matching(adjacency)
    var_owner = {var: eq for eq, var in matching.items()}
    free = [eq for eq in adjacency if eq not in matching]
    reached = set(free)
    frontier = list(free)
    while frontier:
        eq = frontier.pop()
        for var in adjacency[eq]:
            owner = var_owner.get(var)
            if owner is not None and owner not in reached:
                reached.add(owner)
                frontier.append(owner)
    return reached


@dataclass
class DMDecomposition:
    """Canonical partition of equations/unknowns with the matching used."""

    over_equations: set[str]
    over_variables: set[str]
    exact_equations: set[str]
    exact_variables: set[str]
    under_equations: set[str]
    under_variables: set[str]
    matching: dict[str, str]


def dm_decompose(model: StructuralModel) -> DMDecomposition:
    adjacency = {eq: set(model.unknowns.get(eq, set())) for eq in model.equations}
    matching = maximum_matching(adjacency)

    over_eqs = _overdetermined_part(adjacency)
    over_vars: set[str] = set()
    for eq in over_eqs:
        over_vars |= adjacency[eq]

    # under-determined side: alternating closure from unmatched variables
    all_vars: set[str] = set()
    for vs in adjacency.values():
        all_vars |= vs
    matched_vars = set(matching.values())
    eq_of_var: dict[str, set[str]] = {v: set() for v in all_vars}
    for eq, vs in adjacency.items():
        for v in vs:
            eq_of_var[v].add(eq)
    free_vars = [v for v in all_vars if v not in matched_vars]
    under_vars = set(free_vars)
    frontier = list(free_vars)
    eq_matched_var = dict(matching)
    under_eqs: set[str] = set()
    while frontier:
        var = frontier.pop()
        for eq in eq_of_var[var]:
            if eq in under_eqs:
                continue
            under_eqs.add(eq)
            nxt = eq_matched_var.get(eq)
            if nxt is not None and nxt not in under_vars:
                under_vars.add(nxt)
                frontier.append(nxt)

    exact_eqs = set(model.equations) - over_eqs - under_eqs
    exact_vars = all_vars - over_vars - under_vars
    return DMDecomposition(
        over_equations=over_eqs, over_variables=over_vars,
        exact_equations=exact_eqs, exact_variables=exact_vars,
        under_equations=under_eqs, under_variables=under_vars,
        matching=matching,
    )


@dataclass
class IsolabilityResult:
    fim: FIMMatrix
    detectable: dict[str, bool]


def structural_isolability(model: StructuralModel) -> IsolabilityResult:
    """Structural fault detectability and isolability.

    A fault is detectable when its equation lies in the overdetermined part
    of the full model.  Fault i is isolable from fault j when i's equation
    stays in the overdetermined part after removing j's equation; otherwise
    entry (i, j) of the isolation matrix is set.
    """
    if not model.faults:
        raise StructuralModelError("model declares no faults")
    adjacency = {eq: set(model.unknowns.get(eq, set())) for eq in model.equations}
    full_plus = _overdetermined_part(adjacency)
    order = model.fault_order
    n = len(order)
    detectable = {f: model.faults[f] in full_plus for f in order}

    vals = np.zeros((n, n), dtype=bool)
    for j, fj in enumerate(order):
        reduced = {eq: vs for eq, vs in adjacency.items() if eq != model.faults[fj]}
        plus = _overdetermined_part(reduced)
        for i, fi in enumerate(order):
            if i == j:
                vals[i, j] = True
            elif not detectable[fi]:
                vals[i, j] = True  # undetectable: not isolable from anything
            else:
                vals[i, j] = model.faults[fi] not in plus
    return IsolabilityResult(fim=FIMMatrix(values=vals, faults=order), detectable=detectable)


def build_dc_motor_example() -> StructuralModel:
    """Small dc-motor demonstrator: 9 equations, 7 unknowns, 4 faults."""
    unknowns = {
        "e1": {"i", "omega"},
        "e2": {"i", "T_m"},
        "e3": {"omega", "dT"},
        "e4": {"T_m", "T_L", "dT"},
        "e5": {"theta", "omega"},
        "e6": {"omega", "alpha"},
        "e7": {"i"},
        "e8": {"omega"},
        "e9": {"dT"},
    }
    knowns = {
        "e1": {"V"},
        "e7": {"y_i"},
        "e8": {"y_omega"},
        "e9": {"y_dT"},
    }
    faults = {"f_R": "e1", "f_i": "e7", "f_omega": "e8", "f_dT": "e9"}
    return StructuralModel(
        name="dcmotor",
        equations=[f"e{k}" for k in range(1, 10)],
        unknowns=unknowns,
        knowns=knowns,
        faults=faults,
        fault_order=("f_R", "f_i", "f_dT", "f_omega"),
    )


def build_engine_structural_model() -> StructuralModel:
    """Incidence structure of the 62-equation engine model.

    States and their derivatives share one variable node (integral
    causality).  Ambient/actuator channels other than the throttle area are
    treated as known inputs; the throttle area stays unknown so its position
    error can live in the actuator measurement equation.  Selector equations
    contribute incidence to both candidate variables.
    """
    U: dict[str, set[str]] = {
        # paired energy/pressure balances of the six volumes + turbo inertia
        "e1": {"T_af", "p_af", "W_af", "T_af_in", "W_c"},
        "e2": {"p_af", "T_af", "W_af", "W_c"},
        "e3": {"T_c", "p_c", "W_c", "W_ic", "T_af", "Pi_c", "eta_c"},
        "e4": {"p_c", "T_c", "W_c", "W_ic"},
        "e5": {"T_ic", "p_ic", "W_ic", "T_ic_in", "W_th"},
        "e6": {"p_ic", "T_ic", "W_ic", "W_th"},
        "e7": {"T_im", "p_im", "W_th", "T_th", "W_ei"},
        "e8": {"p_im", "T_im", "W_th", "W_ei"},
        "e9": {"T_em", "p_em", "W_turbo", "W_eo", "T_t_in"},
        "e10": {"p_em", "T_em", "W_turbo", "W_eo"},
        "e11": {"T_t", "p_t", "W_exh", "T_exh", "W_turbo", "T_turbo"},
        "e12": {"p_t", "T_t", "W_exh", "W_turbo"},
        "e13": {"omega_t", "Tq_t", "Tq_c"},
        # air filter and compressor
        "e14": {"T_af_in", "T_af"},
        "e15": {"W_af", "p_af", "T_af_in"},
        "e16": {"Pi_c", "p_c", "p_af"},
        "e17": {"W_c", "Psi_c", "omega_t", "p_af", "T_af"},
        "e18": {"Psi_c", "T_af", "omega_t", "Pi_c"},
        "e19": {"Phi_c", "W_c", "T_af", "omega_t", "p_af"},
        "e20": {"eta_c", "Phi_c"},
        "e21": {"Tq_c", "W_c", "T_af", "eta_c", "omega_t", "Pi_c"},
        # intercooler and throttle
        "e22": {"T_ic_in", "T_c", "T_ic"},
        "e23": {"W_ic", "p_ic", "p_c", "T_ic_in"},
        "e24": {"T_th", "T_ic", "T_im"},
        "e25": {"W_th", "p_ic", "A_th", "T_ic", "Psi_th"},
        "e26": {"Pi_th", "p_im", "p_ic"},
        "e27": {"Pi_thCRIT"},
        "e28": {"Psi_th", "Pi_th", "Pi_thCRIT"},
        # engine block and exhaust pipe
        "e29": {"W_ei", "p_em", "p_im", "T_im"},
        "e30": {"W_f", "W_ei"},
        "e31": {"W_eo", "W_ei", "W_f"},
        "e32": {"T_eo", "W_eo"},
        "e33": {"T_t_in", "T_eo", "W_eo"},
        # turbine / wastegate
        "e34": {"T_wg", "T_em", "T_t"},
        "e35": {"W_wg", "p_em", "T_em", "Psi_t"},
        "e36": {"Pi_t", "p_t", "p_em"},
        "e37": {"Pi_tCRIT"},
        "e38": {"Psi_t", "Pi_t", "Pi_tCRIT"},
        "e39": {"BSR", "omega_t", "T_em", "Pi_t"},
        "e40": {"eta_t", "BSR"},
        "e41": {"T_t_out", "T_em", "Pi_t", "eta_t"},
        "e42": {"W_t", "p_em", "T_em", "Pi_t"},
        "e43": {"Tq_t", "W_t", "T_t_out", "omega_t"},
        "e44": {"W_turbo", "W_t", "W_wg"},
        "e45": {"T_turbo", "W_t", "T_t_out", "W_wg", "T_wg"},
        "e46": {"T_exh", "T_t"},
        "e47": {"W_exh", "p_t", "T_exh"},
        # actuator channels
        "e48": set(),
        "e49": set(),
        "e50": {"A_th"},
        "e51": set(),
        "e52": set(),
        "e53": set(),
        # sensors (torque map folded into e62: the torque sensor reads p_im)
        "e54": {"T_c"},
        "e55": {"p_c"},
        "e56": {"T_ic"},
        "e57": {"p_ic"},
        "e58": {"T_im"},
        "e59": {"p_im"},
        "e60": {"W_af"},
        "e61": {"p_em"},
        "e62": {"p_im"},
    }
    knowns = {
        "e14": {"u_Tamb", "u_pamb"},
        "e15": {"u_pamb"},
        "e25": set(),
        "e29": {"u_omega_eREF"},
        "e30": {"u_lambda"},
        "e33": {"u_Tamb"},
        "e35": {"u_xwg"},
        "e46": {"u_Tamb", "u_pamb"},
        "e47": {"u_pamb"},
        "e48": {"u_pamb"},
        "e49": {"u_Tamb"},
        "e50": {"u_xth"},
        "e51": {"u_omega_eREF"},
        "e52": {"u_xwg"},
        "e53": {"u_lambda"},
        "e54": {"y_Tc"},
        "e55": {"y_pc"},
        "e56": {"y_Tic"},
        "e57": {"y_pic"},
        "e58": {"y_Tim"},
        "e59": {"y_pim"},
        "e60": {"y_Waf"},
        "e61": {"y_pem"},
        "e62": {"y_Tqe"},
    }
    faults = {
        "f_paf": "e15",
        "f_Waf": "e15",
        "f_Wc": "e17",
        "f_Wic": "e23",
        "f_Wth": "e25",
        "f_Cvol": "e29",
        "f_xth": "e50",
        "f_yTic": "e56",
        "f_ypic": "e57",
        "f_ypim": "e59",
        "f_yWaf": "e60",
    }
    order = ("f_paf", "f_Cvol", "f_Waf", "f_Wc", "f_Wic", "f_Wth",
             "f_xth", "f_ypic", "f_ypim", "f_yTic", "f_yWaf")
    return StructuralModel(
        name="engine",
        equations=[f"e{k}" for k in range(1, 63)],
        unknowns=U,
        knowns=knowns,
        faults=faults,
        fault_order=order,
    )
