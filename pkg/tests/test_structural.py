"""Structural model construction, matching, decomposition and isolability."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcsibench.structural import (
    StructuralModel,
    StructuralModelError,
    _overdetermined_part,
    build_dc_motor_example,
    build_engine_structural_model,
    dm_decompose,
    maximum_matching,
    structural_isolability,
)


def brute_force_matching_size(adjacency):
    """Exhaustive maximum matching size for small models."""
    eqs = [e for e in adjacency if adjacency[e]]

    def best(remaining_eqs, used_vars):
        if not remaining_eqs:
            return 0
        eq, rest = remaining_eqs[0], remaining_eqs[1:]
        top = best(rest, used_vars)  # leave eq unmatched
        for var in adjacency[eq]:
            if var not in used_vars:
                top = max(top, 1 + best(rest, used_vars | {var}))
        return top

    return best(eqs, frozenset())


class TestMaximumMatching:
    def test_empty_model(self):
        assert maximum_matching({}) == {}

    def test_diagonal_model_perfect(self):
        adj = {f"e{k}": {f"x{k}"} for k in range(5)}
        assert len(maximum_matching(adj)) == 5

    def test_dc_motor_size(self):
        dc = build_dc_motor_example()
        adj = {e: dc.unknowns.get(e, set()) for e in dc.equations}
        match = maximum_matching(adj)
        assert len(match) == 7
        # matched variables must be distinct
        assert len(set(match.values())) == 7

    @given(st.integers(0, 2**30 - 1))
    @settings(max_examples=25, deadline=None)
    def test_matches_brute_force_on_random_models(self, seed):
        rng = np.random.default_rng(seed)
        n_eq, n_var = int(rng.integers(1, 7)), int(rng.integers(1, 6))
        adj = {
            f"e{i}": {f"x{j}" for j in range(n_var) if rng.random() < 0.4}
            for i in range(n_eq)
        }
        got = len(maximum_matching(adj))
        assert got == brute_force_matching_size(adj)


class TestDmDecompose:
    def test_dc_motor_overdetermined_part(self):
        dmp = dm_decompose(build_dc_motor_example())
        assert dmp.over_equations == {"e1", "e3", "e7", "e8", "e9"}
        assert dmp.over_variables == {"i", "omega", "dT"}
        assert dmp.under_equations == set()

    def test_square_model_all_exact(self):
        model = StructuralModel(
            name="sq",
            equations=["e1", "e2"],
            unknowns={"e1": {"x"}, "e2": {"x", "y"}},
            faults={},
            fault_order=(),
        )
        dmp = dm_decompose(model)
        assert dmp.over_equations == set()
        assert dmp.exact_equations == {"e1", "e2"}

    def test_removing_sensor_shrinks_redundancy(self):
        dc = build_dc_motor_example()
        full = dm_decompose(dc).over_equations
        reduced_model = StructuralModel(
            name="dc-minus",
            equations=[e for e in dc.equations if e != "e8"],
            unknowns={e: v for e, v in dc.unknowns.items() if e != "e8"},
            faults={f: e for f, e in dc.faults.items() if e != "e8"},
        )
        reduced = dm_decompose(reduced_model).over_equations
        assert len(reduced) < len(full)

    @given(st.integers(0, 2**30 - 1))
    @settings(max_examples=25, deadline=None)
    def test_overdetermined_part_matching_independent(self, seed):
        # the reachable closure must not depend on which maximum matching the
        # solver found; compare against a brute-force union over all
        # maximum matchings
        rng = np.random.default_rng(seed)
        n_eq, n_var = int(rng.integers(2, 7)), int(rng.integers(1, 5))
        adj = {
            f"e{i}": {f"x{j}" for j in range(n_var) if rng.random() < 0.45}
            for i in range(n_eq)
        }
        plus = _overdetermined_part(adj)

        # brute force: enumerate all maximum matchings, compute closure per
        # matching, verify every closure is identical
        eqs = list(adj)
        size = brute_force_matching_size(adj)
        closures = set()

        def closure_for(match_eq):
            var_owner = {v: e for e, v in match_eq.items()}
            free = [e for e in adj if e not in match_eq]
            seen = set(free)
            stack = list(free)
            while stack:
                e = stack.pop()
                for v in adj[e]:
                    owner = var_owner.get(v)
                    if owner is not None and owner not in seen:
                        seen.add(owner)
                        stack.append(owner)
            return frozenset(seen)

        def enumerate_matchings(idx, match_eq, used):
            if len(match_eq) + (len(eqs) - idx) < size:
                return  # cannot reach maximum any more
            if idx == len(eqs):
                if len(match_eq) == size:
                    closures.add(closure_for(dict(match_eq)))
                return
            eq = eqs[idx]
            enumerate_matchings(idx + 1, match_eq, used)
            for var in adj[eq]:
                if var not in used:
                    match_eq[eq] = var
                    enumerate_matchings(idx + 1, match_eq, used | {var})
                    del match_eq[eq]

        enumerate_matchings(0, {}, frozenset())
        assert len(closures) == 1
        assert plus == set(next(iter(closures)))


class TestDcMotorModel:
    def test_shape(self):
        dc = build_dc_motor_example()
        assert len(dc.equations) == 9
        assert len(dc.variables) == 7
        assert len(dc.faults) == 4

    def test_incidence_rows(self):
        dc = build_dc_motor_example()
        assert dc.unknowns["e1"] == {"i", "omega"}
        assert dc.knowns["e1"] == {"V"}
        assert dc.unknowns["e5"] == {"theta", "omega"}

    def test_fim_matches_published_pair(self):
        res = structural_isolability(build_dc_motor_example())
        expected = np.array([
            [1, 1, 0, 0],
            [1, 1, 0, 0],
            [0, 0, 1, 0],
            [0, 0, 0, 1],
        ], dtype=bool)
        assert np.array_equal(res.fim.values, expected)
        assert all(res.detectable.values())


class TestEngineModel:
    def test_counts(self):
        eng = build_engine_structural_model()
        assert len(eng.equations) == 62
        assert len(set(eng.faults.values())) == 10  # 11 faults in 10 equations
        assert len(eng.faults) == 11

    def test_shared_fault_equation(self):
        eng = build_engine_structural_model()
        assert eng.faults["f_paf"] == eng.faults["f_Waf"] == "e15"

    def test_fuel_equation_incidence(self):
        eng = build_engine_structural_model()
        assert eng.unknowns["e30"] == {"W_f", "W_ei"}  # lambda is a known input

    def test_sensor_equations_single_unknown(self):
        eng = build_engine_structural_model()
        for eq in [f"e{k}" for k in range(54, 63)]:
            assert len(eng.unknowns[eq]) == 1, eq

    def test_two_nonisolable_pairs(self):
        eng = build_engine_structural_model()
        res = structural_isolability(eng)
        order = res.fim.faults
        expected = np.eye(len(order), dtype=bool)
        for a, b in (("f_paf", "f_Waf"), ("f_Wth", "f_xth")):
            i, j = order.index(a), order.index(b)
            expected[i, j] = expected[j, i] = True
        assert np.array_equal(res.fim.values, expected)
        assert all(res.detectable.values())


class TestIsolability:
    def test_disjoint_redundant_subsystems_identity(self):
        # two sensors each measuring an independent known quantity
        model = StructuralModel(
            name="disjoint",
            equations=["e1", "e2", "e3", "e4"],
            unknowns={"e1": {"x"}, "e2": {"x"}, "e3": {"y"}, "e4": {"y"}},
            faults={"f_a": "e1", "f_b": "e3"},
            fault_order=("f_a", "f_b"),
        )
        res = structural_isolability(model)
        assert np.array_equal(res.fim.values, np.eye(2, dtype=bool))

    def test_fault_in_unknown_equation_rejected(self):
        with pytest.raises(StructuralModelError):
            StructuralModel(name="bad", equations=["e1"], unknowns={"e1": {"x"}},
                            faults={"f": "e99"})

    def test_detectability_requires_redundancy(self):
        # a single equation with a private variable has no redundancy
        model = StructuralModel(
            name="thin",
            equations=["e1", "e2", "e3"],
            unknowns={"e1": {"x"}, "e2": {"x"}, "e3": {"z"}},
            faults={"f_x": "e1", "f_z": "e3"},
            fault_order=("f_x", "f_z"),
        )
        res = structural_isolability(model)
        assert res.detectable["f_x"] is True
        assert res.detectable["f_z"] is False
        i = res.fim.faults.index("f_z")
        assert res.fim.values[i].all()  # not isolable from anything

    def test_diagonal_always_ones(self):
        res = structural_isolability(build_engine_structural_model())
        assert np.all(np.diag(res.fim.values))

    def test_removing_equation_never_grows_redundant_part(self):
        eng = build_engine_structural_model()
        adj = {e: set(eng.unknowns.get(e, set())) for e in eng.equations}
        full = _overdetermined_part(adj)
        for eq in ("e15", "e25", "e50", "e60", "e29"):
            reduced = {e: v for e, v in adj.items() if e != eq}
            assert len(_overdetermined_part(reduced)) <= len(full)

    def test_serialization(self, tmp_path):
        eng = build_engine_structural_model()
        path = tmp_path / "model.txt"
        eng.serialize(path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 62
        e15 = next(l for l in lines if l.startswith("e15 "))
        assert "f_Waf" in e15 and "f_paf" in e15
