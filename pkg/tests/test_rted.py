"""DF-based dispatch, the full model, self-dispatch, and LMP extraction."""

import numpy as np
import pytest

from derdispatch import gridgen
from derdispatch.caseio import (
    BidCurve, Bus, CaseError, Dera, Generator, Line, Load, SystemCase, TDer,
    build_deras, generate_bids,
)
from derdispatch.icci import ConstraintRef
from derdispatch.lpcore import solve
from derdispatch.rted import (
    DfVector,
    build_full_model,
    build_rted,
    extract_lmp,
    self_dispatch,
    solve_dispatch,
)
from derdispatch.sensitivity import compute_isf

from oracles import solve_lp_reference


def solve_model(case, sens, dfs, loads, monitored=(), prev=None, full=False, t=0):
    if full:
        model = build_full_model(case, sens, loads, prev, monitored, t=t)
    else:
        model = build_rted(case, sens, dfs, loads, prev, monitored, t=t)
    return solve_dispatch(model, case, sens, dfs, loads, monitored, full=full, t=t)


def two_gen_case(kappas=(10.0, 20.0), caps=(10.0, 10.0), load=15.0):
    buses = [Bus(1, is_reference=True), Bus(2), Bus(3)]
    lines = [Line(0, 1, 2, 0.1, 0.0, 1e3), Line(1, 2, 3, 0.1, 0.0, 1e3),
             Line(2, 1, 3, 0.1, 0.0, 1e3)]
    gens = [
        Generator(0, 1, 0.0, caps[0], caps[0], caps[0],
                  BidCurve.single(kappas[0], 0.0, caps[0])),
        Generator(1, 2, 0.0, caps[1], caps[1], caps[1],
                  BidCurve.single(kappas[1], 0.0, caps[1])),
    ]
    return SystemCase(buses, lines, gens, [Load(3, load)])


class TestDfVector:
    def test_simplex_enforced(self):
        with pytest.raises(CaseError, match="simplex"):
            DfVector({"A0": np.array([0.6, 0.6])})
        with pytest.raises(CaseError, match="simplex"):
            DfVector({"A0": np.array([1.2, -0.2])})

    def test_uniform(self, sys118):
        case = build_deras(sys118, 0.5, 10, seed=1)
        dfs = DfVector.uniform(case)
        for a in case.deras:
            assert dfs.phi(a.id).sum() == pytest.approx(1.0, abs=1e-12)

    def test_from_outputs_zero_goes_uniform(self, sys118):
        case = build_deras(sys118, 0.5, 10, seed=1)
        dfs = DfVector.from_outputs(case, {})
        a = case.deras[0]
        assert dfs.phi(a.id) == pytest.approx(np.full(len(a.tders), 1 / len(a.tders)))


class TestBuildRted:
    def test_merit_order_by_hand(self):
        case = two_gen_case()
        sens = compute_isf(case)
        sol = solve_model(case, sens, DfVector({}), case.base_load_vector())
        assert sol.optimal
        assert sol.p_gen[0] == pytest.approx(10.0, abs=1e-8)
        assert sol.p_gen[1] == pytest.approx(5.0, abs=1e-8)
        assert sol.cost_total == pytest.approx(200.0, abs=1e-7)

    def test_dera_flow_coefficients_carry_phi(self):
        case = two_gen_case()
        tders = [TDer("D2", 2, 0.0, 5.0), TDer("D3", 3, 0.0, 5.0)]
        dera = Dera("A0", tders, bid_curve=BidCurve.single(5.0, 0.0, 10.0))
        case = SystemCase(case.buses, case.lines, case.generators, case.loads, [dera])
        sens = compute_isf(case)
        dfs = DfVector({"A0": np.array([0.5, 0.5])})
        ref = ConstraintRef("pre_contingency", 0, None, "upper")
        model = build_rted(case, sens, dfs, case.base_load_vector(), None, [ref])
        row = next(c for c in model.constraints if c.name == ref.row_name())
        idx = case.bus_index
        expect = 0.5 * sens.isf[0, idx[2]] + 0.5 * sens.isf[0, idx[3]]
        assert row.coeffs["Pa_A0"] == pytest.approx(expect, abs=1e-12)

    def test_infeasible_ramp_window_reported(self):
        case = two_gen_case()
        for g in case.generators:
            g.ramp_up = g.ramp_down = 1.0
        sens = compute_isf(case)
        # previous dispatch far below what the load requires within one step
        sol = solve_model(case, sens, DfVector({}), case.base_load_vector(),
                          prev={0: 0.0, 1: 0.0})
        assert sol.status == "infeasible"

    def test_matches_tableau_oracle(self):
        case = two_gen_case(kappas=(12.0, 31.0), caps=(8.0, 12.0), load=14.0)
        sens = compute_isf(case)
        model = build_rted(case, sens, DfVector({}), case.base_load_vector(), None, ())
        sol = solve(model)
        status, _, obj = solve_lp_reference(model)
        assert status == "optimal"
        assert sol.objective == pytest.approx(obj, abs=1e-7)


class TestFullVsDf:
    def _with_dera(self, member_caps, seed=3):
        case = gridgen.synthetic_case(6, n_lines=8, n_gens=3, seed=seed,
                                      load_share=0.9, total_load=120.0)
        case = gridgen.assign_ratings(case, headroom=1.25, floor=8.0)
        load_buses = [d.bus_id for d in case.loads]
        tders = [
            TDer(f"D{b}", b, 0.0, float(c))
            for b, c in zip(load_buses, member_caps)
        ]
        dera = Dera("A0", tders)
        case = SystemCase(case.buses, case.lines, case.generators, case.loads,
                          [dera], name=case.name)
        return generate_bids(case, 30.0, seed=seed)

    def test_singleton_identical(self):
        case = gridgen.synthetic_case(5, n_lines=7, n_gens=2, seed=9,
                                      load_share=0.8, total_load=80.0)
        case = build_deras(case, fraction=0.6, group_size=1, seed=0)
        case = generate_bids(case, 25.0, seed=4)
        sens = compute_isf(case)
        loads = case.base_load_vector()
        monitored = [ConstraintRef("pre_contingency", l.id, None, b)
                     for l in case.lines for b in ("upper", "lower")]
        dfs = DfVector.uniform(case)  # singleton: phi = 1
        df_sol = solve_model(case, sens, dfs, loads, monitored)
        full_sol = solve_model(case, sens, None, loads, monitored, full=True)
        assert df_sol.optimal and full_sol.optimal
        assert df_sol.cost_total == pytest.approx(full_sol.cost_total, abs=1e-8)

    @pytest.mark.parametrize("seed", [1, 2, 3, 4, 5, 6])
    def test_full_never_worse_at_capacity_shares(self, seed):
        # provable family: member curves scaled by capacity share and the
        # DF fixed to those shares; arbitrary DFs admit counterexamples
        rng = np.random.default_rng(seed)
        caps = rng.uniform(2.0, 12.0, size=5)
        case = self._with_dera(caps, seed=seed)
        sens = compute_isf(case)
        loads = case.base_load_vector() * 1.1
        monitored = [ConstraintRef("pre_contingency", l.id, None, b)
                     for l in case.lines for b in ("upper", "lower")]
        dfs = DfVector.capacity_shares(case)
        df_sol = solve_model(case, sens, dfs, loads, monitored)
        full_sol = solve_model(case, sens, None, loads, monitored, full=True)
        if df_sol.optimal:
            assert full_sol.optimal
            assert full_sol.cost_total <= df_sol.cost_total + 1e-6

    def test_zero_deras_plain_ed(self):
        case = two_gen_case()
        sens = compute_isf(case)
        full_sol = solve_model(case, sens, None, case.base_load_vector(), full=True)
        df_sol = solve_model(case, sens, DfVector({}), case.base_load_vector())
        assert full_sol.cost_total == pytest.approx(df_sol.cost_total, abs=1e-9)


class TestSelfDispatch:
    def _dera(self, kappas=(10.0, 20.0), caps=(5.0, 5.0)):
        tders = [
            TDer(f"D{i}", i + 1, 0.0, c, cost_curve=BidCurve.single(k, 0.0, c))
            for i, (k, c) in enumerate(zip(kappas, caps))
        ]
        return Dera("A0", tders)

    def test_merit_order(self):
        res = self_dispatch(self._dera(), 7.0)
        assert res.p_tder["D0"] == pytest.approx(5.0, abs=1e-9)
        assert res.p_tder["D1"] == pytest.approx(2.0, abs=1e-9)
        assert res.cost == pytest.approx(90.0, abs=1e-7)
        assert res.realized_df.phi("A0") == pytest.approx([5 / 7, 2 / 7], abs=1e-9)

    def test_zero_instruction_uniform(self):
        res = self_dispatch(self._dera(), 0.0)
        assert all(v == 0.0 for v in res.p_tder.values())
        assert res.realized_df.phi("A0") == pytest.approx([0.5, 0.5])

    def test_full_capacity(self):
        res = self_dispatch(self._dera(), 10.0)
        assert res.p_tder["D0"] == pytest.approx(5.0, abs=1e-9)
        assert res.p_tder["D1"] == pytest.approx(5.0, abs=1e-9)

    def test_infeasible_instruction(self):
        with pytest.raises(CaseError, match="infeasible instruction"):
            self_dispatch(self._dera(), 11.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_aggregate_identity_and_simplex(self, seed):
        rng = np.random.default_rng(seed)
        kappas = np.sort(rng.uniform(5.0, 50.0, size=4))
        caps = rng.uniform(1.0, 8.0, size=4)
        dera = self._dera(tuple(kappas), tuple(caps))
        instr = float(rng.uniform(0.0, caps.sum()))
        res = self_dispatch(dera, instr)
        assert sum(res.p_tder.values()) == pytest.approx(instr, abs=1e-9)
        phi = res.realized_df.phi("A0")
        assert phi.sum() == pytest.approx(1.0, abs=1e-9)
        assert (phi >= 0).all()
        # brute-force check against the tableau oracle
        from derdispatch import lpcore
        model = lpcore.LpModel()
        for e in dera.tders:
            model.add_variable(f"Pe_{e.id}", lower=0.0, upper=e.p_max)
            lpcore.epigraph_cost(model, e.cost_curve, f"Pe_{e.id}", f"Ce_{e.id}")
        model.add_constraint("agg", {f"Pe_{e.id}": 1.0 for e in dera.tders}, "==", instr)
        status, _, obj = solve_lp_reference(model)
        assert status == "optimal"
        assert res.cost == pytest.approx(obj, abs=1e-6)


class TestLmp:
    def test_uncongested_uniform(self):
        case = two_gen_case()
        sens = compute_isf(case)
        sol = solve_model(case, sens, DfVector({}), case.base_load_vector())
        assert np.ptp(sol.lmp) < 1e-9
        assert sol.lmp[0] == pytest.approx(20.0, abs=1e-7)  # marginal unit
        kappas = [10.0, 20.0]
        assert min(kappas) <= sol.lmp[0] <= max(kappas)

    def test_congested_matches_finite_difference(self):
        case = two_gen_case(kappas=(10.0, 30.0), caps=(20.0, 20.0), load=9.0)
        case.lines[2].flow_max = 4.0  # direct line 1->3 binds
        case.lines[2].flow_min = -4.0
        sens = compute_isf(case)
        monitored = [ConstraintRef("pre_contingency", l.id, None, b)
                     for l in case.lines for b in ("upper", "lower")]
        loads = case.base_load_vector()
        sol = solve_model(case, sens, DfVector({}), loads, monitored)
        assert sol.optimal
        assert np.ptp(sol.lmp) > 1e-3  # congestion spreads prices
        idx = case.bus_index
        for bus in (1, 2, 3):
            eps = np.zeros(case.n_buses)
            eps[idx[bus]] = 1.0
            up = solve_model(case, sens, DfVector({}), loads + eps, monitored)
            dn = solve_model(case, sens, DfVector({}), loads - eps, monitored)
            fd = (up.cost_total - dn.cost_total) / 2.0
            assert sol.lmp[idx[bus]] == pytest.approx(fd, abs=1e-3)

    def test_small_perturbation_5pct(self):
        case = two_gen_case(kappas=(10.0, 30.0), caps=(20.0, 20.0), load=9.0)
        case.lines[2].flow_max = 4.0
        case.lines[2].flow_min = -4.0
        sens = compute_isf(case)
        monitored = [ConstraintRef("pre_contingency", l.id, None, b)
                     for l in case.lines for b in ("upper", "lower")]
        loads = case.base_load_vector()
        sol = solve_model(case, sens, DfVector({}), loads, monitored)
        idx = case.bus_index
        eps = 1e-3
        for bus in (2, 3):
            dv = np.zeros(case.n_buses)
            dv[idx[bus]] = eps
            up = solve_model(case, sens, DfVector({}), loads + dv, monitored)
            fd = (up.cost_total - sol.cost_total) / eps
            assert fd == pytest.approx(sol.lmp[idx[bus]], rel=0.05, abs=1e-6)

    def test_extract_requires_rows(self):
        case = two_gen_case()
        sens = compute_isf(case)
        model = build_rted(case, sens, DfVector({}), case.base_load_vector(), None, ())
        sol = solve(model)
        lmp = extract_lmp(sol, sens, ())
        assert lmp == pytest.approx(np.full(3, sol.duals["balance"]))
