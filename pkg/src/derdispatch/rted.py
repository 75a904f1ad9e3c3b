"""Dispatch problems: DF-based RTED, the full member-level model, DERA
self-dispatch, and LMP extraction from the duals.

The DF model clears one aggregate variable per DERA and spreads its output
over member buses with the given distribution factors; the full model
clears every T-DER individually (the "complete information" benchmark).
Both share the generator fleet, the single system balance, ramp linking to
the previous interval, and shift-factor flow rows for whatever security
constraints the caller monitors.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

import numpy as np

from . import lpcore
from .caseio import CaseError, Dera, SystemCase
from .sensitivity import SensitivitySet

if TYPE_CHECKING:  # pragma: no cover
    from .icci import ConstraintRef

log = logging.getLogger(__name__)

DF_SUM_TOL = 1e-9
ZERO_INSTRUCTION = 1e-9


@dataclass
class DfVector:
    """Per-DERA distribution factors over members, in case member order."""

    values: dict[str, np.ndarray]

    def __post_init__(self):
        self.values = {a: np.asarray(v, dtype=float) for a, v in self.values.items()}
        for a, v in self.values.items():
            if v.size and ((v < -1e-12).any() or abs(v.sum() - 1.0) > DF_SUM_TOL):
                raise CaseError(
                    f"distribution factors for {a} violate the simplex: "
                    f"sum={v.sum():.12f}, min={v.min():.3e}"
                )

    def phi(self, dera_id: str) -> np.ndarray:
        return self.values[dera_id]

    def as_dict(self, case: SystemCase) -> dict[str, dict[str, float]]:
        out = {}
        for a in case.deras:
            out[a.id] = {e.id: float(p) for e, p in zip(a.tders, self.values[a.id])}
        return out

    def stacked(self, case: SystemCase) -> np.ndarray:
        """All factors concatenated in case DERA/member order."""
        return np.concatenate([self.values[a.id] for a in case.deras]) if case.deras \
            else np.zeros(0)

    @classmethod
    def uniform(cls, case: SystemCase) -> "DfVector":
        return cls({a.id: np.full(len(a.tders), 1.0 / len(a.tders)) for a in case.deras})

    @classmethod
    def capacity_shares(cls, case: SystemCase, t: int = 0) -> "DfVector":
        vals = {}
        for a in case.deras:
            caps = np.array([e.p_max_at(t) for e in a.tders])
            tot = caps.sum()
            vals[a.id] = caps / tot if tot > 0 else np.full(len(caps), 1.0 / len(caps))
        return cls(vals)

    @classmethod
    def from_outputs(cls, case: SystemCase, outputs: dict[str, float]) -> "DfVector":
        """Normalize realized member outputs; all-zero DERAs go uniform."""
        vals = {}
        for a in case.deras:
            q = np.array([max(float(outputs.get(e.id, 0.0)), 0.0) for e in a.tders])
            tot = q.sum()
            vals[a.id] = q / tot if tot > ZERO_INSTRUCTION else \
                np.full(len(q), 1.0 / len(q))
        return cls(vals)


@dataclass
class RtedSolution:
    status: str
    p_gen: dict[int, float]
    p_dera: dict[str, float]
    p_line: np.ndarray                  # pre-contingency flow on every line
    cost_total: float
    lmp: np.ndarray
    solve_ms: float
    active_set: list[str]
    duals: dict[str, float] = field(default_factory=dict)
    injections: np.ndarray | None = None
    p_tder: dict[str, float] = field(default_factory=dict)
    soft_overflow_mw: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class SelfDispatchResult:
    p_tder: dict[str, float]
    cost: float
    realized_df: DfVector


# ---------------------------------------------------------------------------
# unit injection layouts


def _injection_matrix(case: SystemCase, dfs: DfVector | None, full: bool):
    """Columns distribute 1 MW of each dispatch variable over buses.

    Generators and (in the full model) T-DERs are one-hot; a DF-model DERA
    column carries its factors at the member buses.
    """
    idx = case.bus_index
    names: list[str] = []
    cols: list[np.ndarray] = []
    for g in case.generators:
        col = np.zeros(case.n_buses)
        col[idx[g.bus_id]] = 1.0
        names.append(f"Pg_{g.id}")
        cols.append(col)
    if full:
        for a in case.deras:
            for e in a.tders:
                col = np.zeros(case.n_buses)
                col[idx[e.bus_id]] = 1.0
                names.append(f"Pe_{e.id}")
                cols.append(col)
    else:
        for a in case.deras:
            col = np.zeros(case.n_buses)
            phi = dfs.phi(a.id)
            for e, p in zip(a.tders, phi):
                col[idx[e.bus_id]] += p
            names.append(f"Pa_{a.id}")
            cols.append(col)
    mat = np.column_stack(cols) if cols else np.zeros((case.n_buses, 0))
    return names, mat


def composite_row(sens: SensitivitySet, ref: "ConstraintRef") -> np.ndarray:
    """Bus-space coefficient row of one monitored constraint.

    Pre-contingency rows are the line's shift factors; post-contingency
    rows add the outage correction through the LODF.
    """
    row = sens.isf[sens.line_row(ref.line_id)].copy()
    if ref.outage_id is not None:
        c = sens.vulnerable_col(ref.outage_id)
        row += sens.lodf[sens.line_row(ref.line_id), c] * sens.isf[sens.line_row(ref.outage_id)]
    return row


def _sorted_refs(monitored: Iterable["ConstraintRef"]):
    return sorted(monitored, key=lambda r: r.sort_key())


def _build_dispatch(case: SystemCase, sens: SensitivitySet, dfs: DfVector | None,
                    loads_t: np.ndarray, prev_gen: dict[int, float] | None,
                    monitored: Iterable["ConstraintRef"], *, full: bool,
                    t: int = 0, soft_penalty: float | None = None) -> lpcore.LpModel:
    loads_t = np.asarray(loads_t, dtype=float)
    model = lpcore.LpModel()
    unit_names, inj = _injection_matrix(case, dfs, full)

    for g in case.generators:
        model.add_variable(f"Pg_{g.id}", lower=g.p_min_at(t), upper=g.p_max_at(t))
        lpcore.epigraph_cost(model, g.bid_at(t), f"Pg_{g.id}", f"Cg_{g.id}")
        if prev_gen is not None:
            prev = prev_gen[g.id]
            model.add_constraint(f"ramp_up_{g.id}", {f"Pg_{g.id}": 1.0}, "<=",
                                 prev + g.ramp_up)
            model.add_constraint(f"ramp_dn_{g.id}", {f"Pg_{g.id}": 1.0}, ">=",
                                 prev - g.ramp_down)
    if full:
        for a in case.deras:
            for e in a.tders:
                model.add_variable(f"Pe_{e.id}", lower=e.p_min_at(t), upper=e.p_max_at(t))
                lpcore.epigraph_cost(model, a.member_curve(e, t), f"Pe_{e.id}", f"Ce_{e.id}")
    else:
        for a in case.deras:
            model.add_variable(f"Pa_{a.id}", lower=a.p_min_at(t), upper=a.p_max_at(t))
            lpcore.epigraph_cost(model, a.bid_at(t), f"Pa_{a.id}", f"Ca_{a.id}")

    model.add_constraint("balance", {u: 1.0 for u in unit_names}, "==", float(loads_t.sum()))

    for ref in _sorted_refs(monitored):
        line = case.line_by_id(ref.line_id)
        gamma = composite_row(sens, ref)
        coeffs = {}
        for u, c in zip(unit_names, gamma @ inj):
            if abs(c) > 1e-12:
                coeffs[u] = float(c)
        shift = float(gamma @ loads_t)
        name = ref.row_name()
        if soft_penalty is not None:
            sv = model.add_variable(f"viol_{name}", lower=0.0, objective=soft_penalty)
            coeffs = dict(coeffs)
            coeffs[sv] = -1.0 if ref.bound == "upper" else 1.0
        if ref.bound == "upper":
            model.add_constraint(name, coeffs, "<=", line.flow_max + shift)
        else:
            model.add_constraint(name, coeffs, ">=", line.flow_min + shift)
    return model


def build_rted(case: SystemCase, sens: SensitivitySet, dfs: DfVector,
               loads_t: np.ndarray, prev_gen: dict[int, float] | None,
               monitored: Iterable["ConstraintRef"], *, t: int = 0,
               soft_penalty: float | None = None) -> lpcore.LpModel:
    """DF-based clearing LP for one market interval."""
    return _build_dispatch(case, sens, dfs, loads_t, prev_gen, monitored,
                           full=False, t=t, soft_penalty=soft_penalty)


def build_full_model(case: SystemCase, sens: SensitivitySet,
                     loads_t: np.ndarray, prev_gen: dict[int, float] | None,
                     monitored: Iterable["ConstraintRef"], *, t: int = 0,
                     soft_penalty: float | None = None) -> lpcore.LpModel:
    """Member-level benchmark LP: one variable per T-DER, member cost curves."""
    return _build_dispatch(case, sens, None, loads_t, prev_gen, monitored,
                           full=True, t=t, soft_penalty=soft_penalty)


def solve_dispatch(model: lpcore.LpModel, case: SystemCase, sens: SensitivitySet,
                   dfs: DfVector | None, loads_t: np.ndarray,
                   monitored: Iterable["ConstraintRef"], *, full: bool = False,
                   t: int = 0) -> RtedSolution:
    """Solve a dispatch LP and assemble flows, LMPs, and the active set."""
    t0 = time.perf_counter()
    sol = lpcore.solve(model)
    ms = (time.perf_counter() - t0) * 1e3
    if not sol.optimal:
        return RtedSolution(sol.status, {}, {}, np.zeros(len(case.lines)),
                            math.nan, np.zeros(case.n_buses), ms, [])

    p_gen = {g.id: sol.primal[f"Pg_{g.id}"] for g in case.generators}
    p_tder: dict[str, float] = {}
    if full:
        for a in case.deras:
            for e in a.tders:
                p_tder[e.id] = sol.primal[f"Pe_{e.id}"]
        p_dera = {a.id: sum(p_tder[e.id] for e in a.tders) for a in case.deras}
    else:
        p_dera = {a.id: sol.primal[f"Pa_{a.id}"] for a in case.deras}

    _, inj_mat = _injection_matrix(case, dfs, full)
    unit_out = np.array(
        [p_gen[g.id] for g in case.generators]
        + ([p_tder[e.id] for a in case.deras for e in a.tders] if full
           else [p_dera[a.id] for a in case.deras])
    )
    injections = inj_mat @ unit_out - np.asarray(loads_t, dtype=float)
    flows = sens.isf @ injections

    refs = _sorted_refs(monitored)
    lmp = extract_lmp(sol, sens, refs)
    active = _active_rows(model, sol)
    soft = sum(v for k, v in sol.primal.items() if k.startswith("viol_"))
    res = lpcore.verify_certificates(model, sol, tol=1e-7)
    if res["complementarity"] > 1e-7:
        log.warning("degenerate duals: complementary slackness residual %.2e",
                    res["complementarity"])
    return RtedSolution("optimal", p_gen, p_dera, flows, sol.objective, lmp, ms,
                        active, duals=sol.duals, injections=injections,
                        p_tder=p_tder, soft_overflow_mw=float(soft))


def _active_rows(model: lpcore.LpModel, sol: lpcore.LpSolution) -> list[str]:
    active = []
    for con in model.constraints:
        lhs = sum(k * sol.primal[v] for v, k in con.coeffs.items())
        scale = max(1.0, abs(con.rhs))
        if con.sense == "==" or abs(lhs - con.rhs) <= 1e-6 * scale:
            if con.sense != "==" or abs(sol.duals[con.name]) > 1e-9:
                active.append(con.name)
    return active


def extract_lmp(solution: lpcore.LpSolution, sens: SensitivitySet,
                monitored: Iterable["ConstraintRef"]) -> np.ndarray:
    """Nodal prices from the balance dual and monitored-flow duals.

    With duals as objective-per-rhs sensitivities, serving one extra MW at
    bus i moves the balance rhs by 1 and every monitored row's rhs by its
    composite shift factor, so LMP_i = lambda + sum_r w_r * gamma_r[i].
    """
    lam = solution.duals.get("balance", 0.0)
    lmp = np.full(len(sens.bus_ids), lam)
    for ref in monitored:
        w = solution.duals.get(ref.row_name(), 0.0)
        if w != 0.0:
            lmp += w * composite_row(sens, ref)
    return lmp


def relaxed_solver(case: SystemCase, sens: SensitivitySet, dfs: DfVector | None,
                   loads_t: np.ndarray, prev_gen: dict[int, float] | None,
                   *, full: bool = False, t: int = 0,
                   soft_penalty: float | None = None):
    """Factory for the ICCI loop: working set -> (RtedSolution, injections)."""

    def solve_relaxed(working):
        if full:
            model = build_full_model(case, sens, loads_t, prev_gen, working,
                                     t=t, soft_penalty=soft_penalty)
        else:
            model = build_rted(case, sens, dfs, loads_t, prev_gen, working,
                               t=t, soft_penalty=soft_penalty)
        sol = solve_dispatch(model, case, sens, dfs, loads_t, working, full=full, t=t)
        return sol, sol.injections if sol.optimal else np.zeros(case.n_buses)

    return solve_relaxed


def self_dispatch(dera: Dera, instruction: float, t: int = 0) -> SelfDispatchResult:
    """Split an aggregate instruction over members at minimum bid cost."""
    lo, hi = dera.p_min_at(t), dera.p_max_at(t)
    if not (lo - 1e-9 <= instruction <= hi + 1e-9):
        raise CaseError(
            f"infeasible instruction {instruction:.6f} MW for {dera.id} "
            f"(limits [{lo:.6f}, {hi:.6f}])"
        )
    model = lpcore.LpModel()
    for e in dera.tders:
        model.add_variable(f"Pe_{e.id}", lower=e.p_min_at(t), upper=e.p_max_at(t))
        lpcore.epigraph_cost(model, dera.member_curve(e, t), f"Pe_{e.id}", f"Ce_{e.id}")
    model.add_constraint("aggregate", {f"Pe_{e.id}": 1.0 for e in dera.tders},
                         "==", float(instruction))
    sol = lpcore.solve(model)
    if not sol.optimal:
        raise CaseError(f"self-dispatch failed for {dera.id}: {sol.status}")
    raw = {e.id: sol.primal[f"Pe_{e.id}"] for e in dera.tders}
    # remove the solver's epsilon so the aggregate identity is exact
    out = _project_to_instruction(dera, raw, instruction, t)
    if abs(instruction) > ZERO_INSTRUCTION:
        phi = np.array([out[e.id] for e in dera.tders]) / instruction
        phi = np.maximum(phi, 0.0)
        phi /= phi.sum()
    else:
        phi = np.full(len(dera.tders), 1.0 / len(dera.tders))
    cost = sum(dera.member_curve(e, t).cost(out[e.id]) for e in dera.tders)
    return SelfDispatchResult(out, float(cost), DfVector({dera.id: phi}))


def _project_to_instruction(dera, raw, instruction, t):
    gap = instruction - sum(raw.values())
    if gap == 0.0:
        return raw
    out = dict(raw)
    for e in dera.tders:
        lo, hi = e.p_min_at(t), e.p_max_at(t)
        room = (hi - out[e.id]) if gap > 0 else (lo - out[e.id])
        step = min(gap, room) if gap > 0 else max(gap, room)
        out[e.id] += step
        gap -= step
        if gap == 0.0:
            break
    return out
