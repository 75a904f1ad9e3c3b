"""Iterative crucial constraint identification.

Security constraints are left out of the dispatch LP until the relaxed
solution actually violates them: each round solves the relaxed model,
evaluates every candidate pre- and post-contingency flow through the
shift factors and LODFs, ranks the violations, and admits the worst k
candidates (both bound directions) before re-solving.  The day-ahead pass
runs the same loop on an hourly multi-period dispatch and its survivors
seed every real-time interval.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from . import lpcore
from .caseio import CaseError, LoadProfile, SystemCase
from .sensitivity import SensitivitySet

log = logging.getLogger(__name__)

VIOLATION_TOL_MW = 1e-6
DEFAULT_K = 5
DEFAULT_MAX_ITER = 50


class IcciError(RuntimeError):
    """Loop-level failure: iteration cap or infeasible relaxation."""


@dataclass(frozen=True, order=False)
class ConstraintRef:
    """One monitored bound: a line limit, pre- or post-contingency."""

    kind: str               # "pre_contingency" | "post_contingency"
    line_id: int
    outage_id: int | None = None
    bound: str = "upper"    # "upper" | "lower"

    def __post_init__(self):
        if self.kind not in ("pre_contingency", "post_contingency"):
            raise CaseError(f"bad constraint kind {self.kind}")
        if self.bound not in ("upper", "lower"):
            raise CaseError(f"bad bound {self.bound}")
        if self.kind == "post_contingency":
            if self.outage_id is None or self.outage_id == self.line_id:
                raise CaseError("post-contingency needs a distinct outage line")
        elif self.outage_id is not None:
            raise CaseError("pre-contingency refs carry no outage")

    def sort_key(self):
        return (self.line_id, self.kind != "pre_contingency",
                -1 if self.outage_id is None else self.outage_id, self.bound)

    def row_name(self) -> str:
        side = "up" if self.bound == "upper" else "lo"
        if self.kind == "pre_contingency":
            return f"pre_{self.line_id}_{side}"
        return f"post_{self.line_id}_o{self.outage_id}_{side}"


@dataclass
class CrucialSet:
    """Day-ahead baseline plus the per-interval refinements."""

    day_ahead: frozenset[ConstraintRef] = frozenset()
    realtime: frozenset[ConstraintRef] = frozenset()

    @property
    def working(self) -> frozenset[ConstraintRef]:
        return self.day_ahead | self.realtime

    def entries(self) -> set[tuple]:
        """Line / (line, outage) pairs, ignoring the bound direction."""
        return {(r.line_id, r.outage_id) for r in self.working}


@dataclass
class IcciResult:
    solution: object
    crucial: CrucialSet
    iterations: int
    added: list[ConstraintRef] = field(default_factory=list)
    worst_history: list[float] = field(default_factory=list)
    violated_history: list[int] = field(default_factory=list)


def enumerate_candidates(case: SystemCase, sens: SensitivitySet):
    """All candidate entries: every line pre-contingency, and every
    surviving line under each vulnerable-line outage."""
    out = [(l.id, None) for l in case.lines]
    for m in sens.vulnerable_lines:
        out.extend((l.id, m) for l in case.lines if l.id != m)
    return out


def violation_metrics(flows: np.ndarray, fmin: np.ndarray, fmax: np.ndarray) -> np.ndarray:
    """zeta = max(P_min - P, 0, P - P_max), elementwise."""
    flows = np.asarray(flows, dtype=float)
    return np.maximum.reduce([fmin - flows, np.zeros_like(flows), flows - fmax])


def _candidate_violations(case: SystemCase, sens: SensitivitySet,
                          injections: np.ndarray):
    """zeta for every candidate: pre vector [L] and post matrix [L, V]."""
    fmax = np.array([l.flow_max for l in case.lines])
    fmin = np.array([l.flow_min for l in case.lines])
    pre = sens.isf @ injections
    zeta_pre = violation_metrics(pre, fmin, fmax)
    if sens.vulnerable_lines:
        cols = [sens.line_row(m) for m in sens.vulnerable_lines]
        post = pre[:, None] + sens.lodf * pre[cols][None, :]
        zeta_post = violation_metrics(post, fmin[:, None], fmax[:, None])
        for c, m in enumerate(sens.vulnerable_lines):
            zeta_post[sens.line_row(m), c] = 0.0  # the outaged line itself
    else:
        zeta_post = np.zeros((len(case.lines), 0))
    return zeta_pre, zeta_post


def _select_worst(case, sens, zeta_pre, zeta_post, k, tol):
    """Worst-k candidate entries: zeta desc, then line id, pre before post."""
    entries = []
    for r, z in enumerate(zeta_pre):
        if z > tol:
            entries.append((-z, case.lines[r].id, 0, -1))
    for c, m in enumerate(sens.vulnerable_lines):
        for r, z in enumerate(zeta_post[:, c]):
            if z > tol:
                entries.append((-z, case.lines[r].id, 1, m))
    entries.sort()
    picked = []
    for negz, line_id, is_post, outage in entries[:k]:
        kind = "post_contingency" if is_post else "pre_contingency"
        out = outage if is_post else None
        for bound in ("upper", "lower"):
            picked.append(ConstraintRef(kind, line_id, out, bound))
    worst = -entries[0][0] if entries else 0.0
    return picked, worst, len(entries)


def icci_loop(solve_relaxed: Callable[[frozenset], tuple],
              case: SystemCase, sens: SensitivitySet,
              initial: Iterable[ConstraintRef] = (),
              k: int = DEFAULT_K, tol: float = VIOLATION_TOL_MW,
              max_iter: int = DEFAULT_MAX_ITER) -> IcciResult:
    """Run the lazy loop until no candidate constraint is violated.

    `solve_relaxed(working_set)` must return `(solution, injections)` where
    injections is the nodal net-injection vector (or a matrix with one
    column per period) realized by the relaxed optimum.  Returns the final
    solution, the accumulated crucial set, and the iteration count.
    """
    if k < 1:
        raise CaseError("k must be at least 1")
    crucial = CrucialSet(day_ahead=frozenset(initial))
    added_all: list[ConstraintRef] = []
    worst_hist: list[float] = []
    violated_hist: list[int] = []
    for it in range(1, max_iter + 1):
        solution, injections = solve_relaxed(crucial.working)
        if getattr(solution, "status", "optimal") != "optimal":
            raise IcciError(f"relaxed model {solution.status} at iteration {it}")
        inj = np.atleast_2d(np.asarray(injections, dtype=float).T).T  # [buses, periods]
        zeta_pre = np.zeros(len(case.lines))
        zeta_post = np.zeros((len(case.lines), len(sens.vulnerable_lines)))
        for p in range(inj.shape[1]):
            zp, zq = _candidate_violations(case, sens, inj[:, p])
            zeta_pre = np.maximum(zeta_pre, zp)
            zeta_post = np.maximum(zeta_post, zq)
        picked, worst, n_violated = _select_worst(case, sens, zeta_pre, zeta_post, k, tol)
        worst_hist.append(worst)
        violated_hist.append(n_violated)
        if not picked:
            return IcciResult(solution, crucial, it, added_all, worst_hist,
                              violated_hist)
        new = frozenset(picked) - crucial.working
        if not new:
            # every violated candidate is already monitored: in a soft
            # (penalized) model the residual violations are priced, so the
            # admitted set is complete and the loop is done
            if getattr(solution, "soft_overflow_mw", 0.0) <= tol:
                log.warning("icci: monitored rows violated by %.3e MW beyond "
                            "the dispatch tolerance", worst)
            return IcciResult(solution, crucial, it, added_all, worst_hist,
                              violated_hist)
        log.debug("icci iter %d: %d violated, admitting %d refs (worst %.4f MW)",
                  it, n_violated, len(new), worst)
        crucial = replace(crucial, realtime=crucial.realtime | new)
        added_all.extend(sorted(new, key=lambda r: r.sort_key()))
    raise IcciError(
        f"iteration cap {max_iter} exceeded; worst remaining violation "
        f"{worst_hist[-1]:.6f} MW"
    )


# ---------------------------------------------------------------------------
# day-ahead baseline


def build_multiperiod(case: SystemCase, sens: SensitivitySet, demands: np.ndarray,
                      monitored: Iterable[ConstraintRef], bid_steps: list[int],
                      ramp_scale: float = 1.0) -> lpcore.LpModel:
    """Hourly economic dispatch over `demands` [periods, buses].

    All units committed; DERAs included at uniform factors; ramps link
    consecutive periods scaled by `ramp_scale` (intervals per period).
    """
    from .rted import DfVector, _injection_matrix  # local: avoids module cycle

    model = lpcore.LpModel()
    dfs = DfVector.uniform(case)
    unit_names, inj = _injection_matrix(case, dfs, full=False)
    periods = demands.shape[0]
    for h in range(periods):
        tb = bid_steps[h]
        for g in case.generators:
            model.add_variable(f"Pg_{g.id}@{h}", lower=g.p_min_at(tb), upper=g.p_max_at(tb))
            lpcore.epigraph_cost(model, g.bid_at(tb), f"Pg_{g.id}@{h}", f"Cg_{g.id}@{h}")
            if h > 0:
                model.add_constraint(
                    f"ramp_up_{g.id}@{h}",
                    {f"Pg_{g.id}@{h}": 1.0, f"Pg_{g.id}@{h-1}": -1.0},
                    "<=", g.ramp_up * ramp_scale)
                model.add_constraint(
                    f"ramp_dn_{g.id}@{h}",
                    {f"Pg_{g.id}@{h}": 1.0, f"Pg_{g.id}@{h-1}": -1.0},
                    ">=", -g.ramp_down * ramp_scale)
        for a in case.deras:
            model.add_variable(f"Pa_{a.id}@{h}", lower=a.p_min_at(tb), upper=a.p_max_at(tb))
            lpcore.epigraph_cost(model, a.bid_at(tb), f"Pa_{a.id}@{h}", f"Ca_{a.id}@{h}")
        model.add_constraint(
            f"balance@{h}", {f"{u}@{h}": 1.0 for u in unit_names},
            "==", float(demands[h].sum()))
        from .rted import composite_row
        for ref in sorted(monitored, key=lambda r: r.sort_key()):
            line = case.line_by_id(ref.line_id)
            gamma = composite_row(sens, ref)
            coeffs = {f"{u}@{h}": float(c) for u, c in zip(unit_names, gamma @ inj)
                      if abs(c) > 1e-12}
            shift = float(gamma @ demands[h])
            if ref.bound == "upper":
                model.add_constraint(f"{ref.row_name()}@{h}", coeffs, "<=",
                                     line.flow_max + shift)
            else:
                model.add_constraint(f"{ref.row_name()}@{h}", coeffs, ">=",
                                     line.flow_min + shift)
    return model


def day_ahead_baseline(case: SystemCase, sens: SensitivitySet, profile: LoadProfile,
                       horizon: int | None = None, k: int = DEFAULT_K,
                       tol: float = VIOLATION_TOL_MW,
                       max_iter: int = DEFAULT_MAX_ITER) -> frozenset[ConstraintRef]:
    """Crucial constraints of an hourly dispatch over the profile.

    The 5-minute profile is averaged per hour (the day-ahead stand-in for
    the out-of-scope commitment problem); the union of every constraint
    admitted across ICCI iterations is the real-time baseline set.
    """
    from .rted import DfVector, _injection_matrix

    horizon = profile.horizon if horizon is None else min(horizon, profile.horizon)
    stride = max(1, int(round(60.0 / profile.interval_minutes)))
    n_hours = max(1, horizon // stride)
    demands = np.stack([
        profile.demand[h * stride:(h + 1) * stride].mean(axis=0) for h in range(n_hours)
    ])
    bid_steps = [h * stride for h in range(n_hours)]
    dfs = DfVector.uniform(case)
    unit_names, inj = _injection_matrix(case, dfs, full=False)

    def solve_relaxed(working):
        model = build_multiperiod(case, sens, demands, working, bid_steps,
                                  ramp_scale=float(stride))
        sol = lpcore.solve(model)
        if not sol.optimal:
            return sol, np.zeros((case.n_buses, n_hours))
        outputs = np.array([
            [sol.primal[f"{u}@{h}"] for h in range(n_hours)] for u in unit_names
        ])
        injections = inj @ outputs - demands.T
        return sol, injections

    result = icci_loop(solve_relaxed, case, sens, initial=(), k=k, tol=tol,
                       max_iter=max_iter)
    return result.crucial.working


# ---------------------------------------------------------------------------
# persistence


def save_crucial_set(refs: Iterable[ConstraintRef], path) -> None:
    rows = [
        {"kind": r.kind, "line_id": r.line_id, "outage_id": r.outage_id,
         "bound": r.bound}
        for r in sorted(refs, key=lambda r: r.sort_key())
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"version": 1, "constraints": rows}, fh, indent=1)
        fh.write("\n")


def load_crucial_set(path) -> frozenset[ConstraintRef]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("version") != 1:
        raise CaseError(f"unknown crucial-set file version {data.get('version')}")
    return frozenset(
        ConstraintRef(r["kind"], r["line_id"], r.get("outage_id"), r["bound"])
        for r in data["constraints"]
    )
