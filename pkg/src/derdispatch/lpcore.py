"""Linear programs with primal solutions and dual multipliers.

The model is a plain container (named variables with bounds, a linear
minimization objective, and <=/==/>= rows); `solve` hands it to HiGHS via
scipy.  Duals follow the objective-sensitivity convention throughout:
``duals[row] = d(optimal objective) / d(rhs of row)``, so equality rows
carry the usual shadow price, <= rows have non-positive duals and >= rows
non-negative ones.  Reduced costs are the matching bound sensitivities.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

log = logging.getLogger(__name__)

SENSES = ("<=", "==", ">=")


class LpError(ValueError):
    """Model construction or solver failure (not infeasibility)."""


@dataclass
class Constraint:
    name: str
    coeffs: dict[str, float]
    sense: str
    rhs: float


@dataclass
class LpModel:
    """Minimization LP over named bounded variables."""

    variables: list[str] = field(default_factory=list)
    lower: dict[str, float] = field(default_factory=dict)
    upper: dict[str, float] = field(default_factory=dict)
    objective: dict[str, float] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)

    def add_variable(self, name: str, lower: float = 0.0,
                     upper: float = math.inf, objective: float = 0.0) -> str:
        if name in self.lower:
            raise LpError(f"duplicate variable {name}")
        if lower > upper:
            raise LpError(f"variable {name}: lower {lower} above upper {upper}")
        self.variables.append(name)
        self.lower[name] = lower
        self.upper[name] = upper
        if objective:
            self.objective[name] = objective
        return name

    def add_constraint(self, name: str, coeffs: dict[str, float],
                       sense: str, rhs: float) -> str:
        if sense not in SENSES:
            raise LpError(f"bad sense {sense!r}")
        if not math.isfinite(rhs):
            raise LpError(f"constraint {name}: rhs must be finite")
        for v in coeffs:
            if v not in self.lower:
                raise LpError(f"constraint {name} references unknown variable {v}")
        self.constraints.append(Constraint(name, dict(coeffs), sense, rhs))
        return name

    def set_objective(self, name: str, coeff: float):
        if name not in self.lower:
            raise LpError(f"unknown variable {name}")
        self.objective[name] = coeff


@dataclass
class LpSolution:
    status: str                       # optimal | infeasible | unbounded
    primal: dict[str, float]
    duals: dict[str, float]           # d obj / d rhs per constraint
    reduced_costs: dict[str, float]   # d obj / d (active bound) per variable
    objective: float

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _arrays(model: LpModel):
    names = model.variables
    pos = {v: j for j, v in enumerate(names)}
    n = len(names)
    c = np.zeros(n)
    for v, k in model.objective.items():
        c[pos[v]] = k
    bounds = [(model.lower[v] if math.isfinite(model.lower[v]) else None,
               model.upper[v] if math.isfinite(model.upper[v]) else None)
              for v in names]
    ub_rows, ub_flip, ub_rhs = [], [], []
    eq_rows, eq_rhs = [], []
    for ci, con in enumerate(model.constraints):
        if con.sense == "==":
            eq_rows.append(ci)
            eq_rhs.append(con.rhs)
        elif con.sense == "<=":
            ub_rows.append(ci)
            ub_flip.append(1.0)
            ub_rhs.append(con.rhs)
        else:
            ub_rows.append(ci)
            ub_flip.append(-1.0)
            ub_rhs.append(-con.rhs)

    def build(rows, signs=None):
        data, ri, cj = [], [], []
        for r, ci in enumerate(rows):
            s = 1.0 if signs is None else signs[r]
            for v, k in model.constraints[ci].coeffs.items():
                data.append(s * k)
                ri.append(r)
                cj.append(pos[v])
        return sparse.csr_matrix((data, (ri, cj)), shape=(len(rows), n))

    a_ub = build(ub_rows, ub_flip) if ub_rows else None
    a_eq = build(eq_rows) if eq_rows else None
    return c, bounds, a_ub, np.array(ub_rhs), ub_rows, ub_flip, a_eq, np.array(eq_rhs), eq_rows


def solve(model: LpModel) -> LpSolution:
    """Minimize the model; optimal solutions carry duals and reduced costs.

    Infeasible and unbounded models are reported in the status, never
    raised; any other solver condition raises with diagnostics.
    """
    if not model.variables:
        return LpSolution("optimal", {}, {c.name: 0.0 for c in model.constraints}, {}, 0.0)
    c, bounds, a_ub, b_ub, ub_rows, ub_flip, a_eq, b_eq, eq_rows = _arrays(model)
    res = linprog(
        c,
        A_ub=a_ub, b_ub=b_ub if a_ub is not None else None,
        A_eq=a_eq, b_eq=b_eq if a_eq is not None else None,
        bounds=bounds, method="highs",
    )
    if res.status == 2:
        return LpSolution("infeasible", {}, {}, {}, math.nan)
    if res.status == 3:
        return LpSolution("unbounded", {}, {}, {}, math.nan)
    if res.status != 0:
        raise LpError(f"solver failure (status {res.status}): {res.message}")

    primal = {v: float(x) for v, x in zip(model.variables, res.x)}
    duals = {con.name: 0.0 for con in model.constraints}
    if a_ub is not None:
        for r, ci in enumerate(ub_rows):
            # flipped >= rows solved as -a x <= -b: d obj/d b = -marginal
            duals[model.constraints[ci].name] = float(ub_flip[r] * res.ineqlin.marginals[r])
    if a_eq is not None:
        for r, ci in enumerate(eq_rows):
            duals[model.constraints[ci].name] = float(res.eqlin.marginals[r])
    rc = {
        v: float(lo + up)
        for v, lo, up in zip(model.variables, res.lower.marginals, res.upper.marginals)
    }
    return LpSolution("optimal", primal, duals, rc, float(res.fun))


def epigraph_cost(model: LpModel, curve, p_var: str, name: str) -> str:
    """Add a cost variable bounded below by every bid segment of `curve`.

    The variable enters the objective with coefficient 1; at a cost
    minimum it sits exactly on the max-affine surface.
    """
    kappas = [s.kappa for s in curve.segments]
    if any(b <= a for a, b in zip(kappas, kappas[1:])):
        raise LpError(f"non-convex curve for {name}")
    cv = model.add_variable(name, lower=-math.inf, upper=math.inf, objective=1.0)
    for si, s in enumerate(curve.segments):
        model.add_constraint(f"{name}_s{si}", {cv: 1.0, p_var: -s.kappa}, ">=", s.beta)
    return cv


def verify_certificates(model: LpModel, sol: LpSolution, tol: float = 1e-7) -> dict[str, float]:
    """KKT residuals of an optimal solution, scaled by problem magnitudes.

    Returns the worst primal, dual (stationarity + sign), and complementary
    slackness residuals; raises if the solution is not optimal.
    """
    if not sol.optimal:
        raise LpError("certificates require an optimal solution")
    x = np.array([sol.primal[v] for v in model.variables])
    pos = {v: j for j, v in enumerate(model.variables)}
    scale = max(1.0, float(np.abs(x).max()) if x.size else 1.0)

    primal = 0.0
    comp = 0.0
    stat = np.array([model.objective.get(v, 0.0) for v in model.variables])
    for con in model.constraints:
        ax = sum(k * x[pos[v]] for v, k in con.coeffs.items())
        slack = ax - con.rhs
        row_scale = max(1.0, abs(con.rhs), max((abs(k) for k in con.coeffs.values()), default=1.0) * scale)
        if con.sense == "<=":
            primal = max(primal, slack / row_scale)
            if sol.duals[con.name] > tol:
                raise LpError(f"dual sign violated on <= row {con.name}")
        elif con.sense == ">=":
            primal = max(primal, -slack / row_scale)
            if sol.duals[con.name] < -tol:
                raise LpError(f"dual sign violated on >= row {con.name}")
        else:
            primal = max(primal, abs(slack) / row_scale)
        comp = max(comp, abs(sol.duals[con.name] * slack) / row_scale)
        for v, k in con.coeffs.items():
            stat[pos[v]] -= sol.duals[con.name] * k
    for j, v in enumerate(model.variables):
        stat[j] -= sol.reduced_costs[v]
        lo, up = model.lower[v], model.upper[v]
        primal = max(primal, (lo - x[j]) / scale, (x[j] - up) / scale)
        rc = sol.reduced_costs[v]
        gap = x[j] - (lo if rc > 0 else up if rc < 0 else x[j])
        if math.isfinite(gap):
            comp = max(comp, abs(rc * gap) / scale)
    dual = float(np.abs(stat).max()) if stat.size else 0.0
    obj_scale = max(1.0, abs(sol.objective))
    return {
        "primal": float(max(primal, 0.0)),
        "dual": dual / obj_scale,
        "complementarity": comp / obj_scale,
    }


def dual_objective(model: LpModel, sol: LpSolution) -> float:
    """Dual objective value implied by the reported multipliers."""
    val = sum(sol.duals[c.name] * c.rhs for c in model.constraints)
    for v in model.variables:
        rc = sol.reduced_costs[v]
        if rc > 0 and math.isfinite(model.lower[v]):
            val += rc * model.lower[v]
        elif rc < 0 and math.isfinite(model.upper[v]):
            val += rc * model.upper[v]
    return val


def dump_lp(model: LpModel) -> str:
    """Human-readable LP text with stable ordering (diff-friendly)."""
    out = ["minimize"]
    terms = [f"{model.objective[v]:+.12g} {v}" for v in model.variables if v in model.objective]
    out.append("  " + (" ".join(terms) if terms else "0"))
    out.append("subject to")
    for con in model.constraints:
        lhs = " ".join(f"{k:+.12g} {v}" for v, k in sorted(con.coeffs.items()))
        out.append(f"  {con.name}: {lhs} {con.sense} {con.rhs:.12g}")
    out.append("bounds")
    for v in model.variables:
        out.append(f"  {model.lower[v]:.12g} <= {v} <= {model.upper[v]:.12g}")
    return "\n".join(out) + "\n"
