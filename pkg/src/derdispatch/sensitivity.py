"""DC network sensitivities: injection shift factors, LODFs, line flows.

The injection shift factor matrix maps balanced nodal injections to line
flows under the DC approximation (unit line susceptance 1/x).  Line outage
distribution factors express post-contingency flows as linear corrections
of the pre-contingency state.  Everything here is dense; at the few
thousand buses this artifact targets a dense factorization is fast and the
linear-solve seam below keeps a sparse backend possible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import networkx as nx
import numpy as np

from .caseio import CaseError, SystemCase

log = logging.getLogger(__name__)

BALANCE_TOL_MW = 1e-6
_LODF_DEN_TOL = 1e-8


@dataclass(frozen=True)
class SensitivitySet:
    """Immutable ISF/LODF bundle for one case and reference bus.

    isf has one row per line and one column per bus (case order); the
    reference-bus column is identically zero.  lodf has one column per
    vulnerable line, aligned with `vulnerable_lines`.
    """

    isf: np.ndarray                      # [lines, buses]
    lodf: np.ndarray                     # [lines, len(vulnerable_lines)]
    reference_bus: int
    vulnerable_lines: tuple[int, ...]
    line_ids: tuple[int, ...]
    bus_ids: tuple[int, ...]

    def line_row(self, line_id: int) -> int:
        return self.line_ids.index(line_id)

    def vulnerable_col(self, line_id: int) -> int:
        return self.vulnerable_lines.index(line_id)


def _susceptance_matrices(case: SystemCase):
    n = case.n_buses
    idx = case.bus_index
    nl = len(case.lines)
    b_bus = np.zeros((n, n))
    b_line = np.zeros((nl, n))
    for r, l in enumerate(case.lines):
        i, j = idx[l.from_bus], idx[l.to_bus]
        y = 1.0 / l.reactance_pu
        b_bus[i, i] += y
        b_bus[j, j] += y
        b_bus[i, j] -= y
        b_bus[j, i] -= y
        b_line[r, i] = y
        b_line[r, j] = -y
    return b_bus, b_line


def _solve_reduced(b_red: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Linear-solve seam: replace with a sparse factorization if needed."""
    return np.linalg.solve(b_red, rhs)


def compute_isf(case: SystemCase, reference_bus: int | None = None,
                vulnerable_lines=()) -> SensitivitySet:
    """Injection shift factors with the given (default: declared) slack bus."""
    ref = case.reference_bus if reference_bus is None else reference_bus
    idx = case.bus_index
    if ref not in idx:
        raise CaseError(f"reference bus {ref} not in case")
    b_bus, b_line = _susceptance_matrices(case)
    keep = [i for i in range(case.n_buses) if i != idx[ref]]
    b_red = b_bus[np.ix_(keep, keep)]
    try:
        # isf_red = B_line_red @ inv(B_red); solve on the transpose instead
        isf_red = _solve_reduced(b_red.T, b_line[:, keep].T).T
    except np.linalg.LinAlgError as exc:
        raise CaseError(f"network not solvable: {exc}") from None
    isf = np.zeros((len(case.lines), case.n_buses))
    isf[:, keep] = isf_red
    bound = 1.0 + 1e-6
    if np.abs(isf).max() > bound:
        raise CaseError(
            f"ISF magnitude {np.abs(isf).max():.6f} exceeds 1; inconsistent network data"
        )
    sens = SensitivitySet(
        isf=isf,
        lodf=np.zeros((len(case.lines), 0)),
        reference_bus=ref,
        vulnerable_lines=tuple(vulnerable_lines),
        line_ids=tuple(l.id for l in case.lines),
        bus_ids=tuple(b.id for b in case.buses),
    )
    if vulnerable_lines:
        sens = compute_lodf(sens, case)
    return sens


def compute_lodf(sens: SensitivitySet, case: SystemCase) -> SensitivitySet:
    """Fill the LODF columns for `sens.vulnerable_lines`.

    LODF[l, m] = (isf[l, i_m] - isf[l, j_m]) / (1 - (isf[m, i_m] - isf[m, j_m]))
    for outaged line m = (i_m, j_m); the outaged line's own factor is -1.
    Bridge outages (denominator ~ 0) are rejected.
    """
    idx = case.bus_index
    rows = {lid: r for r, lid in enumerate(sens.line_ids)}
    lodf = np.zeros((len(sens.line_ids), len(sens.vulnerable_lines)))
    for c, m_id in enumerate(sens.vulnerable_lines):
        m = case.line_by_id(m_id)
        mi, mj = idx[m.from_bus], idx[m.to_bus]
        mr = rows[m_id]
        den = 1.0 - (sens.isf[mr, mi] - sens.isf[mr, mj])
        if abs(den) < _LODF_DEN_TOL:
            raise CaseError(f"radial line, outage islanding: line {m_id}")
        lodf[:, c] = (sens.isf[:, mi] - sens.isf[:, mj]) / den
        lodf[mr, c] = -1.0
    return replace(sens, lodf=lodf)


def dc_flows(sens: SensitivitySet, injections: np.ndarray) -> np.ndarray:
    """Line flows for a (nominally balanced) nodal injection vector.

    Any imbalance is absorbed at the reference bus (whose ISF column is
    zero); imbalances above the tolerance are logged, not raised.
    """
    injections = np.asarray(injections, dtype=float)
    resid = injections.sum()
    if abs(resid) > BALANCE_TOL_MW:
        log.warning("injection imbalance %.3e MW absorbed at reference bus", resid)
    return sens.isf @ injections


def post_contingency_flows(sens: SensitivitySet, pre: np.ndarray) -> np.ndarray:
    """All monitored flows after each vulnerable-line outage: [lines, outages]."""
    cols = [sens.line_row(m) for m in sens.vulnerable_lines]
    return pre[:, None] + sens.lodf * pre[cols][None, :]


def find_bridges(case: SystemCase) -> set[int]:
    """Line ids whose outage would island the network.

    A line with a parallel companion between the same buses is never a
    bridge, whatever the simple-graph structure says.
    """
    g = nx.Graph()
    g.add_nodes_from(b.id for b in case.buses)
    count = {}
    for l in case.lines:
        key = frozenset((l.from_bus, l.to_bus))
        count[key] = count.get(key, 0) + 1
        g.add_edge(l.from_bus, l.to_bus)
    bridge_pairs = {frozenset(e) for e in nx.bridges(g)} if g.number_of_edges() else set()
    out = set()
    for l in case.lines:
        key = frozenset((l.from_bus, l.to_bus))
        if count[key] == 1 and key in bridge_pairs:
            out.add(l.id)
    return out


def select_vulnerable(case: SystemCase, k: int) -> list[int]:
    """The k largest-capacity non-bridge lines, ties broken by lower id."""
    if k > len(case.lines):
        raise CaseError(f"k={k} exceeds line count {len(case.lines)}")
    bridges = find_bridges(case)
    ranked = sorted(
        (l for l in case.lines if l.id not in bridges),
        key=lambda l: (-l.flow_max, l.id),
    )
    skipped = [l.id for l in case.lines if l.id in bridges]
    if skipped and k > 0:
        log.warning("bridge lines excluded from vulnerable set: %s", skipped)
    return [l.id for l in ranked[:k]]


def dump_ptdf_csv(sens: SensitivitySet) -> str:
    """ISF matrix as CSV: one row per line, one column per bus, 12 sig digits."""
    lines = ["line_id," + ",".join(str(b) for b in sens.bus_ids)]
    for r, lid in enumerate(sens.line_ids):
        lines.append(str(lid) + "," + ",".join(f"{v:.12g}" for v in sens.isf[r]))
    return "\n".join(lines) + "\n"
