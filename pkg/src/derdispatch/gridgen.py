"""Deterministic synthetic transmission grids for experiments and tests.

Real MATPOWER cases are not redistributable with this artifact, so every
scenario runs on generated networks: a random spanning tree densified with
chord lines, lognormal loads, a merit-order-spread generator fleet, and
line ratings derived from a base-case DC solve (with a few corridors
tightened to create congestion).  Same seed, same grid.
"""

from __future__ import annotations

import numpy as np

from . import sensitivity
from .caseio import BidCurve, Bus, CaseError, Generator, Line, Load, SystemCase


def synthetic_case(n_buses: int, n_lines: int | None = None,
                   n_gens: int | None = None, seed: int = 0,
                   load_share: float = 0.8, total_load: float | None = None,
                   capacity_margin: float = 1.7, name: str | None = None) -> SystemCase:
    """Build a connected synthetic grid; ratings start unlimited.

    `load_share` is the fraction of buses that carry demand; total system
    demand defaults to 35 MW per bus.  Generator capacity sums to
    `capacity_margin` times the total load with quadratic polynomial costs
    converted to five-segment bids downstream.
    """
    if n_buses < 2:
        raise CaseError("need at least two buses")
    rng = np.random.default_rng(seed)
    n_lines = n_lines if n_lines is not None else int(round(1.5 * n_buses))
    n_lines = max(n_lines, n_buses - 1)
    n_gens = n_gens if n_gens is not None else max(2, int(round(0.45 * n_buses)))
    n_gens = min(n_gens, n_buses)
    total_load = total_load if total_load is not None else 35.0 * n_buses

    # spanning tree with mild preferential attachment, then random chords
    edges = []
    degree = np.zeros(n_buses)
    for k in range(1, n_buses):
        w = degree[:k] + 1.0
        j = int(rng.choice(k, p=w / w.sum()))
        edges.append((j, k))
        degree[j] += 1
        degree[k] += 1
    seen = {frozenset(e) for e in edges}
    guard = 0
    while len(edges) < n_lines:
        i, j = rng.integers(0, n_buses, size=2)
        key = frozenset((int(i), int(j)))
        guard += 1
        if i == j or (key in seen and guard < 50 * n_lines):
            continue
        seen.add(key)
        edges.append((int(i), int(j)))

    buses = [Bus(i + 1) for i in range(n_buses)]
    lines = [
        Line(
            id=k,
            from_bus=i + 1,
            to_bus=j + 1,
            reactance_pu=float(rng.uniform(0.02, 0.25)),
            susceptance_pu=float(rng.uniform(0.0, 0.08)),
            flow_max=1e4,
        )
        for k, (i, j) in enumerate(edges)
    ]

    n_loads = max(1, int(round(load_share * n_buses)))
    load_buses = rng.choice(n_buses, size=n_loads, replace=False)
    raw = rng.lognormal(mean=0.0, sigma=0.6, size=n_loads)
    mw = raw / raw.sum() * total_load
    loads = [Load(int(b) + 1, float(m)) for b, m in sorted(zip(load_buses, mw))]

    gen_buses = rng.choice(n_buses, size=n_gens, replace=False)
    raw = rng.lognormal(mean=0.0, sigma=0.5, size=n_gens)
    pmax = raw / raw.sum() * total_load * capacity_margin
    pmax = np.maximum(pmax, 1.0)
    gens = []
    for gi, (b, cap) in enumerate(zip(gen_buses, pmax)):
        pmin = float(rng.uniform(0.0, 0.25) * cap)
        c1 = float(rng.uniform(15.0, 45.0))
        c2 = float(rng.uniform(0.002, 0.03))
        curve = BidCurve.from_polynomial([c2, c1, 0.0], pmin, float(cap))
        gens.append(
            Generator(
                id=gi,
                bus_id=int(b) + 1,
                p_min=pmin,
                p_max=float(cap),
                ramp_up=float(cap),
                ramp_down=float(cap),
                bid_curve=curve,
                p_prev=0.0,
            )
        )
    # slack at the biggest unit; base dispatch covers the base load
    ref_gen = max(gens, key=lambda g: g.p_max)
    for b in buses:
        b.is_reference = b.id == ref_gen.bus_id
    _set_proportional_dispatch(gens, total_load)

    return SystemCase(buses, lines, gens, loads, base_mva=100.0,
                      name=name or f"sys{n_buses}")


def _set_proportional_dispatch(gens, target: float):
    lo = sum(g.p_min for g in gens)
    hi = sum(g.p_max for g in gens)
    frac = 0.0 if hi <= lo else float(np.clip((target - lo) / (hi - lo), 0.0, 1.0))
    for g in gens:
        g.p_prev = g.p_min + frac * (g.p_max - g.p_min)


def assign_ratings(case: SystemCase, headroom: float = 1.6, floor: float = 15.0,
                   n_tight: int = 0, tight_headroom: float = 1.05,
                   load_scale: float = 1.0) -> SystemCase:
    """Rate lines from the base-case DC flows under the stored dispatch.

    Every line gets max(floor, headroom * |base flow|); the `n_tight` most
    loaded lines get `tight_headroom` instead, which is how scenarios
    manufacture congestion.  Returns a new case.
    """
    sens = sensitivity.compute_isf(case)
    inj = np.zeros(case.n_buses)
    idx = case.bus_index
    for g in case.generators:
        inj[idx[g.bus_id]] += g.p_prev
    base = case.base_load_vector() * load_scale
    scale = inj.sum() / base.sum() if base.sum() > 0 else 1.0
    inj -= base * scale  # balance so the snapshot is a valid DC state
    flows = np.abs(sensitivity.dc_flows(sens, inj))
    order = np.argsort(-flows)
    tight = set(int(i) for i in order[:n_tight])
    new_lines = []
    for l in case.lines:
        f = flows[l.id]
        h = tight_headroom if l.id in tight else headroom
        new_lines.append(
            Line(l.id, l.from_bus, l.to_bus, l.reactance_pu, l.susceptance_pu,
                 flow_max=float(max(floor, h * f)))
        )
    import copy
    from dataclasses import replace
    return replace(case, lines=new_lines,
                   buses=copy.deepcopy(case.buses),
                   generators=copy.deepcopy(case.generators),
                   loads=copy.deepcopy(case.loads),
                   deras=copy.deepcopy(case.deras))


def rate_for_contingencies(case: SystemCase, n_vulnerable: int = 5,
                           headroom: float = 1.4, floor: float = 20.0,
                           n_tight: int = 3, tight_headroom: float = 1.0,
                           dera_fractions=(0.0, 0.5)) -> tuple[SystemCase, list[int]]:
    """Rate lines so that representative dispatches survive N-1.

    Flow envelopes are taken over proportional-dispatch snapshots (DERAs
    covering each fraction in `dera_fractions` of the load at capacity
    shares) and over outages of the would-be vulnerable lines; ratings are
    `headroom` times the envelope except on the `n_tight` busiest lines,
    which get `tight_headroom`.  Returns the rated case and the vulnerable
    line ids (the busiest non-bridge corridors).
    """
    sens0 = sensitivity.compute_isf(case)
    idx = case.bus_index
    load = case.base_load_vector()
    snapshots = []
    for frac in dera_fractions:
        inj = -load.copy()
        tder_total = 0.0
        for a in case.deras:
            for e in a.tders:
                mw = frac * e.p_max_at(0)
                inj[idx[e.bus_id]] += mw
                tder_total += mw
        gen_target = load.sum() - tder_total
        lo = sum(g.p_min for g in case.generators)
        hi = sum(g.p_max for g in case.generators)
        gfrac = 0.0 if hi <= lo else float(np.clip((gen_target - lo) / (hi - lo), 0, 1))
        for g in case.generators:
            inj[idx[g.bus_id]] += g.p_min + gfrac * (g.p_max - g.p_min)
        inj -= inj.sum() * (load > 0) * load / load.sum()  # balance on load buses
        snapshots.append(inj)

    pre = np.stack([np.abs(sensitivity.dc_flows(sens0, inj)) for inj in snapshots])
    pre_env = pre.max(axis=0)
    bridges = sensitivity.find_bridges(case)

    def rank(env):
        return [int(i) for i in np.argsort(-env) if int(i) not in bridges]

    # fixed point: the outage set must be the top of the FULL envelope,
    # which itself depends on the outage set
    vulnerable = rank(pre_env)[:n_vulnerable]
    envelope = pre_env
    for _ in range(4):
        envelope = pre_env.copy()
        sens = sensitivity.compute_isf(case, vulnerable_lines=vulnerable)
        for inj in snapshots:
            flows = sensitivity.dc_flows(sens, inj)
            post = np.abs(sensitivity.post_contingency_flows(sens, flows))
            for c, m in enumerate(vulnerable):
                post[sens.line_row(m), c] = 0.0
            envelope = np.maximum(envelope, post.max(axis=1))
        new_vul = rank(envelope)[:n_vulnerable]
        if set(new_vul) == set(vulnerable):
            break
        vulnerable = new_vul

    # tighten corridors just below the vulnerable set: capacity order then
    # stays aligned with the envelope order, so a later top-capacity
    # selection recovers exactly the outage set the envelope covered
    busiest = rank(envelope)
    vulnerable = busiest[:n_vulnerable]
    tight = set(busiest[n_vulnerable:n_vulnerable + n_tight])
    new_lines = []
    for l in case.lines:
        h = tight_headroom if l.id in tight else headroom
        new_lines.append(
            Line(l.id, l.from_bus, l.to_bus, l.reactance_pu, l.susceptance_pu,
                 flow_max=float(max(floor, h * envelope[l.id])))
        )
    import copy
    from dataclasses import replace
    rated = replace(case, lines=new_lines,
                    buses=copy.deepcopy(case.buses),
                    generators=copy.deepcopy(case.generators),
                    loads=copy.deepcopy(case.loads),
                    deras=copy.deepcopy(case.deras))
    return rated, vulnerable


def triangle_case(x: float = 0.1, load_mw: float = 9.0, cap: float = 100.0,
                  kappas=(10.0, 20.0)) -> SystemCase:
    """Three buses in a triangle: generators at A and B, load at C (slack A)."""
    buses = [Bus(1, is_reference=True), Bus(2), Bus(3)]
    lines = [
        Line(0, 1, 2, x, 0.0, cap),
        Line(1, 2, 3, x, 0.0, cap),
        Line(2, 1, 3, x, 0.0, cap),
    ]
    gens = [
        Generator(0, 1, 0.0, 2 * load_mw, 2 * load_mw, 2 * load_mw,
                  BidCurve.single(kappas[0], 0.0, 2 * load_mw)),
        Generator(1, 2, 0.0, 2 * load_mw, 2 * load_mw, 2 * load_mw,
                  BidCurve.single(kappas[1], 0.0, 2 * load_mw)),
    ]
    return SystemCase(buses, lines, gens, [Load(3, load_mw)], name="triangle3")
