"""Network cases, aggregator construction, and time-varying market bids.

A :class:`SystemCase` is the static description of the grid: buses, lines,
conventional generators, nodal loads, and the DER aggregators (DERAs) with
their transmission-node DERs (T-DERs).  Cases come from a MATPOWER-style
``.m`` text subset (``mpc.bus`` / ``mpc.branch`` / ``mpc.gen`` /
``mpc.gencost`` / ``mpc.baseMVA``) or are built programmatically.

All construction helpers are pure: they return new case objects and never
mutate their inputs, so cases can be shared freely across threads.
"""

from __future__ import annotations

import copy
import csv
import io
import logging
import re
from dataclasses import dataclass, field, replace

import networkx as nx
import numpy as np

log = logging.getLogger(__name__)

BID_SEGMENTS = 5
# bidding-level factors for the five segments, low to high
SEGMENT_FACTORS = (0.85, 0.94, 1.02, 1.11, 1.20)
RANDOM_FACTOR_LO, RANDOM_FACTOR_HI = 0.85, 1.15
TIME_FACTOR_CLAMP = (0.5, 2.0)


class CaseError(ValueError):
    """Base error for case construction and validation."""


class CaseParseError(CaseError):
    """Malformed case text; message carries the 1-based line number."""


class CaseValidationError(CaseError):
    """Structurally parseable case that violates a model invariant."""


def _at(value, t: int):
    """Read a possibly per-interval field: scalars broadcast, sequences index."""
    if isinstance(value, (list, tuple)):
        return value[t]
    if isinstance(value, np.ndarray) and value.ndim > 0:
        return float(value[t])
    return value


# ---------------------------------------------------------------------------
# bid curves


@dataclass(frozen=True)
class Segment:
    """One affine piece of a convex bid: cost >= kappa * p + beta on [q_lo, q_hi]."""

    kappa: float
    beta: float
    q_lo: float
    q_hi: float


@dataclass(frozen=True)
class BidCurve:
    """Convex piecewise-linear cost as an ordered tuple of segments.

    Slopes are strictly increasing, quantity ranges partition
    [p_min, p_max] without gaps, and the max-affine evaluation is
    continuous across breakpoints.
    """

    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise CaseError("bid curve needs at least one segment")
        prev = None
        for s in self.segments:
            if s.q_hi < s.q_lo - 1e-12:
                raise CaseError(f"segment range inverted: [{s.q_lo}, {s.q_hi}]")
            if prev is not None:
                if s.kappa <= prev.kappa:
                    raise CaseError(
                        f"non-convex bid curve: slope {s.kappa} after {prev.kappa}"
                    )
                if abs(s.q_lo - prev.q_hi) > 1e-9 * max(1.0, abs(s.q_lo)):
                    raise CaseError("bid segments leave a quantity gap")
                lhs = prev.kappa * s.q_lo + prev.beta
                rhs = s.kappa * s.q_lo + s.beta
                if abs(lhs - rhs) > 1e-9 * max(1.0, abs(lhs)):
                    raise CaseError(
                        f"bid curve discontinuous at {s.q_lo}: {lhs} vs {rhs}"
                    )
            prev = s

    @property
    def p_min(self) -> float:
        return self.segments[0].q_lo

    @property
    def p_max(self) -> float:
        return self.segments[-1].q_hi

    def cost(self, p: float) -> float:
        """Max-affine evaluation max_s(kappa_s * p + beta_s)."""
        return max(s.kappa * p + s.beta for s in self.segments)

    def scaled(self, share: float) -> "BidCurve":
        """Perspective scaling: quantities and intercepts shrink by `share`.

        Keeps marginal prices; a member owning `share` of an aggregate
        reproduces the aggregate curve when all members are scaled copies.
        """
        if share <= 0:
            raise CaseError("share must be positive")
        return BidCurve(
            tuple(
                Segment(s.kappa, s.beta * share, s.q_lo * share, s.q_hi * share)
                for s in self.segments
            )
        )

    @classmethod
    def single(cls, kappa: float, p_min: float, p_max: float, beta: float = 0.0):
        return cls((Segment(kappa, beta, p_min, p_max),))

    @classmethod
    def from_points(cls, points) -> "BidCurve":
        """Piecewise-linear cost through (quantity, cost) sample points."""
        pts = [(float(x), float(y)) for x, y in points]
        if len(pts) < 2:
            raise CaseError("need at least two cost points")
        segs = []
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x1 <= x0:
                raise CaseError("cost points must have increasing quantities")
            kappa = (y1 - y0) / (x1 - x0)
            segs.append(Segment(kappa, y0 - kappa * x0, x0, x1))
        merged = _merge_equal_slopes(segs)
        return cls(tuple(merged))

    @classmethod
    def from_polynomial(cls, coeffs, p_min: float, p_max: float,
                        n_segments: int = BID_SEGMENTS) -> "BidCurve":
        """Sample a polynomial cost (highest order first) at even breakpoints."""
        poly = np.polynomial.Polynomial(list(reversed([float(c) for c in coeffs])))
        if p_max <= p_min:
            # degenerate range: marginal price is the derivative at the point
            kappa = float(poly.deriv()(p_min))
            beta = float(poly(p_min)) - kappa * p_min
            return cls((Segment(kappa, beta, p_min, p_max),))
        xs = np.linspace(p_min, p_max, n_segments + 1)
        return cls.from_points([(x, float(poly(x))) for x in xs])

    @classmethod
    def from_slopes(cls, slopes, p_min: float, p_max: float,
                    anchor_cost: float | None = None) -> "BidCurve":
        """Even quantity split with the given strictly increasing slopes.

        The curve is anchored at cost(p_min) = anchor_cost (default
        kappa_1 * p_min) and the intercepts are chosen for continuity.
        """
        slopes = [float(k) for k in slopes]
        if p_max < p_min:
            raise CaseError("p_max below p_min")
        if p_max == p_min:
            return cls((Segment(slopes[0], 0.0, p_min, p_max),))
        xs = np.linspace(p_min, p_max, len(slopes) + 1)
        c = anchor_cost if anchor_cost is not None else slopes[0] * p_min
        segs = []
        for k, (x0, x1) in zip(slopes, zip(xs, xs[1:])):
            segs.append(Segment(k, c - k * x0, float(x0), float(x1)))
            c += k * (x1 - x0)
        return cls(tuple(_merge_equal_slopes(segs)))


def _merge_equal_slopes(segs):
    """Collapse adjacent segments whose slopes coincide (linear costs)."""
    out = [segs[0]]
    for s in segs[1:]:
        prev = out[-1]
        if abs(s.kappa - prev.kappa) <= 1e-12 * max(1.0, abs(s.kappa)):
            out[-1] = Segment(prev.kappa, prev.beta, prev.q_lo, s.q_hi)
        else:
            out.append(s)
    return out


# ---------------------------------------------------------------------------
# grid elements


@dataclass
class Bus:
    id: int
    is_reference: bool = False


@dataclass
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance_pu: float
    susceptance_pu: float
    flow_max: float
    flow_min: float | None = None

    def __post_init__(self):
        if self.flow_min is None:
            self.flow_min = -self.flow_max
        if self.reactance_pu <= 0:
            raise CaseValidationError(f"line {self.id}: zero or negative reactance")
        if self.flow_max <= 0:
            raise CaseValidationError(f"line {self.id}: flow_max must be positive")
        if not (self.flow_min <= 0.0 <= self.flow_max):
            raise CaseValidationError(f"line {self.id}: limits must bracket zero")


@dataclass
class Generator:
    id: int
    bus_id: int
    p_min: float | list
    p_max: float | list
    ramp_up: float
    ramp_down: float
    bid_curve: BidCurve | list | None = None
    p_prev: float = 0.0

    def p_min_at(self, t: int) -> float:
        return _at(self.p_min, t)

    def p_max_at(self, t: int) -> float:
        return _at(self.p_max, t)

    def bid_at(self, t: int) -> BidCurve:
        if self.bid_curve is None:
            raise CaseError(f"generator {self.id} has no bid curve")
        return _at(self.bid_curve, t)

    def __post_init__(self):
        if self.ramp_up < 0 or self.ramp_down < 0:
            raise CaseValidationError(f"generator {self.id}: negative ramp limit")


@dataclass
class Load:
    bus_id: int
    base_mw: float


@dataclass
class TDer:
    id: str
    bus_id: int
    p_min: float | list
    p_max: float | list
    cost_curve: BidCurve | list | None = None

    def p_min_at(self, t: int) -> float:
        return _at(self.p_min, t)

    def p_max_at(self, t: int) -> float:
        return _at(self.p_max, t)

    def __post_init__(self):
        lo = self.p_min if np.isscalar(self.p_min) else min(self.p_min)
        if lo < 0:
            raise CaseValidationError(f"T-DER {self.id}: p_min below zero")


@dataclass
class Dera:
    id: str
    tders: list[TDer]
    bid_curve: BidCurve | list | None = None

    def __post_init__(self):
        if not self.tders:
            raise CaseValidationError(f"DERA {self.id}: needs at least one T-DER")

    def p_min_at(self, t: int) -> float:
        return sum(e.p_min_at(t) for e in self.tders)

    def p_max_at(self, t: int) -> float:
        return sum(e.p_max_at(t) for e in self.tders)

    def bid_at(self, t: int) -> BidCurve:
        if self.bid_curve is None:
            raise CaseError(f"DERA {self.id} has no bid curve")
        return _at(self.bid_curve, t)

    def member_curve(self, e: TDer, t: int) -> BidCurve:
        """Self-dispatch cost of one member at interval t.

        Falls back to the DERA bid curve scaled by the member's capacity
        share when the T-DER carries no cost curve of its own.
        """
        if e.cost_curve is not None:
            return _at(e.cost_curve, t)
        total = self.p_max_at(t)
        share = e.p_max_at(t) / total if total > 0 else 1.0 / len(self.tders)
        if share <= 0:
            share = 1e-9
        return self.bid_at(t).scaled(share)


@dataclass
class SystemCase:
    buses: list[Bus]
    lines: list[Line]
    generators: list[Generator]
    loads: list[Load]
    deras: list[Dera] = field(default_factory=list)
    base_mva: float = 100.0
    name: str = "case"

    def __post_init__(self):
        self.validate()

    # -- index helpers ------------------------------------------------
    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def bus_index(self) -> dict[int, int]:
        idx = getattr(self, "_bus_index", None)
        if idx is None or len(idx) != len(self.buses):
            idx = {b.id: i for i, b in enumerate(self.buses)}
            object.__setattr__(self, "_bus_index", idx)
        return idx

    @property
    def reference_bus(self) -> int:
        return next(b.id for b in self.buses if b.is_reference)

    def line_by_id(self, line_id: int) -> Line:
        by_id = getattr(self, "_line_index", None)
        if by_id is None or len(by_id) != len(self.lines):
            by_id = {l.id: l for l in self.lines}
            object.__setattr__(self, "_line_index", by_id)
        return by_id[line_id]

    def all_tders(self) -> list[TDer]:
        return [e for a in self.deras for e in a.tders]

    def base_load_vector(self) -> np.ndarray:
        v = np.zeros(self.n_buses)
        for d in self.loads:
            v[self.bus_index[d.bus_id]] += d.base_mw
        return v

    # -- validation ---------------------------------------------------
    def validate(self):
        refs = [b.id for b in self.buses if b.is_reference]
        if len(refs) > 1:
            raise CaseValidationError(f"multiple reference buses: {refs}")
        if not refs:
            raise CaseValidationError("no reference bus declared")
        ids = {b.id for b in self.buses}
        if len(ids) != len(self.buses):
            raise CaseValidationError("duplicate bus ids")
        for l in self.lines:
            if l.from_bus not in ids or l.to_bus not in ids:
                raise CaseValidationError(f"line {l.id} references unknown bus")
        for g in self.generators:
            if g.bus_id not in ids:
                raise CaseValidationError(f"generator {g.id} on unknown bus {g.bus_id}")
        for d in self.loads:
            if d.bus_id not in ids:
                raise CaseValidationError(f"load on unknown bus {d.bus_id}")
        for a in self.deras:
            for e in a.tders:
                if e.bus_id not in ids:
                    raise CaseValidationError(f"T-DER {e.id} on unknown bus {e.bus_id}")
        g = nx.Graph()
        g.add_nodes_from(ids)
        g.add_edges_from((l.from_bus, l.to_bus) for l in self.lines)
        if len(ids) > 1 and not nx.is_connected(g):
            parts = sorted(len(c) for c in nx.connected_components(g))
            raise CaseValidationError(f"islanded network: component sizes {parts}")


# ---------------------------------------------------------------------------
# MATPOWER-subset parsing

_ASSIGN_RE = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")

# column positions in the MATPOWER matrices we consume
_BUS_ID, _BUS_TYPE, _BUS_PD = 0, 1, 2
_BR_FROM, _BR_TO, _BR_X, _BR_B, _BR_RATE_A, _BR_STATUS = 0, 1, 3, 4, 5, 10
_GEN_BUS, _GEN_PG, _GEN_STATUS, _GEN_PMAX, _GEN_PMIN, _GEN_RAMP10 = 0, 1, 7, 8, 9, 17


def _strip_comment(line: str) -> str:
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _parse_matrices(text: str):
    """Collect mpc.<name> scalar and matrix assignments with line numbers."""
    scalars, matrices = {}, {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = _strip_comment(lines[i])
        m = _ASSIGN_RE.match(raw)
        if not m:
            i += 1
            continue
        name, rest = m.group(1), m.group(2).strip()
        if rest.startswith("["):
            rows, body = [], rest[1:]
            lineno = i + 1
            closed = False
            while True:
                if "]" in body:
                    body, closed = body[: body.index("]")], True
                for chunk in body.replace(";", "\n").splitlines():
                    toks = chunk.split()
                    if not toks:
                        continue
                    try:
                        rows.append([float(tk) for tk in toks])
                    except ValueError as exc:
                        raise CaseParseError(
                            f"line {lineno}: bad numeric token in mpc.{name}: {exc}"
                        ) from None
                if closed:
                    break
                i += 1
                if i >= len(lines):
                    raise CaseParseError(f"line {lineno}: unterminated matrix mpc.{name}")
                body = _strip_comment(lines[i])
                lineno = i + 1
            matrices[name] = rows
        else:
            val = rest.rstrip(";").strip().strip("'\"")
            scalars[name] = val
        i += 1
    return scalars, matrices


def parse_case(text: str, name: str = "case", interval_minutes: float = 5.0,
               unlimited_rating: float = 10000.0) -> SystemCase:
    """Parse a MATPOWER-style case text into a SystemCase.

    Supported fields: mpc.baseMVA, mpc.bus, mpc.branch, mpc.gen, mpc.gencost.
    Anything else is ignored with a debug note.  Branch ratings of zero are
    treated as unlimited (replaced by `unlimited_rating`), gencost rows are
    converted to five-segment convex bid curves, and per-interval generator
    ramps assume `interval_minutes` against the RAMP_10 column when present.
    """
    scalars, matrices = _parse_matrices(text)
    for key in matrices:
        if key not in ("bus", "branch", "gen", "gencost", "bid_segments"):
            log.warning("ignoring unsupported MATPOWER field mpc.%s", key)
    if "bus" not in matrices or "branch" not in matrices:
        raise CaseParseError("case text lacks mpc.bus or mpc.branch")
    base_mva = float(scalars.get("baseMVA", 100.0))

    buses, loads = [], []
    for row in matrices["bus"]:
        bid = int(row[_BUS_ID])
        buses.append(Bus(bid, is_reference=int(row[_BUS_TYPE]) == 3))
        pd = float(row[_BUS_PD])
        if pd > 0:
            loads.append(Load(bid, pd))
        elif pd < 0:
            log.warning("bus %d: negative demand %.3f MW ignored", bid, pd)

    n_unrated = 0
    lines = []
    for k, row in enumerate(matrices["branch"]):
        if len(row) > _BR_STATUS and int(row[_BR_STATUS]) == 0:
            log.warning("branch row %d out of service, dropped", k)
            continue
        rate = float(row[_BR_RATE_A])
        if rate <= 0:
            rate = unlimited_rating
            n_unrated += 1
        lines.append(
            Line(
                id=len(lines),
                from_bus=int(row[_BR_FROM]),
                to_bus=int(row[_BR_TO]),
                reactance_pu=float(row[_BR_X]),
                susceptance_pu=float(row[_BR_B]),
                flow_max=rate,
            )
        )
    if n_unrated:
        log.warning("%d branch(es) without rating; treated as %.0f MW", n_unrated, unlimited_rating)

    exact_segments: dict[int, list[Segment]] = {}
    for row in matrices.get("bid_segments", []):
        exact_segments.setdefault(int(row[0]), []).append(
            Segment(row[1], row[2], row[3], row[4]))

    gens = []
    gencost = matrices.get("gencost", [])
    for k, row in enumerate(matrices.get("gen", [])):
        if len(row) > _GEN_STATUS and int(row[_GEN_STATUS]) == 0:
            log.warning("gen row %d offline, dropped", k)
            continue
        pmax, pmin = float(row[_GEN_PMAX]), float(row[_GEN_PMIN])
        if pmax < pmin:
            raise CaseValidationError(f"gen row {k}: p_max {pmax} below p_min {pmin}")
        ramp = pmax - pmin
        if len(row) > _GEN_RAMP10 and float(row[_GEN_RAMP10]) > 0:
            ramp = float(row[_GEN_RAMP10]) * interval_minutes / 10.0
        if k in exact_segments:
            curve = BidCurve(tuple(exact_segments[k]))
        else:
            curve = _gencost_to_curve(gencost[k], pmin, pmax) if k < len(gencost) else None
        gens.append(
            Generator(
                id=len(gens),
                bus_id=int(row[_GEN_BUS]),
                p_min=pmin,
                p_max=pmax,
                ramp_up=ramp,
                ramp_down=ramp,
                bid_curve=curve,
                p_prev=float(row[_GEN_PG]),
            )
        )

    return SystemCase(buses, lines, gens, loads, base_mva=base_mva, name=name)


def _gencost_to_curve(row, pmin: float, pmax: float) -> BidCurve:
    model, ncost = int(row[0]), int(row[3])
    params = row[4:]
    if model == 2:
        return BidCurve.from_polynomial(params[:ncost], pmin, pmax)
    if model == 1:
        pts = [(params[2 * i], params[2 * i + 1]) for i in range(ncost)]
        return BidCurve.from_points(pts)
    raise CaseParseError(f"unsupported gencost model {model}")


def serialize_case(case: SystemCase) -> str:
    """Emit the MATPOWER subset for the grid part of a case.

    DERAs and per-interval bid schedules are runtime constructions and are
    not serialized; round-tripping covers buses, branches, generators, and
    static cost curves (as piecewise points).
    """
    out = io.StringIO()
    out.write(f"function mpc = {case.name}\n")
    out.write("mpc.version = '2';\n")
    out.write(f"mpc.baseMVA = {case.base_mva:.17g};\n")
    load_at = {}
    for d in case.loads:
        load_at[d.bus_id] = load_at.get(d.bus_id, 0.0) + d.base_mw
    out.write("mpc.bus = [\n")
    for b in case.buses:
        btype = 3 if b.is_reference else 1
        pd = load_at.get(b.id, 0.0)
        out.write(f"\t{b.id}\t{btype}\t{pd:.17g}\t0\t0\t0\t1\t1\t0\t138\t1\t1.1\t0.9;\n")
    out.write("];\n")
    out.write("mpc.gen = [\n")
    for g in case.generators:
        ramp10 = g.ramp_up * 2.0  # inverse of the 5-minute scaling above
        out.write(
            f"\t{g.bus_id}\t{g.p_prev:.17g}\t0\t0\t0\t1\t{case.base_mva:.17g}\t1"
            f"\t{_at(g.p_max, 0):.17g}\t{_at(g.p_min, 0):.17g}"
            f"\t0\t0\t0\t0\t0\t0\t0\t{ramp10:.17g}\t0\t0\t0;\n"
        )
    out.write("];\n")
    out.write("mpc.branch = [\n")
    for l in case.lines:
        rate = l.flow_max
        out.write(
            f"\t{l.from_bus}\t{l.to_bus}\t0\t{l.reactance_pu:.17g}"
            f"\t{l.susceptance_pu:.17g}\t{rate:.17g}\t0\t0\t0\t0\t1\t-360\t360;\n"
        )
    out.write("];\n")
    out.write("mpc.gencost = [\n")
    for g in case.generators:
        curve = _at(g.bid_curve, 0) if g.bid_curve is not None else None
        if curve is None:
            out.write("\t2\t0\t0\t2\t0\t0;\n")
            continue
        pts = [(curve.segments[0].q_lo, curve.cost(curve.segments[0].q_lo))]
        for s in curve.segments:
            pts.append((s.q_hi, curve.cost(s.q_hi)))
        flat = "\t".join(f"{v:.17g}" for xy in pts for v in xy)
        out.write(f"\t1\t0\t0\t{len(pts)}\t{flat};\n")
    out.write("];\n")
    # extension block: exact bid segments (gencost points lose the last ulp
    # to slope division on re-parse); readers that only know MATPOWER can
    # ignore it and still get an equivalent curve from mpc.gencost
    out.write("mpc.bid_segments = [\n")
    for gi, g in enumerate(case.generators):
        curve = _at(g.bid_curve, 0) if g.bid_curve is not None else None
        if curve is None:
            continue
        for s in curve.segments:
            out.write(
                f"\t{gi}\t{s.kappa:.17g}\t{s.beta:.17g}\t{s.q_lo:.17g}\t{s.q_hi:.17g};\n"
            )
    out.write("];\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# DERA construction and bids


def build_deras(case: SystemCase, fraction: float, group_size: int, seed: int,
                threshold: float = 0.0) -> SystemCase:
    """Install one T-DER per qualifying load bus and group them into DERAs.

    Each load bus with base demand above `threshold` hosts a T-DER of
    capacity `fraction` times its base load (minimum zero).  T-DERs are
    shuffled with `seed` and partitioned into groups of `group_size`;
    the last group may be smaller.
    """
    if not (0.0 < fraction <= 1.0):
        raise CaseError("fraction must be in (0, 1]")
    if group_size < 1:
        raise CaseError("group_size must be at least 1")
    qualifying = [d for d in case.loads if d.base_mw > threshold]
    if not qualifying:
        raise CaseError("no load buses qualify for T-DER placement")
    tders = [
        TDer(id=f"D{d.bus_id}", bus_id=d.bus_id, p_min=0.0, p_max=fraction * d.base_mw)
        for d in sorted(qualifying, key=lambda d: d.bus_id)
    ]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(tders))
    deras = []
    for gi, start in enumerate(range(0, len(tders), group_size)):
        members = [copy.deepcopy(tders[j]) for j in order[start:start + group_size]]
        deras.append(Dera(id=f"A{gi}", tders=members))
    out = replace(case, deras=deras,
                  buses=copy.deepcopy(case.buses), lines=copy.deepcopy(case.lines),
                  generators=copy.deepcopy(case.generators), loads=copy.deepcopy(case.loads))
    return out


def _time_factors(profile: "LoadProfile | None", horizon: int) -> np.ndarray:
    if profile is None:
        return np.ones(horizon)
    sysload = profile.system()[:horizon]
    alpha = sysload / sysload.mean()
    return np.clip(alpha, *TIME_FACTOR_CLAMP)


def _base_lmp_at(base_lmp, t: int, bus_ids, case: SystemCase) -> float:
    """Resolve the base LMP for a unit spanning `bus_ids` at interval t."""
    if np.isscalar(base_lmp):
        return float(base_lmp)
    arr = np.asarray(base_lmp, dtype=float)
    if arr.ndim == 1:  # per-interval system price
        return float(arr[t])
    weights = {d.bus_id: d.base_mw for d in case.loads}
    idx = case.bus_index
    vals = np.array([arr[t, idx[b]] for b in bus_ids])
    w = np.array([weights.get(b, 1.0) for b in bus_ids])
    return float(vals @ w / w.sum())


def generate_bids(case: SystemCase, base_lmp, seed: int,
                  profile: "LoadProfile | None" = None,
                  horizon: int | None = None) -> SystemCase:
    """Attach per-interval five-segment bid curves to generators and DERAs.

    Segment prices are base_lmp * segment factor * a uniform random factor
    in [0.85, 1.15] drawn per unit per interval * a load-proportional time
    factor (1 when no profile is given).  Quantities split [p_min, p_max]
    evenly; intercepts make the max-affine curve continuous.
    """
    if np.isscalar(base_lmp):
        if float(base_lmp) <= 0:
            raise CaseError("base_lmp must be positive")
    elif np.asarray(base_lmp, dtype=float).min() <= 0:
        raise CaseError("base_lmp must be positive")
    if horizon is None:
        if profile is not None:
            horizon = profile.horizon
        elif not np.isscalar(base_lmp):
            horizon = np.asarray(base_lmp).shape[0]
        else:
            horizon = 1
    alpha_t = _time_factors(profile, horizon)
    rng = np.random.default_rng(seed)

    out = replace(case,
                  buses=copy.deepcopy(case.buses), lines=copy.deepcopy(case.lines),
                  generators=copy.deepcopy(case.generators), loads=copy.deepcopy(case.loads),
                  deras=copy.deepcopy(case.deras))
    for g in out.generators:
        alpha_r = rng.uniform(RANDOM_FACTOR_LO, RANDOM_FACTOR_HI, size=horizon)
        curves = []
        for t in range(horizon):
            base = _base_lmp_at(base_lmp, t, [g.bus_id], case)
            slopes = [base * a_s * alpha_r[t] * alpha_t[t] for a_s in SEGMENT_FACTORS]
            curves.append(BidCurve.from_slopes(slopes, g.p_min_at(t), g.p_max_at(t)))
        g.bid_curve = curves
    for a in out.deras:
        alpha_r = rng.uniform(RANDOM_FACTOR_LO, RANDOM_FACTOR_HI, size=horizon)
        member_buses = [e.bus_id for e in a.tders]
        curves = []
        for t in range(horizon):
            base = _base_lmp_at(base_lmp, t, member_buses, case)
            slopes = [base * a_s * alpha_r[t] * alpha_t[t] for a_s in SEGMENT_FACTORS]
            curves.append(BidCurve.from_slopes(slopes, a.p_min_at(t), a.p_max_at(t)))
        a.bid_curve = curves
    return out


def assign_tder_costs(case: SystemCase, mode: str, seed: int,
                      base_lmp=None, profile: "LoadProfile | None" = None,
                      horizon: int | None = None, smoothing: float = 0.0) -> SystemCase:
    """Give each T-DER its own self-dispatch cost curves.

    mode "scaled": capacity-share-scaled copies of the DERA bid (the
    default behaviour even without calling this; made explicit here).
    mode "independent": per-T-DER five-segment curves built like market
    bids, with the per-interval random factor following an AR(1) with
    coefficient `smoothing` so member merit order evolves over time.
    """
    if mode not in ("scaled", "independent"):
        raise CaseError(f"unknown T-DER cost mode {mode!r}")
    out = replace(case,
                  buses=copy.deepcopy(case.buses), lines=copy.deepcopy(case.lines),
                  generators=copy.deepcopy(case.generators), loads=copy.deepcopy(case.loads),
                  deras=copy.deepcopy(case.deras))
    if mode == "scaled":
        for a in out.deras:
            for e in a.tders:
                e.cost_curve = None  # member_curve falls back to the scaled DERA bid
        return out
    if base_lmp is None:
        raise CaseError("independent T-DER costs need base_lmp")
    if horizon is None:
        horizon = profile.horizon if profile is not None else 1
    alpha_t = _time_factors(profile, horizon)
    rng = np.random.default_rng(seed)
    rho = float(np.clip(smoothing, 0.0, 0.999))
    span = RANDOM_FACTOR_HI - RANDOM_FACTOR_LO
    for a in out.deras:
        for e in a.tders:
            # AR(1)-smoothed uniform factor, kept inside the bid band
            u = rng.uniform(-1.0, 1.0, size=horizon)
            z = np.empty(horizon)
            z[0] = u[0]
            for t in range(1, horizon):
                z[t] = rho * z[t - 1] + np.sqrt(1 - rho * rho) * u[t]
            factor = (RANDOM_FACTOR_LO + RANDOM_FACTOR_HI) / 2 + np.clip(z, -1, 1) * span / 2
            curves = []
            for t in range(horizon):
                base = _base_lmp_at(base_lmp, t, [e.bus_id], case)
                slopes = [base * a_s * factor[t] * alpha_t[t] for a_s in SEGMENT_FACTORS]
                curves.append(BidCurve.from_slopes(slopes, e.p_min_at(t), e.p_max_at(t)))
            e.cost_curve = curves
    return out


# ---------------------------------------------------------------------------
# load profiles


@dataclass
class LoadProfile:
    """Per-bus, per-interval demand aligned to the case bus order."""

    demand: np.ndarray  # [T, n_buses] MW
    interval_minutes: float = 5.0

    def __post_init__(self):
        self.demand = np.asarray(self.demand, dtype=float)
        if self.demand.ndim != 2:
            raise CaseValidationError("demand must be [intervals, buses]")
        if (self.demand < 0).any():
            raise CaseValidationError("negative demand in load profile")

    @property
    def horizon(self) -> int:
        return self.demand.shape[0]

    def at(self, t: int) -> np.ndarray:
        return self.demand[t]

    def system(self) -> np.ndarray:
        return self.demand.sum(axis=1)

    @classmethod
    def from_shape(cls, case: SystemCase, shape, interval_minutes: float = 5.0):
        """Scale every base load by a common per-interval shape factor."""
        shape = np.asarray(shape, dtype=float)
        base = case.base_load_vector()
        return cls(np.outer(shape, base), interval_minutes)


def load_profile(csv_text: str, case: SystemCase,
                 interval_minutes: float = 5.0) -> LoadProfile:
    """Read an `interval,bus_id,mw` CSV into a LoadProfile.

    Buses absent from the CSV follow the system-wide shape of the provided
    buses, scaled by their own base load.
    """
    reader = csv.reader(io.StringIO(csv_text))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header[:3]] != ["interval", "bus_id", "mw"]:
        raise CaseParseError("load CSV must start with header interval,bus_id,mw")
    idx = case.bus_index
    entries = {}
    horizon = 0
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        try:
            t, bus, mw = int(row[0]), int(row[1]), float(row[2])
        except (ValueError, IndexError):
            raise CaseParseError(f"line {lineno}: bad load row {row}") from None
        if bus not in idx:
            raise CaseValidationError(f"line {lineno}: unknown bus {bus}")
        if mw < 0:
            raise CaseValidationError(f"line {lineno}: negative demand {mw} at bus {bus}")
        entries[(t, bus)] = mw
        horizon = max(horizon, t + 1)
    if not entries:
        raise CaseParseError("load CSV has no data rows")

    provided_buses = sorted({b for (_, b) in entries})
    for b in provided_buses:
        missing = [t for t in range(horizon) if (t, b) not in entries]
        if missing:
            raise CaseValidationError(f"bus {b} missing intervals {missing[:5]}")

    base = {d.bus_id: d.base_mw for d in case.loads}
    prov_base = sum(base.get(b, 0.0) for b in provided_buses)
    demand = np.zeros((horizon, case.n_buses))
    shape = np.zeros(horizon)
    for t in range(horizon):
        tot = sum(entries[(t, b)] for b in provided_buses)
        shape[t] = tot / prov_base if prov_base > 0 else 1.0
    for (t, b), mw in entries.items():
        demand[t, idx[b]] = mw
    for d in case.loads:
        if d.bus_id not in provided_buses:
            demand[:, idx[d.bus_id]] = d.base_mw * shape
    return LoadProfile(demand, interval_minutes)
