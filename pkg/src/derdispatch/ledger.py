"""Run ledger: one JSON meta file plus one JSON-lines record per interval.

The ledger is the cross-component surface: the trainer rebuilds graph
windows and training targets from these files alone, and the harness can
recompute every summary statistic from them.  Arrays are stored in case
order (buses, lines, generators, DERA members) to keep records compact.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .caseio import BidCurve, CaseError, Segment, SystemCase, _at

LEDGER_VERSION = 1
META_NAME = "meta.json"
RECORDS_NAME = "records.jsonl"


def case_skeleton(case: SystemCase) -> dict:
    return {
        "name": case.name,
        "base_mva": case.base_mva,
        "bus_ids": [b.id for b in case.buses],
        "reference_bus": case.reference_bus,
        "lines": [
            {"id": l.id, "from": l.from_bus, "to": l.to_bus,
             "x": l.reactance_pu, "b": l.susceptance_pu,
             "fmax": l.flow_max, "fmin": l.flow_min}
            for l in case.lines
        ],
        "generators": [
            {"id": g.id, "bus": g.bus_id, "p_min": _at(g.p_min, 0),
             "p_max": _at(g.p_max, 0), "ramp_up": g.ramp_up,
             "ramp_down": g.ramp_down}
            for g in case.generators
        ],
        "loads": [{"bus": d.bus_id, "mw": d.base_mw} for d in case.loads],
        "deras": [
            {"id": a.id,
             "tders": [{"id": e.id, "bus": e.bus_id, "p_min": _at(e.p_min, 0),
                        "p_max": _at(e.p_max, 0)} for e in a.tders]}
            for a in case.deras
        ],
    }


def curve_to_rows(curve: BidCurve) -> list[list[float]]:
    return [[s.kappa, s.beta, s.q_lo, s.q_hi] for s in curve.segments]


def rows_to_curve(rows) -> BidCurve:
    return BidCurve(tuple(Segment(*row) for row in rows))


class LedgerWriter:
    """Single-writer append-only ledger for one rolling run."""

    def __init__(self, directory: str, case: SystemCase, meta_extra: dict | None = None):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)
        meta = {"version": LEDGER_VERSION, "case": case_skeleton(case)}
        meta.update(meta_extra or {})
        with open(os.path.join(directory, META_NAME), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=1)
            fh.write("\n")
        self._fh = open(os.path.join(directory, RECORDS_NAME), "w", encoding="utf-8")

    def append(self, record: dict) -> None:
        self._fh.write(json.dumps(record, separators=(",", ":")) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_ledger(directory: str) -> tuple[dict, list[dict]]:
    with open(os.path.join(directory, META_NAME), encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("version") != LEDGER_VERSION:
        raise CaseError(f"unknown ledger version {meta.get('version')!r}")
    records = []
    with open(os.path.join(directory, RECORDS_NAME), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    records.sort(key=lambda r: r["t"])
    return meta, records


@dataclass
class LedgerView:
    """Typed access to one run's records, aligned with a live case object."""

    case: SystemCase
    meta: dict
    records: list[dict]

    @classmethod
    def open(cls, directory: str, case: SystemCase) -> "LedgerView":
        meta, records = read_ledger(directory)
        skel = meta["case"]
        if skel["bus_ids"] != [b.id for b in case.buses]:
            raise CaseError("ledger was recorded for a different bus set")
        led_tders = [e["id"] for a in skel["deras"] for e in a["tders"]]
        if led_tders != [e.id for e in case.all_tders()]:
            raise CaseError("ledger was recorded for a different DERA structure")
        return cls(case, meta, records)

    def loads(self, i: int) -> np.ndarray:
        return np.asarray(self.records[i]["loads"], dtype=float)

    def tder_output(self, i: int) -> dict[str, float]:
        ids = [e.id for e in self.case.all_tders()]
        return dict(zip(ids, self.records[i]["p_tder"]))

    def bids_at(self, i: int) -> dict:
        rec = self.records[i]
        out = {}
        for g, rows in zip(self.case.generators, rec["gen_bids"]):
            out[g.id] = rows_to_curve(rows)
        for a, rows in zip(self.case.deras, rec["dera_bids"]):
            out[a.id] = rows_to_curve(rows)
        return out

    def prev_gen(self, i: int) -> dict[int, float]:
        return {g.id: v for g, v in zip(self.case.generators,
                                        self.records[i]["prev_gen"])}

    def realized_df_stacked(self, i: int) -> np.ndarray:
        return np.asarray(self.records[i]["realized_df"], dtype=float)

    def dera_cost(self, i: int) -> float:
        return float(self.records[i]["dera_cost"])
