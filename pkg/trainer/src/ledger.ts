/**
 * Reader for the dispatch run ledger: meta.json (case skeleton, run
 * parameters) plus records.jsonl (one settled interval per line).
 */

import * as fs from "node:fs";
import * as path from "node:path";

export interface LedgerLine {
  id: number;
  from: number;
  to: number;
  x: number;
  b: number;
  fmax: number;
  fmin: number;
}

export interface LedgerGen {
  id: number;
  bus: number;
  p_min: number;
  p_max: number;
  ramp_up: number;
  ramp_down: number;
}

export interface LedgerTder {
  id: string;
  bus: number;
  p_min: number;
  p_max: number;
}

export interface LedgerDera {
  id: string;
  tders: LedgerTder[];
}

export interface CaseSkeleton {
  name: string;
  bus_ids: number[];
  reference_bus: number;
  lines: LedgerLine[];
  generators: LedgerGen[];
  loads: Array<{ bus: number; mw: number }>;
  deras: LedgerDera[];
}

export interface LedgerMeta {
  version: number;
  case: CaseSkeleton;
  strategy?: string;
  interval_minutes?: number;
  penalty_price?: number;
}

export interface LedgerRecord {
  t: number;
  loads: number[];
  p_gen: number[];
  prev_gen: number[];
  instructions: number[];
  p_tder: number[];
  realized_df: number[];
  gen_bids: number[][][];   // per gen: segments of [kappa, beta, q_lo, q_hi]
  dera_bids: number[][][];
  dera_cost: number;
  realized_cost: number;
  df_accuracy: number;
}

export interface Ledger {
  meta: LedgerMeta;
  records: LedgerRecord[];
}

export function readLedger(dir: string): Ledger {
  const meta = JSON.parse(
    fs.readFileSync(path.join(dir, "meta.json"), "utf-8")) as LedgerMeta;
  if (meta.version !== 1) {
    throw new Error(`unknown ledger version ${meta.version}`);
  }
  const lines = fs.readFileSync(path.join(dir, "records.jsonl"), "utf-8")
    .split("\n").filter((l) => l.trim().length > 0);
  const records = lines.map((l) => JSON.parse(l) as LedgerRecord);
  records.sort((a, b) => a.t - b.t);
  return { meta, records };
}

/** (busIndex, slot) per T-DER in case order; slots count up per bus. */
export function tderSlotMap(skel: CaseSkeleton): number[][] {
  const busIndex = new Map(skel.bus_ids.map((b, i) => [b, i]));
  const used = new Map<number, number>();
  const out: number[][] = [];
  for (const dera of skel.deras) {
    for (const e of dera.tders) {
      const b = busIndex.get(e.bus)!;
      const s = used.get(b) ?? 0;
      out.push([b, s]);
      used.set(b, s + 1);
    }
  }
  return out;
}

export function adjacency(skel: CaseSkeleton): number[][] {
  const n = skel.bus_ids.length;
  const busIndex = new Map(skel.bus_ids.map((b, i) => [b, i]));
  const a: number[][] = Array.from({ length: n }, () => new Array(n).fill(0));
  for (const l of skel.lines) {
    const i = busIndex.get(l.from)!;
    const j = busIndex.get(l.to)!;
    if (i !== j) {
      a[i][j] = 1;
      a[j][i] = 1;
    }
  }
  return a;
}
