/**
 * Graph-window construction from ledger records.
 *
 * Must agree bit-for-bit with the inference side: frame f of the window
 * for record i pairs the demand of record i-M+1+f with the member
 * outputs of record i-M+f (one-step reporting lag; the newest frame uses
 * record i's demand), generator features accumulate per bus, and each
 * aggregator's bid block is duplicated across its member buses.
 */

import {
  adjacency, CaseSkeleton, Ledger, LedgerRecord, tderSlotMap,
} from "./ledger.js";
import { GEN_FEATURE_WIDTH, WindowTensors } from "./model.js";

const BID_SEGMENTS = 5;

function bidFeatures(rows: number[][] | undefined): number[] {
  const out = new Array(2 * BID_SEGMENTS).fill(0);
  if (rows) {
    rows.slice(0, BID_SEGMENTS).forEach((seg, i) => {
      out[2 * i] = seg[0];      // price slope
      out[2 * i + 1] = seg[1];  // intercept
    });
  }
  return out;
}

export function buildWindow(
  skel: CaseSkeleton, records: LedgerRecord[], i: number, window: number,
  tderSlots: number,
): WindowTensors {
  if (i < window) throw new Error(`record ${i} lacks ${window} predecessors`);
  const n = skel.bus_ids.length;
  const busIndex = new Map(skel.bus_ids.map((b, k) => [b, k]));
  const slots = tderSlotMap(skel);
  const maxSlot = Math.max(0, ...slots.map(([, s]) => s));
  if (maxSlot >= tderSlots) throw new Error("more T-DERs per bus than slots");
  const feat = 1 + tderSlots;
  const rec = records[i];

  const loadDer: number[][][] = [];
  for (let f = 0; f < window; f++) {
    const tauLoads = f === window - 1 ? rec.loads : records[i - window + 1 + f].loads;
    const lagged = records[i - window + f];
    const frame: number[][] = Array.from({ length: n },
      () => new Array(feat).fill(0));
    for (let b = 0; b < n; b++) frame[b][0] = tauLoads[b];
    slots.forEach(([b, s], e) => {
      frame[b][1 + s] = lagged.p_tder[e];
    });
    loadDer.push(frame);
  }

  const genFeat: number[][] = Array.from({ length: n },
    () => new Array(GEN_FEATURE_WIDTH).fill(0));
  skel.generators.forEach((g, gi) => {
    const b = busIndex.get(g.bus)!;
    const bids = bidFeatures(rec.gen_bids[gi]);
    for (let k = 0; k < 10; k++) genFeat[b][k] += bids[k];
    genFeat[b][20] += g.ramp_down;
    genFeat[b][21] += g.ramp_up;
    genFeat[b][22] += g.p_max;
    genFeat[b][23] += g.p_min;
    genFeat[b][24] += rec.prev_gen[gi];
  });
  skel.deras.forEach((a, ai) => {
    const bids = bidFeatures(rec.dera_bids[ai]);
    const buses = new Set(a.tders.map((e) => busIndex.get(e.bus)!));
    for (const b of buses) {
      for (let k = 0; k < 10; k++) genFeat[b][10 + k] = bids[k];
    }
  });

  const edgeIndex = skel.lines.map((l) => [busIndex.get(l.from)!, busIndex.get(l.to)!]);
  const edgeAttr = skel.lines.map((l) => [l.fmax, l.fmin, l.x, l.b]);
  return {
    loadDer,
    adjacency: adjacency(skel),
    genFeat,
    edgeIndex,
    edgeAttr,
    tderSlots: slots,
  };
}

export interface Instance {
  window: WindowTensors;
  target: number[];     // realized per-member factors, case order
  deraCost: number;     // aggregate bid cost in the clearing objective
  t: number;
}

export function buildInstances(
  ledger: Ledger, window: number, tderSlots: number,
): Instance[] {
  const out: Instance[] = [];
  const { meta, records } = ledger;
  if (records.length <= window) {
    throw new Error(
      `ledger has ${records.length} records, needs more than ${window}`);
  }
  for (let i = window; i < records.length; i++) {
    out.push({
      window: buildWindow(meta.case, records, i, window, tderSlots),
      target: records[i].realized_df,
      deraCost: records[i].dera_cost,
      t: records[i].t,
    });
  }
  return out;
}
