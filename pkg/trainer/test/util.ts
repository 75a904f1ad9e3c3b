/** Shared test helpers: tiny random windows and instances. */

import { Hyper, Model, WindowTensors, initParams } from "../src/model.js";
import { Instance } from "../src/window.js";

export function mulberry(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function tinyHyper(overrides: Partial<Hyper> = {}): Hyper {
  return {
    window: 12,
    temporal_kernel: 3,
    st_channels: [6, 4, 6],
    st_embed: 5,
    ec_channels: [4, 4],
    ec_hidden: 4,
    ec_embed: 3,
    cheb_k: 2,
    fa_channels: 5,
    tder_slots: 1,
    ...overrides,
  };
}

export function ringAdjacency(n: number): number[][] {
  const a: number[][] = Array.from({ length: n }, () => new Array(n).fill(0));
  for (let i = 0; i < n; i++) {
    a[i][(i + 1) % n] = 1;
    a[(i + 1) % n][i] = 1;
  }
  return a;
}

export function randomWindow(seed: number, n = 4, m = 12, slots = 1): WindowTensors {
  const rng = mulberry(seed);
  const adjacency = ringAdjacency(n);
  const edgeIndex: number[][] = [];
  for (let i = 0; i < n; i++) edgeIndex.push([i, (i + 1) % n]);
  return {
    loadDer: Array.from({ length: m }, () =>
      Array.from({ length: n }, () =>
        Array.from({ length: 1 + slots }, () => rng() * 10))),
    adjacency,
    genFeat: Array.from({ length: n }, () =>
      Array.from({ length: 25 }, () => rng() * 4 - 2)),
    edgeIndex,
    edgeAttr: edgeIndex.map(() => Array.from({ length: 4 }, () => rng() * 2)),
    tderSlots: [[1, 0], [3, 0]],
  };
}

export function randomInstance(seed: number): Instance {
  const rng = mulberry(seed + 999);
  const raw = [rng() + 0.1, rng() + 0.1];
  const sum = raw[0] + raw[1];
  return {
    window: randomWindow(seed),
    target: [raw[0] / sum, raw[1] / sum],
    deraCost: 50 + rng() * 100,
    t: seed,
  };
}

export function tinyModel(seed = 7): Model {
  const hyper = tinyHyper();
  return new Model(hyper, initParams(hyper, 2, seed));
}
