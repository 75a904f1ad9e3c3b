/**
 * Training loop: cost-weighted squared error on normalized member
 * outputs, adaptive-moment updates, chronological train/test split, and
 * best-on-test checkpointing.
 */

import { Model, Stats, forward, GEN_FEATURE_WIDTH, EDGE_FEATURE_WIDTH } from "./model.js";
import { Tape, Tensor } from "./tensor.js";
import { Instance } from "./window.js";

export interface TrainOptions {
  epochs: number;
  lr: number;
  batchSize: number;
  lambda: number;        // cost-weighting coefficient in the loss
  seed: number;
  testFraction: number;  // chronological tail reserved for testing
  logEvery?: number;
}

export const DEFAULT_OPTIONS: TrainOptions = {
  epochs: 100,
  lr: 1e-3,
  batchSize: 32,
  lambda: 0.0,
  seed: 1,
  testFraction: 0.25,
};

export interface EpochStat {
  epoch: number;
  trainLoss: number;
  testLoss: number;
}

export interface TrainReport {
  epochs: EpochStat[];
  bestEpoch: number;
  bestTestLoss: number;
  trainCount: number;
  testCount: number;
  diverged: boolean;
}

export function instanceLoss(model: Model, inst: Instance, lambda: number,
  tape?: Tape): number {
  const pred = forward(model, inst.window, tape);
  const weight = Math.exp(lambda * inst.deraCost);
  let loss = 0;
  const g = pred.ensureGrad();
  for (let i = 0; i < pred.size; i++) {
    const r = pred.data[i] - inst.target[i];
    loss += weight * r * r;
    g[i] = 2 * weight * r;   // seed for the backward pass
  }
  return loss;
}

export function datasetLoss(model: Model, data: Instance[], lambda: number): number {
  if (data.length === 0) return 0;
  let total = 0;
  for (const inst of data) total += instanceLoss(model, inst, lambda);
  return total / data.length;
}

/** Per-feature mean/std over the training windows (population std). */
export function computeStats(data: Instance[]): Stats {
  const ldW = data[0].window.loadDer[0][0].length;
  const acc = {
    load: { n: 0, sum: new Float64Array(ldW), sq: new Float64Array(ldW) },
    gen: { n: 0, sum: new Float64Array(GEN_FEATURE_WIDTH), sq: new Float64Array(GEN_FEATURE_WIDTH) },
    edge: { n: 0, sum: new Float64Array(EDGE_FEATURE_WIDTH), sq: new Float64Array(EDGE_FEATURE_WIDTH) },
  };
  for (const inst of data) {
    for (const frame of inst.window.loadDer) {
      for (const row of frame) {
        acc.load.n += 1;
        row.forEach((v, c) => { acc.load.sum[c] += v; acc.load.sq[c] += v * v; });
      }
    }
    for (const row of inst.window.genFeat) {
      acc.gen.n += 1;
      row.forEach((v, c) => { acc.gen.sum[c] += v; acc.gen.sq[c] += v * v; });
    }
    for (const row of inst.window.edgeAttr) {
      acc.edge.n += 1;
      row.forEach((v, c) => { acc.edge.sum[c] += v; acc.edge.sq[c] += v * v; });
    }
  }
  const finish = (a: { n: number; sum: Float64Array; sq: Float64Array }) => {
    const mean = Array.from(a.sum, (s) => s / Math.max(a.n, 1));
    const std = Array.from(a.sq, (s, c) => {
      const v = s / Math.max(a.n, 1) - mean[c] * mean[c];
      return Math.sqrt(Math.max(v, 0));
    });
    return { mean, std };
  };
  const load = finish(acc.load);
  const gen = finish(acc.gen);
  const edge = finish(acc.edge);
  return {
    "load_der.mean": load.mean, "load_der.std": load.std,
    "gen.mean": gen.mean, "gen.std": gen.std,
    "edge.mean": edge.mean, "edge.std": edge.std,
  };
}

export function chronologicalSplit(data: Instance[], testFraction: number) {
  const nTest = Math.floor(data.length * testFraction);
  return {
    train: data.slice(0, data.length - nTest),
    test: data.slice(data.length - nTest),
  };
}

class Adam {
  private m = new Map<string, Float64Array>();
  private v = new Map<string, Float64Array>();
  private step = 0;

  constructor(private lr: number, private beta1 = 0.9, private beta2 = 0.999,
    private eps = 1e-8) {}

  update(params: Array<[string, Tensor]>): void {
    this.step += 1;
    const c1 = 1 - Math.pow(this.beta1, this.step);
    const c2 = 1 - Math.pow(this.beta2, this.step);
    for (const [name, p] of params) {
      if (!p.grad) continue;
      let m = this.m.get(name);
      let v = this.v.get(name);
      if (!m) { m = new Float64Array(p.size); this.m.set(name, m); }
      if (!v) { v = new Float64Array(p.size); this.v.set(name, v); }
      for (let i = 0; i < p.size; i++) {
        const g = p.grad[i];
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g;
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g * g;
        p.data[i] -= this.lr * (m[i] / c1) / (Math.sqrt(v[i] / c2) + this.eps);
      }
    }
  }
}

function mulberry(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function train(model: Model, data: Instance[],
  options: Partial<TrainOptions> = {}): TrainReport {
  const opt = { ...DEFAULT_OPTIONS, ...options };
  const { train: trainSet, test: testSet } = chronologicalSplit(data, opt.testFraction);
  if (trainSet.length === 0) throw new Error("empty training set");
  const adam = new Adam(opt.lr);
  const rng = mulberry(opt.seed);
  const params = model.trainables();
  const epochs: EpochStat[] = [];
  let bestTestLoss = Number.POSITIVE_INFINITY;
  let bestEpoch = -1;
  let best: Map<string, Float64Array> | null = null;

  for (let epoch = 0; epoch < opt.epochs; epoch++) {
    const order = trainSet.map((_, i) => i);
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(rng() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let running = 0;
    for (let start = 0; start < order.length; start += opt.batchSize) {
      const batch = order.slice(start, start + opt.batchSize);
      for (const [, p] of params) p.zeroGrad();
      const tape = new Tape();
      for (const bi of batch) {
        running += instanceLoss(model, trainSet[bi], opt.lambda, tape);
      }
      tape.backward();
      const scale = 1 / batch.length;
      for (const [, p] of params) {
        if (p.grad) for (let i = 0; i < p.size; i++) p.grad[i] *= scale;
      }
      adam.update(params);
    }
    const trainLoss = running / trainSet.length;
    if (!Number.isFinite(trainLoss)) {
      // abort but leave the model at the last finite checkpoint
      console.error(`training diverged at epoch ${epoch}; `
        + `restoring checkpoint from epoch ${bestEpoch}`);
      if (best) for (const [n, p] of params) p.data.set(best.get(n)!);
      return {
        epochs, bestEpoch, bestTestLoss,
        trainCount: trainSet.length, testCount: testSet.length,
        diverged: true,
      };
    }
    const testLoss = testSet.length ? datasetLoss(model, testSet, opt.lambda) : trainLoss;
    epochs.push({ epoch, trainLoss, testLoss });
    if (testLoss < bestTestLoss) {
      bestTestLoss = testLoss;
      bestEpoch = epoch;
      best = new Map(params.map(([n, p]) => [n, p.data.slice()]));
    }
    if (opt.logEvery && epoch % opt.logEvery === 0) {
      console.log(`epoch ${epoch}: train ${trainLoss.toExponential(4)} `
        + `test ${testLoss.toExponential(4)}`);
    }
  }
  if (best) {
    for (const [n, p] of params) p.data.set(best.get(n)!);
  }
  return {
    epochs, bestEpoch, bestTestLoss,
    trainCount: trainSet.length, testCount: testSet.length,
    diverged: false,
  };
}

/** Clamp negatives and renormalize onto the factor simplex (zeros kept). */
export function projectSimplex(raw: number[]): number[] {
  const v = raw.map((x) => (x > 0 ? x : 0));
  const s = v.reduce((a, b) => a + b, 0);
  if (!(s > 0) || !Number.isFinite(s)) return v.map(() => 1 / v.length);
  const out = v.map((x) => x / s);
  let imax = 0;
  for (let i = 1; i < out.length; i++) if (out[i] > out[imax]) imax = i;
  out[imax] += 1 - out.reduce((a, b) => a + b, 0);
  return out;
}
