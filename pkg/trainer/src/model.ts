/**
 * The dual-graph factor-prediction network: parameter registry, shape
 * plan, and forward pass.  Tensor names, shapes, activation placement,
 * and flattening orders mirror the inference side exactly; the shared
 * weight-file format carries them across.
 */

import {
  chebyshevLayer, ecConvLayer, gcnLayer, normalizedAdjacency, scaledLaplacian,
  temporalGatedConv, EdgeMlp,
} from "./layers.js";
import { Tape, Tensor, addBias, concatCols, gatherElems, matmul, relu } from "./tensor.js";

export interface Hyper {
  window: number;
  temporal_kernel: number;
  st_channels: [number, number, number];
  st_embed: number;
  ec_channels: [number, number];
  ec_hidden: number;
  ec_embed: number;
  cheb_k: number;
  fa_channels: number;
  tder_slots: number;
}

export const GEN_FEATURE_WIDTH = 25;
export const EDGE_FEATURE_WIDTH = 4;

export interface WindowTensors {
  loadDer: number[][][];     // [M][N][F]
  adjacency: number[][];     // [N][N]
  genFeat: number[][];       // [N][25]
  edgeIndex: number[][];     // [E][2]
  edgeAttr: number[][];      // [E][4]
  tderSlots: number[][];     // [(busIndex, slot)] per T-DER
}

export interface Stats {
  [key: string]: number[];
}

export function expectedShapes(h: Hyper, loadFeat: number): Map<string, number[]> {
  const [c1, c2, c3] = h.st_channels;
  const k = h.temporal_kernel;
  const shapes = new Map<string, number[]>();
  const widths: Array<[number, number]> = [
    [loadFeat, c1], [c2, c3], [c3, c1], [c2, c3],
  ];
  for (const b of [1, 2]) {
    const [win1, wout1] = widths[2 * (b - 1)];
    shapes.set(`st${b}.t1.W`, [k, win1, wout1]);
    shapes.set(`st${b}.t1.V`, [k, win1, wout1]);
    shapes.set(`st${b}.t1.bw`, [wout1]);
    shapes.set(`st${b}.t1.bv`, [wout1]);
    shapes.set(`st${b}.gcn.W`, [c1, c2]);
    const [win2, wout2] = widths[2 * (b - 1) + 1];
    shapes.set(`st${b}.t2.W`, [k, win2, wout2]);
    shapes.set(`st${b}.t2.V`, [k, win2, wout2]);
    shapes.set(`st${b}.t2.bw`, [wout2]);
    shapes.set(`st${b}.t2.bv`, [wout2]);
  }
  const tRem = h.window - 4 * (k - 1);
  if (tRem < 1) throw new Error(`window ${h.window} too short for kernel ${k}`);
  shapes.set("st.fc.W", [tRem * c3, h.st_embed]);
  shapes.set("st.fc.b", [h.st_embed]);
  const [e1, e2] = h.ec_channels;
  shapes.set("ec1.W", [GEN_FEATURE_WIDTH, e1]);
  shapes.set("ec1.mlp.W1", [EDGE_FEATURE_WIDTH, h.ec_hidden]);
  shapes.set("ec1.mlp.b1", [h.ec_hidden]);
  shapes.set("ec1.mlp.W2", [h.ec_hidden, GEN_FEATURE_WIDTH * e1]);
  shapes.set("ec1.mlp.b2", [GEN_FEATURE_WIDTH * e1]);
  shapes.set("ec2.W", [e1, e2]);
  shapes.set("ec2.mlp.W1", [EDGE_FEATURE_WIDTH, h.ec_hidden]);
  shapes.set("ec2.mlp.b1", [h.ec_hidden]);
  shapes.set("ec2.mlp.W2", [h.ec_hidden, e1 * e2]);
  shapes.set("ec2.mlp.b2", [e1 * e2]);
  shapes.set("ec.fc.W", [e2, h.ec_embed]);
  shapes.set("ec.fc.b", [h.ec_embed]);
  const fused = h.st_embed + h.ec_embed;
  for (let kk = 1; kk <= h.cheb_k; kk++) shapes.set(`fa.cheb.W${kk}`, [fused, h.fa_channels]);
  shapes.set("fa.fc.W", [h.fa_channels, h.tder_slots]);
  shapes.set("fa.fc.b", [h.tder_slots]);
  return shapes;
}

/** Deterministic He-style init from a 64-bit splitmix stream. */
export function initParams(h: Hyper, loadFeat: number, seed: number): Map<string, Tensor> {
  let state = BigInt(seed) & 0xffffffffffffffffn;
  const next = () => {
    state = (state + 0x9e3779b97f4a7c15n) & 0xffffffffffffffffn;
    let z = state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & 0xffffffffffffffffn;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & 0xffffffffffffffffn;
    z = z ^ (z >> 31n);
    return Number(z >> 11n) / 9007199254740992; // [0, 1)
  };
  const gauss = () => {
    const u = Math.max(next(), 1e-12);
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * next());
  };
  const params = new Map<string, Tensor>();
  for (const [name, shape] of expectedShapes(h, loadFeat)) {
    const t = Tensor.zeros(shape, true);
    if (!/\.(b|b1|b2|bw|bv)$/.test(name)) {
      const fanIn = shape.length === 1 ? shape[0] : shape.slice(0, -1).reduce((a, b) => a * b, 1);
      const scale = 0.5 / Math.sqrt(Math.max(fanIn, 1));
      for (let i = 0; i < t.size; i++) t.data[i] = gauss() * scale;
    }
    params.set(name, t);
  }
  return params;
}

export class Model {
  constructor(
    public hyper: Hyper,
    public params: Map<string, Tensor>,
    public stats: Stats = {},
  ) {}

  param(name: string): Tensor {
    const t = this.params.get(name);
    if (!t) throw new Error(`model lacks tensor ${name}`);
    return t;
  }

  trainables(): Array<[string, Tensor]> {
    return Array.from(this.params.entries());
  }
}

function standardize(values: number[], mean?: number[], std?: number[]): number[] {
  if (!mean || !std) return values;
  const w = mean.length;
  return values.map((v, i) => {
    const c = i % w;
    return (v - mean[c]) / (std[c] > 0 ? std[c] : 1);
  });
}

/** Flatten + standardize window inputs; fixed matrices precomputed. */
export function prepareInputs(model: Model, w: WindowTensors) {
  const M = w.loadDer.length;
  const N = w.adjacency.length;
  const F = w.loadDer[0][0].length;
  const flatLd = standardize(w.loadDer.flat(2) as number[],
    model.stats["load_der.mean"], model.stats["load_der.std"]);
  const flatGen = standardize(w.genFeat.flat() as number[],
    model.stats["gen.mean"], model.stats["gen.std"]);
  const flatEdge = standardize(w.edgeAttr.flat() as number[],
    model.stats["edge.mean"], model.stats["edge.std"]);
  return {
    loadDer: new Tensor(Float64Array.from(flatLd), [M, N, F]),
    genFeat: new Tensor(Float64Array.from(flatGen), [N, GEN_FEATURE_WIDTH]),
    edgeAttr: new Tensor(Float64Array.from(flatEdge),
      [w.edgeIndex.length, EDGE_FEATURE_WIDTH]),
    anorm: normalizedAdjacency(w.adjacency),
    lhat: scaledLaplacian(w.adjacency),
    N,
  };
}

/** Per-frame GCN + ReLU inside an ST block, preserving [T,N,C] layout. */
function frameGcn(tape: Tape, x: Tensor, anorm: Float64Array, W: Tensor): Tensor {
  const [T, N, C] = x.shape;
  const cOut = W.shape[1];
  const out = Tensor.zeros([T, N, cOut], true);
  const frames: Tensor[] = [];
  // the tape replays LIFO: pushing the frame->x merge first makes it run
  // last, after every per-frame backward has filled frames[t].grad
  tape.push(() => {
    for (let t = 0; t < T; t++) {
      if (x.grad) {
        const fg = frames[t].grad;
        if (fg) for (let i = 0; i < N * C; i++) x.grad[t * N * C + i] += fg[i];
      }
    }
  });
  for (let t = 0; t < T; t++) {
    const frame = new Tensor(x.data.slice(t * N * C, (t + 1) * N * C), [N, C], true);
    const y = relu(tape, gcnLayer(tape, frame, anorm, W));
    frames.push(frame);
    out.data.set(y.data, t * N * cOut);
    tape.push(() => {
      const g = y.ensureGrad();
      const og = out.grad!.subarray(t * N * cOut, (t + 1) * N * cOut);
      for (let i = 0; i < g.length; i++) g[i] += og[i];
    });
  }
  return out;
}

export function forward(model: Model, w: WindowTensors, tape?: Tape): Tensor {
  const t = tape ?? new Tape();
  const h = model.hyper;
  const inp = prepareInputs(model, w);
  if (w.loadDer.length !== h.window) {
    throw new Error(`window has ${w.loadDer.length} frames, model wants ${h.window}`);
  }

  let x = inp.loadDer;
  for (const b of [1, 2]) {
    x = temporalGatedConv(t, x, model.param(`st${b}.t1.W`), model.param(`st${b}.t1.V`),
      model.param(`st${b}.t1.bw`), model.param(`st${b}.t1.bv`));
    x = frameGcn(t, x, inp.anorm, model.param(`st${b}.gcn.W`));
    x = temporalGatedConv(t, x, model.param(`st${b}.t2.W`), model.param(`st${b}.t2.V`),
      model.param(`st${b}.t2.bw`), model.param(`st${b}.t2.bv`));
  }
  // [T,N,C] -> [N, T*C], time-major per node (row-major over (t, c))
  const [tRem, N, c3] = x.shape;
  const flat = Tensor.zeros([N, tRem * c3], true);
  for (let tt = 0; tt < tRem; tt++) {
    for (let n = 0; n < N; n++) {
      flat.data.set(x.data.subarray((tt * N + n) * c3, (tt * N + n + 1) * c3),
        n * tRem * c3 + tt * c3);
    }
  }
  t.push(() => {
    if (x.grad) {
      for (let tt = 0; tt < tRem; tt++) {
        for (let n = 0; n < N; n++) {
          for (let cc = 0; cc < c3; cc++) {
            x.grad[(tt * N + n) * c3 + cc] += flat.grad![n * tRem * c3 + tt * c3 + cc];
          }
        }
      }
    }
  });
  const stEmbed = relu(t, addBias(t, matmul(t, flat, model.param("st.fc.W")),
    model.param("st.fc.b")));

  const mlp1: EdgeMlp = {
    W1: model.param("ec1.mlp.W1"), b1: model.param("ec1.mlp.b1"),
    W2: model.param("ec1.mlp.W2"), b2: model.param("ec1.mlp.b2"),
  };
  const mlp2: EdgeMlp = {
    W1: model.param("ec2.mlp.W1"), b1: model.param("ec2.mlp.b1"),
    W2: model.param("ec2.mlp.W2"), b2: model.param("ec2.mlp.b2"),
  };
  let y = relu(t, ecConvLayer(t, inp.genFeat, w.edgeIndex, inp.edgeAttr,
    model.param("ec1.W"), mlp1));
  y = relu(t, ecConvLayer(t, y, w.edgeIndex, inp.edgeAttr, model.param("ec2.W"), mlp2));
  const ecEmbed = relu(t, addBias(t, matmul(t, y, model.param("ec.fc.W")),
    model.param("ec.fc.b")));

  const fused = concatCols(t, stEmbed, ecEmbed);
  const chebW: Tensor[] = [];
  for (let kk = 1; kk <= h.cheb_k; kk++) chebW.push(model.param(`fa.cheb.W${kk}`));
  const z = relu(t, chebyshevLayer(t, fused, inp.lhat, chebW));
  const scores = addBias(t, matmul(t, z, model.param("fa.fc.W")), model.param("fa.fc.b"));
  return gatherElems(t, scores,
    w.tderSlots.map(([b]) => b), w.tderSlots.map(([, s]) => s));
}
