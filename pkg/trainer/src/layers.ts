/**
 * Network layers on the autodiff tape, matching the inference-side
 * definitions exactly: gated temporal convolution, first-order graph
 * convolution with self-loops, edge-conditioned convolution with an
 * affine-ReLU-affine edge network, and the Chebyshev filter with the
 * spectral bound fixed at 2.
 */

import {
  Tape, Tensor, addBias, add, axpby, leftApply, matmul, relu,
} from "./tensor.js";

/** (H *t W) ⊙ sigmoid(H *t V); H is [T,N,C], kernels [K,C,Cout]. */
export function temporalGatedConv(
  tape: Tape, H: Tensor, W: Tensor, V: Tensor, bw: Tensor, bv: Tensor,
): Tensor {
  const [T, N, C] = H.shape;
  const [K, C2, Cout] = W.shape;
  if (C !== C2) throw new Error(`temporal kernel ${W.shape} vs input ${H.shape}`);
  if (T < K) throw new Error(`window ${T} shorter than kernel ${K}`);
  const Tout = T - K + 1;
  const lin = new Float64Array(Tout * N * Cout);
  const gate = new Float64Array(Tout * N * Cout);
  const hd = H.data, wd = W.data, vd = V.data;
  for (let t = 0; t < Tout; t++) {
    for (let n = 0; n < N; n++) {
      const oo = (t * N + n) * Cout;
      for (let co = 0; co < Cout; co++) {
        lin[oo + co] = bw.data[co];
        gate[oo + co] = bv.data[co];
      }
      for (let k = 0; k < K; k++) {
        const ho = ((t + k) * N + n) * C;
        for (let ci = 0; ci < C; ci++) {
          const hv = hd[ho + ci];
          if (hv === 0) continue;
          const ko = (k * C + ci) * Cout;
          for (let co = 0; co < Cout; co++) {
            lin[oo + co] += hv * wd[ko + co];
            gate[oo + co] += hv * vd[ko + co];
          }
        }
      }
    }
  }
  const out = Tensor.zeros([Tout, N, Cout], true);
  const sg = new Float64Array(Tout * N * Cout);
  for (let i = 0; i < sg.length; i++) {
    const x = gate[i];
    sg[i] = x >= 0 ? 1 / (1 + Math.exp(-x)) : Math.exp(x) / (1 + Math.exp(x));
    out.data[i] = lin[i] * sg[i];
  }
  tape.push(() => {
    const og = out.grad!;
    const dlin = new Float64Array(og.length);
    const dgate = new Float64Array(og.length);
    for (let i = 0; i < og.length; i++) {
      dlin[i] = og[i] * sg[i];
      dgate[i] = og[i] * lin[i] * sg[i] * (1 - sg[i]);
    }
    for (let t = 0; t < Tout; t++) {
      for (let n = 0; n < N; n++) {
        const oo = (t * N + n) * Cout;
        if (bw.grad) for (let co = 0; co < Cout; co++) bw.grad[co] += dlin[oo + co];
        if (bv.grad) for (let co = 0; co < Cout; co++) bv.grad[co] += dgate[oo + co];
        for (let k = 0; k < K; k++) {
          const ho = ((t + k) * N + n) * C;
          for (let ci = 0; ci < C; ci++) {
            const hv = hd[ho + ci];
            const ko = (k * C + ci) * Cout;
            let dh = 0;
            for (let co = 0; co < Cout; co++) {
              const dl = dlin[oo + co], dg = dgate[oo + co];
              if (W.grad) W.grad[ko + co] += hv * dl;
              if (V.grad) V.grad[ko + co] += hv * dg;
              dh += wd[ko + co] * dl + vd[ko + co] * dg;
            }
            if (H.grad) H.grad[ho + ci] += dh;
          }
        }
      }
    }
  });
  return out;
}

/** D^{-1/2} (A + I) D^{-1/2} as a dense fixed matrix. */
export function normalizedAdjacency(adj: number[][]): Float64Array {
  const n = adj.length;
  const out = new Float64Array(n * n);
  const deg = new Float64Array(n);
  for (let i = 0; i < n; i++) {
    deg[i] = 1;
    for (let j = 0; j < n; j++) deg[i] += adj[i][j];
  }
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const a = adj[i][j] + (i === j ? 1 : 0);
      if (a !== 0) out[i * n + j] = a / Math.sqrt(deg[i] * deg[j]);
    }
  }
  return out;
}

/** 2 L_norm / lambda_max - I with lambda_max fixed at 2.
 *
 *  With that bound the scaled Laplacian collapses to -D^{-1/2} A D^{-1/2}
 *  (isolated nodes contribute zero rows, matching the inference side).
 */
export function scaledLaplacian(adj: number[][]): Float64Array {
  const n = adj.length;
  const deg = new Float64Array(n);
  for (let i = 0; i < n; i++) for (let j = 0; j < n; j++) deg[i] += adj[i][j];
  const out = new Float64Array(n * n);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const norm = deg[i] > 0 && deg[j] > 0 ? 1 / Math.sqrt(deg[i] * deg[j]) : 0;
      out[i * n + j] = -adj[i][j] * norm;
    }
  }
  return out;
}

export function gcnLayer(tape: Tape, H: Tensor, anorm: Float64Array, W: Tensor): Tensor {
  const n = H.shape[0];
  return matmul(tape, leftApply(tape, anorm, n, H), W);
}

export interface EdgeMlp {
  W1: Tensor;
  b1: Tensor;
  W2: Tensor;
  b2: Tensor;
}

/** theta_e = affine(relu(affine(attr_e))) as an [E, Cin*Cout] tensor. */
export function edgeNetwork(tape: Tape, attr: Tensor, mlp: EdgeMlp): Tensor {
  const hidden = relu(tape, addBias(tape, matmul(tape, attr, mlp.W1), mlp.b1));
  return addBias(tape, matmul(tape, hidden, mlp.W2), mlp.b2);
}

/** Neighbour mixing out[i] += H[j] theta_e (both directions per edge). */
export function edgeMix(
  tape: Tape, H: Tensor, theta: Tensor, edges: number[][], cOut: number,
): Tensor {
  const [N, C] = H.shape;
  const out = Tensor.zeros([N, cOut], true);
  const hd = H.data, td = theta.data;
  edges.forEach(([i, j], e) => {
    const to = e * C * cOut;
    for (let ci = 0; ci < C; ci++) {
      const hj = hd[j * C + ci], hi = hd[i * C + ci];
      for (let co = 0; co < cOut; co++) {
        const th = td[to + ci * cOut + co];
        out.data[i * cOut + co] += hj * th;
        out.data[j * cOut + co] += hi * th;
      }
    }
  });
  tape.push(() => {
    const og = out.grad!;
    edges.forEach(([i, j], e) => {
      const to = e * C * cOut;
      for (let ci = 0; ci < C; ci++) {
        const hj = hd[j * C + ci], hi = hd[i * C + ci];
        for (let co = 0; co < cOut; co++) {
          const th = td[to + ci * cOut + co];
          const gi = og[i * cOut + co], gj = og[j * cOut + co];
          if (H.grad) {
            H.grad[j * C + ci] += th * gi;
            H.grad[i * C + ci] += th * gj;
          }
          if (theta.grad) theta.grad[to + ci * cOut + co] += hj * gi + hi * gj;
        }
      }
    });
  });
  return out;
}

export function ecConvLayer(
  tape: Tape, H: Tensor, edges: number[][], attr: Tensor, W: Tensor, mlp: EdgeMlp,
): Tensor {
  const theta = edgeNetwork(tape, attr, mlp);
  const self = matmul(tape, H, W);
  return add(tape, self, edgeMix(tape, H, theta, edges, W.shape[1]));
}

export function chebyshevLayer(
  tape: Tape, H: Tensor, lhat: Float64Array, weights: Tensor[],
): Tensor {
  const n = H.shape[0];
  let zPrev = H;
  let out = matmul(tape, H, weights[0]);
  if (weights.length > 1) {
    let z = leftApply(tape, lhat, n, H);
    out = add(tape, out, matmul(tape, z, weights[1]));
    for (let k = 2; k < weights.length; k++) {
      const zNext = axpby(tape, 2, leftApply(tape, lhat, n, z), -1, zPrev);
      zPrev = z;
      z = zNext;
      out = add(tape, out, matmul(tape, z, weights[k]));
    }
  }
  return out;
}
