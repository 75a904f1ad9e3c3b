/**
 * Minimal float64 tensors with reverse-mode autodiff.
 *
 * JS numbers are IEEE doubles, so plain loops over Float64Array give the
 * double-precision layer parity the inference side checks at 1e-10 —
 * something a float32 GPU framework cannot.  Ops push their backward
 * closure onto a tape; `backward()` replays it in reverse.
 */

export class Tensor {
  data: Float64Array;
  shape: number[];
  grad: Float64Array | null;

  constructor(data: Float64Array, shape: number[], requiresGrad = false) {
    const n = shape.reduce((a, b) => a * b, 1);
    if (data.length !== n) {
      throw new Error(`data length ${data.length} != shape ${shape} (${n})`);
    }
    this.data = data;
    this.shape = shape;
    this.grad = requiresGrad ? new Float64Array(n) : null;
  }

  static zeros(shape: number[], requiresGrad = false): Tensor {
    return new Tensor(new Float64Array(shape.reduce((a, b) => a * b, 1)), shape, requiresGrad);
  }

  static from(values: number[] | number[][] | number[][][], requiresGrad = false): Tensor {
    const shape: number[] = [];
    let cursor: unknown = values;
    while (Array.isArray(cursor)) {
      shape.push(cursor.length);
      cursor = cursor[0];
    }
    const flat = new Float64Array(shape.reduce((a, b) => a * b, 1));
    let i = 0;
    const walk = (v: unknown) => {
      if (Array.isArray(v)) v.forEach(walk);
      else flat[i++] = v as number;
    };
    walk(values);
    return new Tensor(flat, shape, requiresGrad);
  }

  get size(): number {
    return this.data.length;
  }

  ensureGrad(): Float64Array {
    if (!this.grad) this.grad = new Float64Array(this.size);
    return this.grad;
  }

  zeroGrad(): void {
    if (this.grad) this.grad.fill(0);
  }

  clone(): Tensor {
    return new Tensor(this.data.slice(), this.shape.slice(), false);
  }

  /** Nested-array view (tests and JSON fixtures). */
  toNested(): unknown {
    const build = (dim: number, offset: number): unknown => {
      if (dim === this.shape.length - 1) {
        return Array.from(this.data.subarray(offset, offset + this.shape[dim]));
      }
      const stride = this.shape.slice(dim + 1).reduce((a, b) => a * b, 1);
      return Array.from({ length: this.shape[dim] },
        (_, i) => build(dim + 1, offset + i * stride));
    };
    return this.shape.length === 0 ? this.data[0] : build(0, 0);
  }
}

export class Tape {
  private ops: Array<() => void> = [];

  push(backward: () => void): void {
    this.ops.push(backward);
  }

  backward(): void {
    for (let i = this.ops.length - 1; i >= 0; i--) this.ops[i]();
    this.ops.length = 0;
  }

  clear(): void {
    this.ops.length = 0;
  }
}

function sameShape(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

/** C[m,p] = A[m,n] @ B[n,p] */
export function matmul(tape: Tape, a: Tensor, b: Tensor): Tensor {
  const [m, n] = a.shape;
  const [n2, p] = b.shape;
  if (n !== n2) throw new Error(`matmul ${a.shape} x ${b.shape}`);
  const out = Tensor.zeros([m, p], true);
  const ad = a.data, bd = b.data, od = out.data;
  for (let i = 0; i < m; i++) {
    for (let k = 0; k < n; k++) {
      const av = ad[i * n + k];
      if (av === 0) continue;
      const bo = k * p, oo = i * p;
      for (let j = 0; j < p; j++) od[oo + j] += av * bd[bo + j];
    }
  }
  tape.push(() => {
    const og = out.grad!;
    if (a.grad) {
      const ag = a.grad;
      for (let i = 0; i < m; i++) {
        for (let k = 0; k < n; k++) {
          let s = 0;
          const bo = k * p, oo = i * p;
          for (let j = 0; j < p; j++) s += og[oo + j] * bd[bo + j];
          ag[i * n + k] += s;
        }
      }
    }
    if (b.grad) {
      const bg = b.grad;
      for (let k = 0; k < n; k++) {
        for (let i = 0; i < m; i++) {
          const av = ad[i * n + k];
          if (av === 0) continue;
          const oo = i * p, bo = k * p;
          for (let j = 0; j < p; j++) bg[bo + j] += av * og[oo + j];
        }
      }
    }
  });
  return out;
}

export function add(tape: Tape, a: Tensor, b: Tensor): Tensor {
  if (!sameShape(a.shape, b.shape)) throw new Error(`add ${a.shape} vs ${b.shape}`);
  const out = new Tensor(a.data.slice(), a.shape.slice(), true);
  for (let i = 0; i < out.size; i++) out.data[i] += b.data[i];
  tape.push(() => {
    const og = out.grad!;
    if (a.grad) for (let i = 0; i < og.length; i++) a.grad[i] += og[i];
    if (b.grad) for (let i = 0; i < og.length; i++) b.grad[i] += og[i];
  });
  return out;
}

/** Row-broadcast bias: A[m,n] + b[n]. */
export function addBias(tape: Tape, a: Tensor, bias: Tensor): Tensor {
  const n = bias.shape[0];
  if (a.shape[a.shape.length - 1] !== n) {
    throw new Error(`bias width ${n} vs ${a.shape}`);
  }
  const out = new Tensor(a.data.slice(), a.shape.slice(), true);
  for (let i = 0; i < out.size; i++) out.data[i] += bias.data[i % n];
  tape.push(() => {
    const og = out.grad!;
    if (a.grad) for (let i = 0; i < og.length; i++) a.grad[i] += og[i];
    if (bias.grad) for (let i = 0; i < og.length; i++) bias.grad[i % n] += og[i];
  });
  return out;
}

export function mul(tape: Tape, a: Tensor, b: Tensor): Tensor {
  if (!sameShape(a.shape, b.shape)) throw new Error(`mul ${a.shape} vs ${b.shape}`);
  const out = Tensor.zeros(a.shape.slice(), true);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] * b.data[i];
  tape.push(() => {
    const og = out.grad!;
    if (a.grad) for (let i = 0; i < og.length; i++) a.grad[i] += og[i] * b.data[i];
    if (b.grad) for (let i = 0; i < og.length; i++) b.grad[i] += og[i] * a.data[i];
  });
  return out;
}

export function sigmoid(tape: Tape, a: Tensor): Tensor {
  const out = Tensor.zeros(a.shape.slice(), true);
  for (let i = 0; i < out.size; i++) {
    const x = a.data[i];
    out.data[i] = x >= 0 ? 1 / (1 + Math.exp(-x)) : Math.exp(x) / (1 + Math.exp(x));
  }
  tape.push(() => {
    const og = out.grad!;
    if (a.grad) {
      for (let i = 0; i < og.length; i++) {
        const s = out.data[i];
        a.grad[i] += og[i] * s * (1 - s);
      }
    }
  });
  return out;
}

export function relu(tape: Tape, a: Tensor): Tensor {
  const out = Tensor.zeros(a.shape.slice(), true);
  for (let i = 0; i < out.size; i++) out.data[i] = a.data[i] > 0 ? a.data[i] : 0;
  tape.push(() => {
    const og = out.grad!;
    if (a.grad) {
      for (let i = 0; i < og.length; i++) if (a.data[i] > 0) a.grad[i] += og[i];
    }
  });
  return out;
}

/** Concatenate along the last axis (2-D tensors). */
export function concatCols(tape: Tape, a: Tensor, b: Tensor): Tensor {
  const [m, ca] = a.shape;
  const [m2, cb] = b.shape;
  if (m !== m2) throw new Error(`concat rows ${m} vs ${m2}`);
  const out = Tensor.zeros([m, ca + cb], true);
  for (let i = 0; i < m; i++) {
    out.data.set(a.data.subarray(i * ca, (i + 1) * ca), i * (ca + cb));
    out.data.set(b.data.subarray(i * cb, (i + 1) * cb), i * (ca + cb) + ca);
  }
  tape.push(() => {
    const og = out.grad!;
    for (let i = 0; i < m; i++) {
      if (a.grad) for (let j = 0; j < ca; j++) a.grad[i * ca + j] += og[i * (ca + cb) + j];
      if (b.grad) for (let j = 0; j < cb; j++) b.grad[i * cb + j] += og[i * (ca + cb) + ca + j];
    }
  });
  return out;
}

/** Rows of A[m,n] gathered into out[k,n]; rows may repeat. */
export function gatherRows(tape: Tape, a: Tensor, rows: number[]): Tensor {
  const [m, n] = a.shape;
  const out = Tensor.zeros([rows.length, n], true);
  rows.forEach((r, i) => out.data.set(a.data.subarray(r * n, (r + 1) * n), i * n));
  tape.push(() => {
    const og = out.grad!;
    if (a.grad) {
      rows.forEach((r, i) => {
        for (let j = 0; j < n; j++) a.grad![r * n + j] += og[i * n + j];
      });
    }
  });
  return out;
}

/** Pick single elements out[i] = A[row[i], col[i]]. */
export function gatherElems(tape: Tape, a: Tensor, rows: number[], cols: number[]): Tensor {
  const [, n] = a.shape;
  const out = Tensor.zeros([rows.length], true);
  for (let i = 0; i < rows.length; i++) out.data[i] = a.data[rows[i] * n + cols[i]];
  tape.push(() => {
    const og = out.grad!;
    if (a.grad) {
      for (let i = 0; i < rows.length; i++) a.grad[rows[i] * n + cols[i]] += og[i];
    }
  });
  return out;
}

/** Fixed (non-learned) matrix applied from the left: out = M @ A. */
export function leftApply(tape: Tape, m: Float64Array, rows: number, a: Tensor): Tensor {
  const [n, c] = a.shape;
  if (m.length !== rows * n) throw new Error("leftApply size mismatch");
  const out = Tensor.zeros([rows, c], true);
  for (let i = 0; i < rows; i++) {
    for (let k = 0; k < n; k++) {
      const mv = m[i * n + k];
      if (mv === 0) continue;
      for (let j = 0; j < c; j++) out.data[i * c + j] += mv * a.data[k * c + j];
    }
  }
  tape.push(() => {
    const og = out.grad!;
    if (a.grad) {
      for (let k = 0; k < n; k++) {
        for (let i = 0; i < rows; i++) {
          const mv = m[i * n + k];
          if (mv === 0) continue;
          for (let j = 0; j < c; j++) a.grad[k * c + j] += mv * og[i * c + j];
        }
      }
    }
  });
  return out;
}

/** out = alpha * a + beta * b (elementwise, same shape). */
export function axpby(tape: Tape, alpha: number, a: Tensor, beta: number, b: Tensor): Tensor {
  if (!sameShape(a.shape, b.shape)) throw new Error("axpby shape mismatch");
  const out = Tensor.zeros(a.shape.slice(), true);
  for (let i = 0; i < out.size; i++) out.data[i] = alpha * a.data[i] + beta * b.data[i];
  tape.push(() => {
    const og = out.grad!;
    if (a.grad) for (let i = 0; i < og.length; i++) a.grad[i] += alpha * og[i];
    if (b.grad) for (let i = 0; i < og.length; i++) b.grad[i] += beta * og[i];
  });
  return out;
}
