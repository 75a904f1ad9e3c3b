/**
 * Layer parity against the shared randomized vectors checked into the
 * repository (expected values computed by loop-based references, not by
 * either implementation under test); double precision at 1e-10.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import {
  chebyshevLayer, ecConvLayer, gcnLayer, normalizedAdjacency, scaledLaplacian,
  temporalGatedConv,
} from "../src/layers.js";
import { Tape, Tensor } from "../src/tensor.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const VECTORS = JSON.parse(fs.readFileSync(
  path.join(HERE, "..", "..", "tests", "fixtures", "layer_vectors.json"), "utf-8"));

function maxAbsDiff(got: Tensor, expected: number[][] | number[][][]): number {
  const flat: number[] = [];
  const walk = (v: unknown) => {
    if (Array.isArray(v)) v.forEach(walk);
    else flat.push(v as number);
  };
  walk(expected);
  let worst = 0;
  for (let i = 0; i < flat.length; i++) {
    worst = Math.max(worst, Math.abs(got.data[i] - flat[i]));
  }
  return worst;
}

describe("shared layer vectors", () => {
  const tol = VECTORS.tolerance as number;

  for (const [idx, v] of (VECTORS.vectors as any[]).entries()) {
    it(`vector ${idx} (${v.layer})`, () => {
      const tape = new Tape();
      let got: Tensor;
      if (v.layer === "glu") {
        got = temporalGatedConv(tape, Tensor.from(v.H), Tensor.from(v.W),
          Tensor.from(v.V), Tensor.from(v.bw), Tensor.from(v.bv));
      } else if (v.layer === "gcn") {
        got = gcnLayer(tape, Tensor.from(v.H), normalizedAdjacency(v.A),
          Tensor.from(v.W));
      } else if (v.layer === "ecc") {
        got = ecConvLayer(tape, Tensor.from(v.H), v.edges, Tensor.from(v.attr),
          Tensor.from(v.W), {
            W1: Tensor.from(v.mlp_w1), b1: Tensor.from(v.mlp_b1),
            W2: Tensor.from(v.mlp_w2), b2: Tensor.from(v.mlp_b2),
          });
      } else {
        got = chebyshevLayer(tape, Tensor.from(v.H), scaledLaplacian(v.A),
          (v.weights as number[][][]).map((w) => Tensor.from(w)));
      }
      expect(maxAbsDiff(got, v.expected)).toBeLessThanOrEqual(tol);
    });
  }
});
