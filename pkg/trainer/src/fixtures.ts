/**
 * Forward-parity fixtures for the inference-side test suite: window
 * tensors, the exported (float32-quantized) weights, and expected scores
 * computed by THIS implementation after reloading those weights, so both
 * sides evaluate the identical quantized model.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { forward } from "./model.js";
import { Instance } from "./window.js";
import { loadModel, saveModel } from "./weights.js";
import type { Model } from "./model.js";

export const FIXTURE_TOLERANCE = 1e-5;

export function emitFixtures(
  model: Model, instances: Instance[], outDir: string, count: number,
): string {
  fs.mkdirSync(outDir, { recursive: true });
  const manifestPath = path.join(outDir, "model.json");
  saveModel(model, manifestPath);
  const quantized = loadModel(manifestPath);

  const step = Math.max(1, Math.floor(instances.length / count));
  const fixtures: Array<{ window: string; expected: number[]; tolerance: number; t: number }> = [];
  for (let k = 0; k < count && k * step < instances.length; k++) {
    const inst = instances[k * step];
    const windowFile = `window_${k}.json`;
    const w = inst.window;
    fs.writeFileSync(path.join(outDir, windowFile), JSON.stringify({
      load_der: w.loadDer,
      adjacency: w.adjacency,
      gen_feat: w.genFeat,
      edge_index: w.edgeIndex,
      edge_attr: w.edgeAttr,
      tder_slots: w.tderSlots,
    }));
    const scores = forward(quantized, w);
    fixtures.push({
      window: windowFile,
      expected: Array.from(scores.data),
      tolerance: FIXTURE_TOLERANCE,
      t: inst.t,
    });
  }
  const manifest = { model: "model.json", fixtures };
  fs.writeFileSync(path.join(outDir, "fixture_manifest.json"),
    JSON.stringify(manifest, null, 1) + "\n");
  return path.join(outDir, "fixture_manifest.json");
}
