/**
 * Weight-file round-trips: export, reload, forward equality at float32
 * resolution, checksum and version enforcement.
 */

import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import { forward } from "../src/model.js";
import { computeStats } from "../src/train.js";
import { loadModel, saveModel } from "../src/weights.js";
import { randomInstance, tinyModel } from "./util.js";

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "dfw-"));
}

describe("weight files", () => {
  it("export -> reload -> forward matches at f32 resolution", () => {
    const model = tinyModel(11);
    const inst = randomInstance(42);
    model.stats = computeStats([inst]);
    // quantize in-memory weights first so the comparison is exact
    for (const [, p] of model.trainables()) {
      p.data.set(Float64Array.from(new Float32Array(p.data)));
    }
    const before = forward(model, inst.window);
    const dir = tmpdir();
    saveModel(model, path.join(dir, "m.json"));
    const loaded = loadModel(path.join(dir, "m.json"));
    const after = forward(loaded, inst.window);
    for (let i = 0; i < before.size; i++) {
      expect(Math.abs(after.data[i] - before.data[i])).toBeLessThan(1e-12);
    }
    // unquantized export stays within f32 resolution of the original
    const fresh = tinyModel(11);
    fresh.stats = model.stats;
    const rawOut = forward(fresh, inst.window);
    saveModel(fresh, path.join(dir, "m2.json"));
    const loaded2 = loadModel(path.join(dir, "m2.json"));
    const out2 = forward(loaded2, inst.window);
    for (let i = 0; i < rawOut.size; i++) {
      expect(Math.abs(out2.data[i] - rawOut.data[i])).toBeLessThan(1e-5);
    }
  });

  it("rejects corrupted payloads", () => {
    const model = tinyModel(13);
    const dir = tmpdir();
    saveModel(model, path.join(dir, "m.json"));
    const payload = path.join(dir, "m.bin");
    const blob = fs.readFileSync(payload);
    blob[5] ^= 0xff;
    fs.writeFileSync(payload, blob);
    expect(() => loadModel(path.join(dir, "m.json"))).toThrow(/checksum/);
  });

  it("rejects unknown versions", () => {
    const model = tinyModel(13);
    const dir = tmpdir();
    saveModel(model, path.join(dir, "m.json"));
    const manifest = JSON.parse(fs.readFileSync(path.join(dir, "m.json"), "utf-8"));
    manifest.version = 99;
    fs.writeFileSync(path.join(dir, "m.json"), JSON.stringify(manifest));
    expect(() => loadModel(path.join(dir, "m.json"))).toThrow(/version/);
  });

  it("stats survive the round-trip", () => {
    const model = tinyModel(17);
    const inst = randomInstance(1);
    model.stats = computeStats([inst]);
    const dir = tmpdir();
    saveModel(model, path.join(dir, "m.json"));
    const loaded = loadModel(path.join(dir, "m.json"));
    expect(loaded.stats["load_der.mean"]).toEqual(
      Array.from(model.stats["load_der.mean"]));
  });
});
