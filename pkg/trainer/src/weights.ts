/**
 * Shared weight-file format: a JSON manifest naming each tensor's shape,
 * byte offset, and sha256, next to a little-endian float32 row-major
 * payload.  The inference side loads the same pair.
 */

import * as crypto from "node:crypto";
import * as fs from "node:fs";
import * as path from "node:path";

import { Hyper, Model, Stats, expectedShapes } from "./model.js";
import { Tensor } from "./tensor.js";

export const WEIGHT_FORMAT_VERSION = 1;

interface ManifestTensor {
  name: string;
  shape: number[];
  dtype: string;
  offset: number;
  sha256: string;
}

interface Manifest {
  version: number;
  payload: string;
  hyper: Record<string, unknown>;
  stats: Record<string, number[]>;
  tensors: ManifestTensor[];
}

function hyperToJson(h: Hyper): Record<string, unknown> {
  return {
    window: h.window, temporal_kernel: h.temporal_kernel,
    st_channels: h.st_channels, st_embed: h.st_embed,
    ec_channels: h.ec_channels, ec_hidden: h.ec_hidden, ec_embed: h.ec_embed,
    cheb_k: h.cheb_k, fa_channels: h.fa_channels, tder_slots: h.tder_slots,
  };
}

export function hyperFromJson(d: Record<string, any>): Hyper {
  return {
    window: d.window, temporal_kernel: d.temporal_kernel,
    st_channels: d.st_channels, st_embed: d.st_embed,
    ec_channels: d.ec_channels, ec_hidden: d.ec_hidden, ec_embed: d.ec_embed,
    cheb_k: d.cheb_k, fa_channels: d.fa_channels, tder_slots: d.tder_slots,
  };
}

export function saveModel(model: Model, manifestPath: string): void {
  const payloadPath = manifestPath.replace(/\.json$/, "") + ".bin";
  const names = Array.from(model.params.keys()).sort();
  const chunks: Buffer[] = [];
  const entries: ManifestTensor[] = [];
  let offset = 0;
  for (const name of names) {
    const t = model.param(name);
    const f32 = new Float32Array(t.data);            // quantize to storage
    const buf = Buffer.from(f32.buffer.slice(0));    // LE on every node target
    entries.push({
      name,
      shape: t.shape.slice(),
      dtype: "f32",
      offset,
      sha256: crypto.createHash("sha256").update(buf).digest("hex"),
    });
    chunks.push(buf);
    offset += buf.length;
  }
  const manifest: Manifest = {
    version: WEIGHT_FORMAT_VERSION,
    payload: path.basename(payloadPath),
    hyper: hyperToJson(model.hyper),
    stats: Object.fromEntries(
      Object.entries(model.stats).map(([k, v]) => [k, Array.from(v)])),
    tensors: entries,
  };
  fs.writeFileSync(payloadPath, Buffer.concat(chunks));
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 1) + "\n");
}

export function loadModel(manifestPath: string): Model {
  const manifest = JSON.parse(fs.readFileSync(manifestPath, "utf-8")) as Manifest;
  if (manifest.version !== WEIGHT_FORMAT_VERSION) {
    throw new Error(`unknown weight format version ${manifest.version}`);
  }
  const payload = fs.readFileSync(
    path.join(path.dirname(manifestPath), manifest.payload));
  const params = new Map<string, Tensor>();
  for (const e of manifest.tensors) {
    if (e.dtype !== "f32") throw new Error(`tensor ${e.name}: dtype ${e.dtype}`);
    const count = e.shape.reduce((a, b) => a * b, 1);
    const raw = payload.subarray(e.offset, e.offset + 4 * count);
    const digest = crypto.createHash("sha256").update(raw).digest("hex");
    if (digest !== e.sha256) throw new Error(`checksum mismatch for ${e.name}`);
    const f32 = new Float32Array(raw.buffer.slice(
      raw.byteOffset, raw.byteOffset + raw.length));
    const t = new Tensor(Float64Array.from(f32), e.shape, true);
    params.set(e.name, t);
  }
  const hyper = hyperFromJson(manifest.hyper);
  // verify the layout is internally consistent before handing it out
  const loadFeat = (params.get("st1.t1.W")?.shape[1]) ?? 0;
  for (const [name, shape] of expectedShapes(hyper, loadFeat)) {
    const got = params.get(name);
    if (!got || got.shape.join() !== shape.join()) {
      throw new Error(`tensor ${name}: expected [${shape}], got [${got?.shape}]`);
    }
  }
  const stats: Stats = {};
  for (const [k, v] of Object.entries(manifest.stats ?? {})) stats[k] = v;
  return new Model(hyper, params, stats);
}
