/**
 * Trainer command line.
 *
 *   build-dataset --ledger DIR --out FILE [--window 12] [--slots 1]
 *   train         --dataset FILE --out MANIFEST [--epochs N] [--lr X]
 *                 [--batch N] [--lambda X] [--seed N] [--channels a,b,c]
 *                 [--embed N] [--report FILE]
 *   export        --dataset FILE --model MANIFEST --out MANIFEST
 *   fixtures      --dataset FILE --model MANIFEST --out DIR [--count N]
 */

import * as fs from "node:fs";
import { pathToFileURL } from "node:url";

import { emitFixtures } from "./fixtures.js";
import { readLedger } from "./ledger.js";
import { Hyper, Model, initParams } from "./model.js";
import { computeStats, datasetLoss, train, DEFAULT_OPTIONS } from "./train.js";
import { Instance, buildInstances } from "./window.js";
import { loadModel, saveModel } from "./weights.js";

function parseArgs(argv: string[]): { cmd: string; opts: Map<string, string> } {
  const [cmd, ...rest] = argv;
  const opts = new Map<string, string>();
  for (let i = 0; i < rest.length; i += 2) {
    if (!rest[i].startsWith("--")) throw new Error(`bad argument ${rest[i]}`);
    opts.set(rest[i].slice(2), rest[i + 1]);
  }
  return { cmd, opts };
}

function need(opts: Map<string, string>, key: string): string {
  const v = opts.get(key);
  if (v === undefined) throw new Error(`missing --${key}`);
  return v;
}

interface DatasetFile {
  window: number;
  tder_slots: number;
  instances: Array<{
    load_der: number[][][];
    adjacency: number[][];
    gen_feat: number[][];
    edge_index: number[][];
    edge_attr: number[][];
    tder_slots: number[][];
    target: number[];
    dera_cost: number;
    t: number;
  }>;
}

function writeDataset(path: string, window: number, slots: number,
  instances: Instance[]): void {
  const out: DatasetFile = {
    window,
    tder_slots: slots,
    instances: instances.map((inst) => ({
      load_der: inst.window.loadDer,
      adjacency: inst.window.adjacency,
      gen_feat: inst.window.genFeat,
      edge_index: inst.window.edgeIndex,
      edge_attr: inst.window.edgeAttr,
      tder_slots: inst.window.tderSlots,
      target: inst.target,
      dera_cost: inst.deraCost,
      t: inst.t,
    })),
  };
  fs.writeFileSync(path, JSON.stringify(out));
}

export function readDataset(path: string): { window: number; slots: number; instances: Instance[] } {
  const data = JSON.parse(fs.readFileSync(path, "utf-8")) as DatasetFile;
  return {
    window: data.window,
    slots: data.tder_slots,
    instances: data.instances.map((d) => ({
      window: {
        loadDer: d.load_der,
        adjacency: d.adjacency,
        genFeat: d.gen_feat,
        edgeIndex: d.edge_index,
        edgeAttr: d.edge_attr,
        tderSlots: d.tder_slots,
      },
      target: d.target,
      deraCost: d.dera_cost,
      t: d.t,
    })),
  };
}

function defaultHyper(window: number, slots: number,
  opts: Map<string, string>): Hyper {
  const channels = (opts.get("channels") ?? "16,8,16").split(",").map(Number);
  const embed = Number(opts.get("embed") ?? 12);
  return {
    window,
    temporal_kernel: 3,
    st_channels: [channels[0], channels[1], channels[2]],
    st_embed: embed,
    ec_channels: [8, 8],
    ec_hidden: 8,
    ec_embed: 8,
    cheb_k: 2,
    fa_channels: embed,
    tder_slots: slots,
  };
}

export function main(argv: string[]): number {
  const { cmd, opts } = parseArgs(argv);

  if (cmd === "build-dataset") {
    const ledger = readLedger(need(opts, "ledger"));
    const window = Number(opts.get("window") ?? 12);
    const slots = Number(opts.get("slots") ?? 1);
    const instances = buildInstances(ledger, window, slots);
    writeDataset(need(opts, "out"), window, slots, instances);
    console.log(`dataset: ${instances.length} instances `
      + `(${ledger.records.length} records, window ${window})`);
    return 0;
  }

  if (cmd === "train") {
    const { window, slots, instances } = readDataset(need(opts, "dataset"));
    const hyper = defaultHyper(window, slots, opts);
    const loadFeat = 1 + slots;
    const model = new Model(hyper, initParams(hyper, loadFeat,
      Number(opts.get("seed") ?? DEFAULT_OPTIONS.seed)));
    const split = Number(opts.get("test-fraction") ?? DEFAULT_OPTIONS.testFraction);
    const trainCount = instances.length - Math.floor(instances.length * split);
    model.stats = computeStats(instances.slice(0, trainCount));
    const report = train(model, instances, {
      epochs: Number(opts.get("epochs") ?? DEFAULT_OPTIONS.epochs),
      lr: Number(opts.get("lr") ?? DEFAULT_OPTIONS.lr),
      batchSize: Number(opts.get("batch") ?? DEFAULT_OPTIONS.batchSize),
      lambda: Number(opts.get("lambda") ?? DEFAULT_OPTIONS.lambda),
      seed: Number(opts.get("seed") ?? DEFAULT_OPTIONS.seed),
      testFraction: split,
      logEvery: Number(opts.get("log-every") ?? 10),
    });
    saveModel(model, need(opts, "out"));
    if (opts.get("report")) {
      fs.writeFileSync(opts.get("report")!, JSON.stringify(report, null, 1) + "\n");
    }
    const first = report.epochs[0];
    const last = report.epochs[report.epochs.length - 1];
    console.log(`trained ${report.epochs.length} epochs on ${report.trainCount} `
      + `instances (test ${report.testCount}); test loss `
      + `${first.testLoss.toExponential(3)} -> ${last.testLoss.toExponential(3)}, `
      + `best ${report.bestTestLoss.toExponential(3)} @ epoch ${report.bestEpoch}`);
    return 0;
  }

  if (cmd === "export") {
    const model = loadModel(need(opts, "model"));
    saveModel(model, need(opts, "out"));
    const check = loadModel(need(opts, "out"));
    const { instances } = readDataset(need(opts, "dataset"));
    const a = datasetLoss(model, instances.slice(0, 5), 0);
    const b = datasetLoss(check, instances.slice(0, 5), 0);
    if (Math.abs(a - b) > 1e-9 * Math.max(1, Math.abs(a))) {
      throw new Error(`export round-trip drifted: ${a} vs ${b}`);
    }
    console.log(`re-exported to ${need(opts, "out")} (round-trip verified)`);
    return 0;
  }

  if (cmd === "fixtures") {
    const { instances } = readDataset(need(opts, "dataset"));
    const model = loadModel(need(opts, "model"));
    const manifest = emitFixtures(model, instances,
      need(opts, "out"), Number(opts.get("count") ?? 5));
    console.log(`fixtures written: ${manifest}`);
    return 0;
  }

  console.error(`unknown command ${cmd}; see the header of cli.ts`);
  return 2;
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exitCode = main(process.argv.slice(2));
}
