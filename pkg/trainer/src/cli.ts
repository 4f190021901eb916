/**
 * Trainer command line.
 *
 *   train        read an aligned corpus (one directory per source, matching
 *                WAV stems), train one variance-estimation network per
 *                source, export IDLM1 containers
 *   make-golden  regenerate the cross-package parity fixture: a small
 *                deterministic network plus 1000 paired inputs/outputs
 *
 * Usage:
 *   node dist/cli.js train --corpus DIR --out-dir DIR [--loss gauss|t]
 *       [--nu N] [--epochs N] [--batch N] [--context N] [--window N]
 *       [--hop N] [--hidden 64,64] [--weight-decay X] [--seed N]
 *   node dist/cli.js make-golden --out DIR [--seed N]
 */

import * as fs from "fs";
import * as path from "path";
import * as zlib from "zlib";

import { exportIdlm1 } from "./idlm1";
import { forward, initNetwork } from "./mlp";
import { Rng } from "./random";
import { Spectrogram, stft } from "./stft";
import { DEFAULT_TRAIN_CONFIG, TrainConfig, train } from "./train";
import { readWav } from "./wav";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`malformed flag pair near ${argv[i]}`);
    }
    flags.set(argv[i].slice(2), argv[i + 1]);
  }
  return flags;
}

function numberFlag(flags: Map<string, string>, name: string, fallback: number): number {
  const raw = flags.get(name);
  if (raw === undefined) return fallback;
  const value = Number(raw);
  if (!Number.isFinite(value)) throw new Error(`--${name} expects a number, got ${raw}`);
  return value;
}

function cmdTrain(argv: string[]): number {
  const flags = parseFlags(argv);
  const corpusDir = flags.get("corpus");
  const outDir = flags.get("out-dir");
  if (!corpusDir || !outDir) {
    throw new Error("train needs --corpus and --out-dir");
  }
  const windowLen = numberFlag(flags, "window", 256);
  const hop = numberFlag(flags, "hop", windowLen / 2);
  const hidden = (flags.get("hidden") ?? "1024,1024,1024,1024")
    .split(",")
    .map((h) => Number(h));
  const config: TrainConfig = {
    ...DEFAULT_TRAIN_CONFIG,
    loss: (flags.get("loss") ?? "gauss") as "gauss" | "t",
    nu: numberFlag(flags, "nu", DEFAULT_TRAIN_CONFIG.nu),
    epochs: numberFlag(flags, "epochs", DEFAULT_TRAIN_CONFIG.epochs),
    batch: numberFlag(flags, "batch", DEFAULT_TRAIN_CONFIG.batch),
    context: numberFlag(flags, "context", DEFAULT_TRAIN_CONFIG.context),
    weightDecay: numberFlag(flags, "weight-decay", DEFAULT_TRAIN_CONFIG.weightDecay),
    seed: numberFlag(flags, "seed", 0),
    hidden,
  };

  const sourceDirs = fs
    .readdirSync(corpusDir, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (sourceDirs.length === 0) throw new Error(`${corpusDir} has no source directories`);
  const stems = fs
    .readdirSync(path.join(corpusDir, sourceDirs[0]))
    .filter((f) => f.endsWith(".wav"))
    .sort();
  if (stems.length === 0) throw new Error("no WAV stems in the first source directory");

  // songs[s][n]: spectrogram of source n in song s
  const songs: Spectrogram[][] = stems.map((stem) =>
    sourceDirs.map((dir) => {
      const wav = readWav(path.join(corpusDir, dir, stem));
      return stft(wav.channels[0], windowLen, hop);
    })
  );

  fs.mkdirSync(outDir, { recursive: true });
  sourceDirs.forEach((dir, index) => {
    const seeded = { ...config, seed: config.seed + index };
    const { network, history } = train(songs, index, seeded);
    const outPath = path.join(outDir, `${dir}.idlm1`);
    exportIdlm1(network, outPath);
    const last = history[history.length - 1];
    console.log(
      JSON.stringify({ source: dir, out: outPath, epochs: history.length, loss: last.loss })
    );
  });
  return 0;
}

function cmdMakeGolden(argv: string[]): number {
  const flags = parseFlags(argv);
  const outDir = flags.get("out") ?? ".";
  const seed = numberFlag(flags, "seed", 77);
  fs.mkdirSync(outDir, { recursive: true });

  const freqBins = 16;
  const context = 1;
  const delta2 = 1e-5;
  const inDim = freqBins * (2 * context + 1);
  const rng = new Rng(seed);
  const net = initNetwork([inDim, 32, 24, freqBins], freqBins, context, delta2, rng);
  // quantize to the container's precision before computing the outputs, so
  // both sides of the parity check see identical weights
  const netPath = path.join(outDir, "golden_net.idlm1");
  exportIdlm1(net, netPath);
  const { importIdlm1 } = require("./idlm1");
  const quantized = importIdlm1(netPath);

  const count = 1000;
  const inputs = Buffer.alloc(4 * count * inDim);
  const outputs = Buffer.alloc(4 * count * freqBins);
  const input = new Float64Array(inDim);
  for (let row = 0; row < count; row++) {
    for (let c = 0; c < inDim; c++) {
      input[c] = rng.float();
      inputs.writeFloatLE(Math.fround(input[c]), 4 * (row * inDim + c));
    }
    // the file stores f32 inputs; evaluate exactly what the file says
    const stored = new Float64Array(inDim);
    for (let c = 0; c < inDim; c++) stored[c] = inputs.readFloatLE(4 * (row * inDim + c));
    const out = forward(quantized, stored);
    for (let k = 0; k < freqBins; k++) {
      outputs.writeFloatLE(Math.fround(out[k]), 4 * (row * freqBins + k));
    }
  }
  fs.writeFileSync(path.join(outDir, "golden_inputs.f32"), inputs);
  fs.writeFileSync(path.join(outDir, "golden_outputs.f32"), outputs);

  const blob = fs.readFileSync(netPath);
  const checksum = (zlib.crc32(blob.subarray(6)) >>> 0).toString(16).padStart(8, "0");
  const meta = {
    count,
    in_dim: inDim,
    out_dim: freqBins,
    freq_bins: freqBins,
    context,
    delta2,
    checksum,
    generator: "trainer make-golden",
  };
  fs.writeFileSync(path.join(outDir, "golden_meta.json"), JSON.stringify(meta, null, 2) + "\n");
  console.log(JSON.stringify({ out: outDir, checksum }));
  return 0;
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "train") return cmdTrain(rest);
    if (command === "make-golden") return cmdMakeGolden(rest);
    console.error("usage: cli.js <train|make-golden> [flags]");
    return 2;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
