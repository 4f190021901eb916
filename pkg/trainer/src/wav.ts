/**
 * Minimal WAV I/O for the training corpus: 16-bit PCM and 32-bit IEEE
 * float, little-endian, interleaved — the same two encodings the
 * separation package reads and writes.
 */

import * as fs from "fs";

export interface WavSignal {
  /** One Float64Array per channel, equal lengths. */
  channels: Float64Array[];
  sampleRate: number;
}

export function readWav(path: string): WavSignal {
  const data = fs.readFileSync(path);
  if (data.length < 12 || data.toString("ascii", 0, 4) !== "RIFF" || data.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error(`${path} is not a RIFF/WAVE file`);
  }
  let pos = 12;
  let fmt: { tag: number; channels: number; rate: number; bits: number } | null = null;
  let payload: Buffer | null = null;
  while (pos + 8 <= data.length) {
    const id = data.toString("ascii", pos, pos + 4);
    const size = data.readUInt32LE(pos + 4);
    const body = data.subarray(pos + 8, pos + 8 + size);
    if (id === "fmt ") {
      fmt = {
        tag: body.readUInt16LE(0),
        channels: body.readUInt16LE(2),
        rate: body.readUInt32LE(4),
        bits: body.readUInt16LE(14),
      };
    } else if (id === "data") {
      payload = Buffer.from(body);
    }
    pos += 8 + size + (size & 1);
  }
  if (!fmt || !payload) throw new Error(`${path}: missing fmt or data chunk`);
  const { tag, channels, rate, bits } = fmt;
  let frames: number;
  const out: Float64Array[] = [];
  if (tag === 1 && bits === 16) {
    frames = Math.floor(payload.length / (2 * channels));
    for (let m = 0; m < channels; m++) out.push(new Float64Array(frames));
    for (let t = 0; t < frames; t++) {
      for (let m = 0; m < channels; m++) {
        out[m][t] = payload.readInt16LE((t * channels + m) * 2) / 32768;
      }
    }
  } else if (tag === 3 && bits === 32) {
    frames = Math.floor(payload.length / (4 * channels));
    for (let m = 0; m < channels; m++) out.push(new Float64Array(frames));
    for (let t = 0; t < frames; t++) {
      for (let m = 0; m < channels; m++) {
        out[m][t] = payload.readFloatLE((t * channels + m) * 4);
      }
    }
  } else {
    throw new Error(`${path}: unsupported encoding (tag ${tag}, ${bits} bits)`);
  }
  return { channels: out, sampleRate: rate };
}

export function writeWavFloat32(path: string, signal: WavSignal): void {
  const channels = signal.channels.length;
  const frames = signal.channels[0].length;
  const payload = Buffer.alloc(frames * channels * 4);
  for (let t = 0; t < frames; t++) {
    for (let m = 0; m < channels; m++) {
      const v = Math.max(-1.0, Math.min(1.0, signal.channels[m][t]));
      payload.writeFloatLE(Math.fround(v), (t * channels + m) * 4);
    }
  }
  const fmt = Buffer.alloc(18);
  fmt.writeUInt16LE(3, 0);
  fmt.writeUInt16LE(channels, 2);
  fmt.writeUInt32LE(signal.sampleRate, 4);
  fmt.writeUInt32LE(signal.sampleRate * channels * 4, 8);
  fmt.writeUInt16LE(channels * 4, 12);
  fmt.writeUInt16LE(32, 14);
  fmt.writeUInt16LE(0, 16);
  const fact = Buffer.alloc(12);
  fact.write("fact", 0, "ascii");
  fact.writeUInt32LE(4, 4);
  fact.writeUInt32LE(frames, 8);
  const header = Buffer.alloc(12);
  header.write("RIFF", 0, "ascii");
  header.write("WAVE", 8, "ascii");
  const chunks = [
    Buffer.concat([Buffer.from("fmt "), u32(fmt.length), fmt]),
    fact,
    Buffer.concat([Buffer.from("data"), u32(payload.length), payload]),
  ];
  const body = Buffer.concat(chunks);
  header.writeUInt32LE(4 + body.length, 4);
  fs.writeFileSync(path, Buffer.concat([header, body]));
}

function u32(value: number): Buffer {
  const b = Buffer.alloc(4);
  b.writeUInt32LE(value, 0);
  return b;
}
