/**
 * IDLM1 weight container: the exchange format consumed by the separation
 * package.  Little-endian, no padding:
 *
 *   magic "IDLM1\0" | u32 layerCount | u32 freqBins | u32 context |
 *   f32 delta2 | per layer: u32 rows, u32 cols, rows*cols f32 row-major
 *   weights, rows f32 biases
 */

import * as fs from "fs";
import { Layer, Network } from "./mlp";

const MAGIC = Buffer.from("IDLM1\0", "ascii");

export function exportIdlm1(net: Network, path: string): void {
  if (net.layers.length === 0) {
    throw new Error("refusing to export a zero-layer network");
  }
  const dims = [net.layers[0].cols, ...net.layers.map((l) => l.rows)];
  if (dims[0] !== net.freqBins * (2 * net.context + 1) || dims[dims.length - 1] !== net.freqBins) {
    throw new Error(`network dims ${dims} disagree with meta (bins ${net.freqBins}, context ${net.context})`);
  }
  const chunks: Buffer[] = [MAGIC];
  const header = Buffer.alloc(16);
  header.writeUInt32LE(net.layers.length, 0);
  header.writeUInt32LE(net.freqBins, 4);
  header.writeUInt32LE(net.context, 8);
  header.writeFloatLE(Math.fround(net.delta2), 12);
  chunks.push(header);
  for (const layer of net.layers) {
    const head = Buffer.alloc(8);
    head.writeUInt32LE(layer.rows, 0);
    head.writeUInt32LE(layer.cols, 4);
    chunks.push(head);
    const w = Buffer.alloc(4 * layer.rows * layer.cols);
    for (let i = 0; i < layer.weights.length; i++) w.writeFloatLE(Math.fround(layer.weights[i]), 4 * i);
    chunks.push(w);
    const b = Buffer.alloc(4 * layer.rows);
    for (let i = 0; i < layer.bias.length; i++) b.writeFloatLE(Math.fround(layer.bias[i]), 4 * i);
    chunks.push(b);
  }
  fs.writeFileSync(path, Buffer.concat(chunks));
}

export function importIdlm1(path: string): Network {
  const data = fs.readFileSync(path);
  if (data.length < MAGIC.length || !data.subarray(0, MAGIC.length).equals(MAGIC)) {
    throw new Error(`${path} does not carry the IDLM1 magic`);
  }
  let pos = MAGIC.length;
  const need = (count: number) => {
    if (pos + count > data.length) throw new Error(`${path}: truncated payload at offset ${pos}`);
    const at = pos;
    pos += count;
    return at;
  };
  let at = need(16);
  const layerCount = data.readUInt32LE(at);
  const freqBins = data.readUInt32LE(at + 4);
  const context = data.readUInt32LE(at + 8);
  const delta2 = data.readFloatLE(at + 12);
  const layers: Layer[] = [];
  for (let k = 0; k < layerCount; k++) {
    at = need(8);
    const rows = data.readUInt32LE(at);
    const cols = data.readUInt32LE(at + 4);
    const weights = new Float64Array(rows * cols);
    at = need(4 * rows * cols);
    for (let i = 0; i < weights.length; i++) weights[i] = data.readFloatLE(at + 4 * i);
    const bias = new Float64Array(rows);
    at = need(4 * rows);
    for (let i = 0; i < rows; i++) bias[i] = data.readFloatLE(at + 4 * i);
    layers.push({ weights, bias, rows, cols });
  }
  if (pos !== data.length) throw new Error(`${path}: trailing bytes after payload`);
  return { layers, freqBins, context, delta2 };
}
