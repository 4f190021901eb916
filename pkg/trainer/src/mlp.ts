/**
 * Fully connected network with a rectified-linear unit after every layer,
 * including the output (magnitudes are nonnegative by construction).
 * Weights are row-major (out x in) Float64Arrays, matching the on-disk
 * container layout byte-for-byte after float32 quantization.
 */

import { Rng } from "./random";

export interface Layer {
  weights: Float64Array; // rows * cols, row-major
  bias: Float64Array; // rows
  rows: number;
  cols: number;
}

export interface Network {
  layers: Layer[];
  freqBins: number;
  context: number;
  delta2: number;
}

export interface NetworkGrads {
  weights: Float64Array[];
  bias: Float64Array[];
}

export function layerDims(net: Network): number[] {
  return [net.layers[0].cols, ...net.layers.map((l) => l.rows)];
}

export function inputDim(net: Network): number {
  return net.freqBins * (2 * net.context + 1);
}

/** He-style uniform init, deterministic from the generator. */
export function initNetwork(
  dims: number[],
  freqBins: number,
  context: number,
  delta2: number,
  rng: Rng
): Network {
  if (dims[0] !== freqBins * (2 * context + 1) || dims[dims.length - 1] !== freqBins) {
    throw new Error(`layer dims ${dims} do not match bins ${freqBins}, context ${context}`);
  }
  const layers: Layer[] = [];
  for (let k = 0; k + 1 < dims.length; k++) {
    const rows = dims[k + 1];
    const cols = dims[k];
    const scale = Math.sqrt(2.0 / cols);
    const weights = new Float64Array(rows * cols);
    for (let i = 0; i < weights.length; i++) weights[i] = scale * rng.normal();
    const bias = new Float64Array(rows);
    for (let i = 0; i < rows; i++) bias[i] = 0.01;
    layers.push({ weights, bias, rows, cols });
  }
  return { layers, freqBins, context, delta2 };
}

/** Plain forward pass. */
export function forward(net: Network, input: Float64Array): Float64Array {
  let v = input;
  for (const layer of net.layers) {
    const next = new Float64Array(layer.rows);
    for (let r = 0; r < layer.rows; r++) {
      let acc = layer.bias[r];
      const base = r * layer.cols;
      for (let c = 0; c < layer.cols; c++) acc += layer.weights[base + c] * v[c];
      next[r] = acc > 0 ? acc : 0;
    }
    v = next;
  }
  return v;
}

export interface ForwardTrace {
  /** Post-activation values per layer, activations[0] being the input. */
  activations: Float64Array[];
}

export function forwardTrace(net: Network, input: Float64Array): ForwardTrace {
  const activations: Float64Array[] = [input];
  let v = input;
  for (const layer of net.layers) {
    const next = new Float64Array(layer.rows);
    for (let r = 0; r < layer.rows; r++) {
      let acc = layer.bias[r];
      const base = r * layer.cols;
      for (let c = 0; c < layer.cols; c++) acc += layer.weights[base + c] * v[c];
      next[r] = acc > 0 ? acc : 0;
    }
    activations.push(next);
    v = next;
  }
  return { activations };
}

export function zeroGrads(net: Network): NetworkGrads {
  return {
    weights: net.layers.map((l) => new Float64Array(l.rows * l.cols)),
    bias: net.layers.map((l) => new Float64Array(l.rows)),
  };
}

/**
 * Accumulate gradients for one sample given d(loss)/d(output).
 *
 * With ReLU active exactly on positive activations, the post-activation
 * value doubles as the gate: a zero output kills the incoming gradient.
 */
export function backward(
  net: Network,
  trace: ForwardTrace,
  outputGrad: Float64Array,
  grads: NetworkGrads
): void {
  let delta = new Float64Array(outputGrad.length);
  const top = trace.activations[net.layers.length];
  for (let r = 0; r < delta.length; r++) {
    delta[r] = top[r] > 0 ? outputGrad[r] : 0;
  }
  for (let k = net.layers.length - 1; k >= 0; k--) {
    const layer = net.layers[k];
    const below = trace.activations[k];
    const gw = grads.weights[k];
    const gb = grads.bias[k];
    for (let r = 0; r < layer.rows; r++) {
      const d = delta[r];
      if (d !== 0) {
        const base = r * layer.cols;
        for (let c = 0; c < layer.cols; c++) gw[base + c] += d * below[c];
      }
      gb[r] += d;
    }
    if (k > 0) {
      const next = new Float64Array(layer.cols);
      for (let r = 0; r < layer.rows; r++) {
        const d = delta[r];
        if (d !== 0) {
          const base = r * layer.cols;
          for (let c = 0; c < layer.cols; c++) next[c] += layer.weights[base + c] * d;
        }
      }
      for (let c = 0; c < layer.cols; c++) {
        next[c] = below[c] > 0 ? next[c] : 0;
      }
      delta = next;
    }
  }
}

export function weightNorm(net: Network): number {
  let total = 0;
  for (const layer of net.layers) {
    for (let i = 0; i < layer.weights.length; i++) total += layer.weights[i] ** 2;
    for (let i = 0; i < layer.bias.length; i++) total += layer.bias[i] ** 2;
  }
  return Math.sqrt(total);
}
