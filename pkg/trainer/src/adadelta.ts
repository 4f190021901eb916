/**
 * ADADELTA: per-parameter step sizes from running RMS of gradients and of
 * past updates; no learning rate to tune.
 */

import { Network, NetworkGrads } from "./mlp";

export interface AdadeltaState {
  gradSq: Float64Array[];
  stepSq: Float64Array[];
  gradSqBias: Float64Array[];
  stepSqBias: Float64Array[];
  rho: number;
  eps: number;
}

export function initAdadelta(net: Network, rho = 0.95, eps = 1e-6): AdadeltaState {
  return {
    gradSq: net.layers.map((l) => new Float64Array(l.rows * l.cols)),
    stepSq: net.layers.map((l) => new Float64Array(l.rows * l.cols)),
    gradSqBias: net.layers.map((l) => new Float64Array(l.rows)),
    stepSqBias: net.layers.map((l) => new Float64Array(l.rows)),
    rho,
    eps,
  };
}

function applyTo(
  values: Float64Array,
  grads: Float64Array,
  gradSq: Float64Array,
  stepSq: Float64Array,
  rho: number,
  eps: number
): void {
  for (let i = 0; i < values.length; i++) {
    const g = grads[i];
    gradSq[i] = rho * gradSq[i] + (1 - rho) * g * g;
    const step = -(Math.sqrt(stepSq[i] + eps) / Math.sqrt(gradSq[i] + eps)) * g;
    stepSq[i] = rho * stepSq[i] + (1 - rho) * step * step;
    values[i] += step;
  }
}

/** One optimizer step; ``grads`` already include any weight decay. */
export function adadeltaStep(net: Network, grads: NetworkGrads, state: AdadeltaState): void {
  for (let k = 0; k < net.layers.length; k++) {
    const layer = net.layers[k];
    applyTo(layer.weights, grads.weights[k], state.gradSq[k], state.stepSq[k], state.rho, state.eps);
    applyTo(layer.bias, grads.bias[k], state.gradSqBias[k], state.stepSqBias[k], state.rho, state.eps);
  }
}
