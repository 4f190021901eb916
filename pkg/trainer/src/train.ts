/**
 * Training loop: minibatch ADADELTA on one network per source, minimizing
 * the chosen likelihood loss plus an L2 weight penalty ((lambda/2) sum g^2).
 *
 * Mixing gains are redrawn every epoch (fresh signal-to-noise randomization
 * acts as augmentation) and frames are shuffled across songs within an
 * epoch; both are driven by the seeded generator, so a fixed seed gives
 * bitwise-identical final weights.
 */

import { AdadeltaState, adadeltaStep, initAdadelta } from "./adadelta";
import { LossSpec, lossGrad, lossValue } from "./losses";
import { Network, NetworkGrads, backward, forwardTrace, initNetwork, zeroGrads } from "./mlp";
import { PairConfig, TrainingPair, buildPairs } from "./pairs";
import { Rng } from "./random";
import { Spectrogram } from "./stft";

export interface TrainConfig {
  loss: "gauss" | "t";
  nu: number;
  delta1: number;
  delta2: number;
  context: number;
  epochs: number;
  batch: number;
  weightDecay: number;
  alphaMin: number;
  alphaMax: number;
  seed: number;
  hidden: number[];
}

export const DEFAULT_TRAIN_CONFIG: TrainConfig = {
  loss: "gauss",
  nu: 1000.0,
  delta1: 1e-5,
  delta2: 1e-5,
  context: 3,
  epochs: 200,
  batch: 128,
  weightDecay: 1e-5,
  alphaMin: 0.05,
  alphaMax: 1.0,
  seed: 0,
  hidden: [1024, 1024, 1024, 1024],
};

export interface EpochRecord {
  epoch: number;
  loss: number;
}

export class DivergenceError extends Error {
  constructor(public epoch: number, public batchIndex: number) {
    super(`training diverged (non-finite loss) at epoch ${epoch}, batch ${batchIndex}`);
  }
}

export function validateTrainConfig(config: TrainConfig): void {
  if (config.delta1 <= 0 || config.delta2 <= 0) {
    throw new Error("delta1 and delta2 must be positive");
  }
  if (!(0 < config.alphaMin && config.alphaMin <= config.alphaMax && config.alphaMax <= 1)) {
    throw new Error("need 0 < alphaMin <= alphaMax <= 1");
  }
  if (config.loss === "t" && !(config.nu > 0)) {
    throw new Error("the t loss needs nu > 0");
  }
  if (config.epochs < 1 || config.batch < 1) {
    throw new Error("epochs and batch size must be positive");
  }
}

function accumulateBatch(
  net: Network,
  batch: { pair: TrainingPair; target: Float64Array }[],
  spec: LossSpec,
  weightDecay: number,
  grads: NetworkGrads
): number {
  let total = 0.0;
  for (const { pair, target } of batch) {
    const trace = forwardTrace(net, pair.input);
    const predicted = trace.activations[net.layers.length];
    total += lossValue(spec, predicted, target);
    const outputGrad = lossGrad(spec, predicted, target);
    const scale = 1.0 / batch.length;
    for (let i = 0; i < outputGrad.length; i++) outputGrad[i] *= scale;
    backward(net, trace, outputGrad, grads);
  }
  if (weightDecay > 0) {
    for (let k = 0; k < net.layers.length; k++) {
      const layer = net.layers[k];
      const gw = grads.weights[k];
      for (let i = 0; i < layer.weights.length; i++) gw[i] += weightDecay * layer.weights[i];
      const gb = grads.bias[k];
      for (let i = 0; i < layer.bias.length; i++) gb[i] += weightDecay * layer.bias[i];
    }
  }
  return total / batch.length;
}

/**
 * Train the network for source ``sourceIndex`` on aligned per-source
 * spectrograms of one or more songs.
 */
export function train(
  songs: Spectrogram[][],
  sourceIndex: number,
  config: TrainConfig
): { network: Network; history: EpochRecord[] } {
  validateTrainConfig(config);
  if (songs.length === 0 || songs[0].length === 0) {
    throw new Error("empty training corpus");
  }
  const bins = songs[0][0].bins;
  const dims = [bins * (2 * config.context + 1), ...config.hidden, bins];
  const rng = new Rng(config.seed);
  const net = initNetwork(dims, bins, config.context, config.delta2, rng);
  const optimizer: AdadeltaState = initAdadelta(net);
  const spec: LossSpec = { kind: config.loss, nu: config.nu, delta1: config.delta1 };
  const pairConfig: PairConfig = {
    context: config.context,
    delta2: config.delta2,
    alphaMin: config.alphaMin,
    alphaMax: config.alphaMax,
  };
  const history: EpochRecord[] = [];
  for (let epoch = 0; epoch < config.epochs; epoch++) {
    // fresh mixing gains every epoch
    const pool: { pair: TrainingPair; target: Float64Array }[] = [];
    for (const song of songs) {
      for (const pair of buildPairs(song, pairConfig, rng)) {
        pool.push({ pair, target: pair.targets[sourceIndex] });
      }
    }
    rng.shuffle(pool);
    let epochLoss = 0.0;
    let batches = 0;
    for (let start = 0; start < pool.length; start += config.batch) {
      const batch = pool.slice(start, start + config.batch);
      const grads = zeroGrads(net);
      const batchLoss = accumulateBatch(net, batch, spec, config.weightDecay, grads);
      if (!Number.isFinite(batchLoss)) {
        throw new DivergenceError(epoch, batches);
      }
      adadeltaStep(net, grads, optimizer);
      epochLoss += batchLoss;
      batches += 1;
    }
    history.push({ epoch, loss: epochLoss / Math.max(1, batches) });
  }
  return { network: net, history };
}
