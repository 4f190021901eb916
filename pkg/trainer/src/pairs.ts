/**
 * Training-data construction from aligned per-source reference spectrograms.
 *
 * Per frame j, every source draws a gain alpha in [alphaMin, alphaMax]
 * controlling its share in the synthetic mixture.  Context stacks of each
 * source's complex columns (stride-2 offsets -2c..+2c, zero-padded edges)
 * are summed with those gains; the summed stack is normalized by its 2-norm
 * plus delta2, and the per-source targets (the center frames, scaled by
 * their own alpha) are divided by the SAME normalizer, so input and targets
 * live on a shared scale.  The emitted pair holds magnitudes.
 */

import { Rng } from "./random";
import { Spectrogram } from "./stft";

export interface TrainingPair {
  input: Float64Array; // bins * (2c + 1), nonnegative
  targets: Float64Array[]; // one per source, bins each
  normalizer: number;
}

export interface PairConfig {
  context: number;
  delta2: number;
  alphaMin: number;
  alphaMax: number;
}

export function validatePairConfig(config: PairConfig): void {
  if (config.delta2 <= 0) throw new Error(`delta2 must be positive, got ${config.delta2}`);
  if (!(0 < config.alphaMin && config.alphaMin <= config.alphaMax && config.alphaMax <= 1)) {
    throw new Error(`need 0 < alphaMin <= alphaMax <= 1, got [${config.alphaMin}, ${config.alphaMax}]`);
  }
  if (config.context < 0 || !Number.isInteger(config.context)) {
    throw new Error(`context must be a nonnegative integer, got ${config.context}`);
  }
}

/** Complex context stack of one source around frame j (stride-2 offsets). */
function contextStack(
  spec: Spectrogram,
  frame: number,
  context: number
): { re: Float64Array; im: Float64Array } {
  const width = 2 * context + 1;
  const re = new Float64Array(spec.bins * width);
  const im = new Float64Array(spec.bins * width);
  for (let block = 0; block < width; block++) {
    const j = frame + 2 * (block - context);
    if (j < 0 || j >= spec.frames) continue;
    for (let k = 0; k < spec.bins; k++) {
      re[block * spec.bins + k] = spec.re[k * spec.frames + j];
      im[block * spec.bins + k] = spec.im[k * spec.frames + j];
    }
  }
  return { re, im };
}

export function buildPairsForFrame(
  sources: Spectrogram[],
  frame: number,
  config: PairConfig,
  rng: Rng
): TrainingPair {
  validatePairConfig(config);
  const bins = sources[0].bins;
  const width = 2 * config.context + 1;
  const alphas = sources.map(() => rng.uniform(config.alphaMin, config.alphaMax));

  const mixRe = new Float64Array(bins * width);
  const mixIm = new Float64Array(bins * width);
  for (let n = 0; n < sources.length; n++) {
    const stack = contextStack(sources[n], frame, config.context);
    for (let i = 0; i < mixRe.length; i++) {
      mixRe[i] += alphas[n] * stack.re[i];
      mixIm[i] += alphas[n] * stack.im[i];
    }
  }
  let normSq = 0.0;
  for (let i = 0; i < mixRe.length; i++) normSq += mixRe[i] ** 2 + mixIm[i] ** 2;
  const normalizer = Math.sqrt(normSq) + config.delta2;

  const input = new Float64Array(bins * width);
  for (let i = 0; i < input.length; i++) {
    input[i] = Math.hypot(mixRe[i], mixIm[i]) / normalizer;
  }
  const targets = sources.map((spec, n) => {
    const target = new Float64Array(bins);
    for (let k = 0; k < bins; k++) {
      const re = spec.re[k * spec.frames + frame];
      const im = spec.im[k * spec.frames + frame];
      target[k] = (alphas[n] * Math.hypot(re, im)) / normalizer;
    }
    return target;
  });
  return { input, targets, normalizer };
}

/** All frames of a set of aligned source spectrograms, fresh gains per call. */
export function buildPairs(
  sources: Spectrogram[],
  config: PairConfig,
  rng: Rng
): TrainingPair[] {
  if (sources.length === 0) throw new Error("need at least one source");
  const { bins, frames } = sources[0];
  for (const s of sources) {
    if (s.bins !== bins || s.frames !== frames) {
      throw new Error(
        `source spectrogram shapes disagree: ${s.bins}x${s.frames} vs ${bins}x${frames}`
      );
    }
  }
  const pairs: TrainingPair[] = [];
  for (let j = 0; j < frames; j++) {
    pairs.push(buildPairsForFrame(sources, j, config, rng));
  }
  return pairs;
}
