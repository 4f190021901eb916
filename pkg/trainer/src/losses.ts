/**
 * Maximum-likelihood training losses over magnitude spectr frames.
 *
 * Both losses compare a predicted magnitude d against a target magnitude s
 * through the shifted power ratio r = (s^2 + delta1) / (d^2 + delta1):
 *
 *   gauss:  r - log r - 1                  (zero iff d = s elementwise)
 *   t:      (1 + nu/2) log(1 + (2/nu) r) + log(d^2 + delta1)
 *
 * Minimizing the Gaussian loss is the ML fit of the variance of a complex
 * Gaussian source model; the t loss is the same for the heavy-tailed model
 * and converges to the Gaussian one (plus the constant
 * sum(log(s^2 + delta1)) + count) as nu grows.
 *
 * Everything here is plain double-precision arithmetic so the analytic
 * gradients can be validated against central finite differences tightly.
 */

export function gaussLossElement(d: number, s: number, delta1: number): number {
  const r = (s * s + delta1) / (d * d + delta1);
  return r - Math.log(r) - 1.0;
}

/** d(loss)/dd for one element of the Gaussian loss. */
export function gaussLossGradElement(d: number, s: number, delta1: number): number {
  const denom = d * d + delta1;
  const r = (s * s + delta1) / denom;
  return (-2.0 * d * (r - 1.0)) / denom;
}

export function tLossElement(d: number, s: number, nu: number, delta1: number): number {
  const denom = d * d + delta1;
  const r = (s * s + delta1) / denom;
  return (1.0 + nu / 2.0) * Math.log1p((2.0 / nu) * r) + Math.log(denom);
}

/** d(loss)/dd for one element of the Student's-t loss. */
export function tLossGradElement(d: number, s: number, nu: number, delta1: number): number {
  const denom = d * d + delta1;
  const q = ((2.0 / nu) * (s * s + delta1)) / denom;
  return ((2.0 * d) / denom) * (1.0 - ((1.0 + nu / 2.0) * q) / (1.0 + q));
}

export function gaussLoss(predicted: Float64Array, target: Float64Array, delta1: number): number {
  let total = 0.0;
  for (let i = 0; i < predicted.length; i++) {
    total += gaussLossElement(predicted[i], target[i], delta1);
  }
  return total;
}

export function tLoss(
  predicted: Float64Array,
  target: Float64Array,
  nu: number,
  delta1: number
): number {
  let total = 0.0;
  for (let i = 0; i < predicted.length; i++) {
    total += tLossElement(predicted[i], target[i], nu, delta1);
  }
  return total;
}

export type LossKind = "gauss" | "t";

export interface LossSpec {
  kind: LossKind;
  nu: number;
  delta1: number;
}

export function lossValue(spec: LossSpec, predicted: Float64Array, target: Float64Array): number {
  return spec.kind === "gauss"
    ? gaussLoss(predicted, target, spec.delta1)
    : tLoss(predicted, target, spec.nu, spec.delta1);
}

/** Elementwise d(loss)/d(predicted). */
export function lossGrad(
  spec: LossSpec,
  predicted: Float64Array,
  target: Float64Array
): Float64Array {
  const out = new Float64Array(predicted.length);
  for (let i = 0; i < predicted.length; i++) {
    out[i] =
      spec.kind === "gauss"
        ? gaussLossGradElement(predicted[i], target[i], spec.delta1)
        : tLossGradElement(predicted[i], target[i], spec.nu, spec.delta1);
  }
  return out;
}

/**
 * Per-element minimizer of the t loss in d: the stationary point sits at
 * d^2 = s^2 exactly (the delta1 shifts cancel), with value
 * (1 + nu/2) log(1 + 2/nu) + log(s^2 + delta1).
 */
export function tLossElementMinimum(s: number, nu: number, delta1: number): number {
  return (1.0 + nu / 2.0) * Math.log1p(2.0 / nu) + Math.log(s * s + delta1);
}
