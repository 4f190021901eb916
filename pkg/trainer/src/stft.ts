/**
 * Forward STFT for training-data construction: periodic Hamming window,
 * one-sided spectra, frame j covering samples [j*hop, j*hop + windowLen)
 * with a zero-padded tail — the same conventions the separation side uses,
 * so the network sees identical features at training and separation time.
 */

export interface Spectrogram {
  /** bins * frames, column-major by frame: re/im interleaved per frame. */
  re: Float64Array;
  im: Float64Array;
  bins: number;
  frames: number;
}

export function hammingWindow(length: number): Float64Array {
  const w = new Float64Array(length);
  for (let k = 0; k < length; k++) {
    w[k] = 0.54 - 0.46 * Math.cos((2.0 * Math.PI * k) / length);
  }
  return w;
}

/** Iterative radix-2 complex FFT, in place. Length must be a power of two. */
export function fftInPlace(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  if ((n & (n - 1)) !== 0) {
    throw new Error(`FFT length ${n} is not a power of two`);
  }
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      const tr = re[i];
      re[i] = re[j];
      re[j] = tr;
      const ti = im[i];
      im[i] = im[j];
      im[j] = ti;
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const angle = (-2.0 * Math.PI) / len;
    const wr = Math.cos(angle);
    const wi = Math.sin(angle);
    for (let i = 0; i < n; i += len) {
      let cr = 1.0;
      let ci = 0.0;
      for (let k = 0; k < len / 2; k++) {
        const ur = re[i + k];
        const ui = im[i + k];
        const vr = re[i + k + len / 2] * cr - im[i + k + len / 2] * ci;
        const vi = re[i + k + len / 2] * ci + im[i + k + len / 2] * cr;
        re[i + k] = ur + vr;
        im[i + k] = ui + vi;
        re[i + k + len / 2] = ur - vr;
        im[i + k + len / 2] = ui - vi;
        const ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

export function frameCount(nSamples: number, windowLen: number, hop: number): number {
  if (nSamples < windowLen) {
    throw new Error(`signal of ${nSamples} samples shorter than the ${windowLen}-sample window`);
  }
  return Math.ceil((nSamples - windowLen) / hop) + 1;
}

export function stft(samples: Float64Array, windowLen: number, hop: number): Spectrogram {
  const frames = frameCount(samples.length, windowLen, hop);
  const bins = windowLen / 2 + 1;
  const window = hammingWindow(windowLen);
  const out: Spectrogram = {
    re: new Float64Array(bins * frames),
    im: new Float64Array(bins * frames),
    bins,
    frames,
  };
  const bufRe = new Float64Array(windowLen);
  const bufIm = new Float64Array(windowLen);
  for (let j = 0; j < frames; j++) {
    const start = j * hop;
    for (let t = 0; t < windowLen; t++) {
      const s = start + t < samples.length ? samples[start + t] : 0.0;
      bufRe[t] = s * window[t];
      bufIm[t] = 0.0;
    }
    fftInPlace(bufRe, bufIm);
    for (let k = 0; k < bins; k++) {
      out.re[k * frames + j] = bufRe[k];
      out.im[k * frames + j] = bufIm[k];
    }
  }
  return out;
}

/** Column (frame) magnitudes are not needed; training uses complex columns. */
export function frameColumn(spec: Spectrogram, j: number): { re: Float64Array; im: Float64Array } {
  const re = new Float64Array(spec.bins);
  const im = new Float64Array(spec.bins);
  for (let k = 0; k < spec.bins; k++) {
    re[k] = spec.re[k * spec.frames + j];
    im[k] = spec.im[k * spec.frames + j];
  }
  return { re, im };
}
