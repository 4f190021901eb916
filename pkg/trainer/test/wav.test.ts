import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { describe, expect, it } from "vitest";

import { Rng } from "../src/random";
import { readWav, writeWavFloat32 } from "../src/wav";

describe("wav", () => {
  it("float32 round trip preserves samples exactly", () => {
    const rng = new Rng(1);
    const samples = new Float64Array(500);
    for (let t = 0; t < samples.length; t++) samples[t] = Math.fround(rng.uniform(-0.9, 0.9));
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "wav-"));
    const file = path.join(dir, "x.wav");
    writeWavFloat32(file, { channels: [samples], sampleRate: 8000 });
    const back = readWav(file);
    expect(back.sampleRate).toBe(8000);
    expect(back.channels.length).toBe(1);
    expect(Array.from(back.channels[0])).toEqual(Array.from(samples));
  });

  it("rejects non-wav files", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "wav-"));
    const file = path.join(dir, "x.wav");
    fs.writeFileSync(file, Buffer.from("not a wav at all, sorry"));
    expect(() => readWav(file)).toThrow(/RIFF/);
  });
});
