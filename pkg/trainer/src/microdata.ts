/**
 * Synthetic micro-dataset: each class is a ridge grating with its own
 * spatial frequency and orientation; samples within a class vary phase and
 * noise. Used by the micro-benchmark test and the directional comparison.
 */

import * as fs from "fs";
import * as path from "path";

import { MANIFEST_HEADER } from "./csv";
import { writeGrayPng, writeTintedPng } from "./png";
import { mulberry32 } from "./rng";

export interface MicroDatasetOptions {
  classes: number;
  samplesPerClass: number; // <= 4 to honor the manifest's sample_idx range
  width: number;
  height: number;
  seed: number;
  /** sample indices assigned to the test split (the rest train) */
  testSamples: number[];
  /** write tinted RGB captures instead of grayscale (needed by the
   * photometric augmentation pipeline, whose color variant is RGB-only) */
  rgb?: boolean;
}

export function generateMicroDataset(root: string, opts: MicroDatasetOptions): string {
  const rand = mulberry32(opts.seed);
  const lines = [MANIFEST_HEADER];
  fs.mkdirSync(root, { recursive: true });
  for (let c = 0; c < opts.classes; c++) {
    const subject = c + 1;
    const dir = path.join(root, String(subject));
    fs.mkdirSync(dir, { recursive: true });
    const freq = 0.12 + 0.055 * c; // distinct ridge frequency per class
    const theta = (c * Math.PI) / opts.classes; // distinct orientation per class
    const cos = Math.cos(theta);
    const sin = Math.sin(theta);
    for (let s = 1; s <= opts.samplesPerClass; s++) {
      const phase = rand() * 2 * Math.PI;
      const gray = new Uint8Array(opts.width * opts.height);
      for (let y = 0; y < opts.height; y++) {
        for (let x = 0; x < opts.width; x++) {
          const u = x * cos + y * sin;
          const ridge = Math.sin(freq * u + phase);
          const noise = (rand() - 0.5) * 20;
          const v = 128 + 100 * ridge + noise;
          gray[y * opts.width + x] = Math.max(0, Math.min(255, Math.round(v)));
        }
      }
      const name = `grating_${s}.png`;
      const writer = opts.rgb ? writeTintedPng : writeGrayPng;
      writer(path.join(dir, name), opts.width, opts.height, gray);
      const split = opts.testSamples.includes(s) ? "test" : "train";
      lines.push(`${subject}/${name},${subject},${s},touchless,${split}`);
    }
  }
  const manifestPath = path.join(root, "manifest.csv");
  fs.writeFileSync(manifestPath, lines.join("\n") + "\n");
  return manifestPath;
}
