/**
 * Weights artifact: a JSON descriptor plus a raw float32 blob holding the
 * trained variables (head, and tail segments when unfrozen). The frozen
 * backbone is reproduced from its seed at load time, so only what trained
 * is persisted. (Pure tfjs has no file:// model IO handlers in Node.)
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";

export interface WeightsMeta {
  model: string;
  classCount: number;
  targetSize: number;
  seed: number;
  unfreezeFrom?: string;
  backboneWeights?: string;
  featureMean: number;
  featureStd: number;
  variables: Array<{ name: string; shape: number[]; offset: number; length: number }>;
}

export function saveTrainedWeights(
  outDir: string,
  meta: Omit<WeightsMeta, "variables">,
  models: tf.LayersModel[],
): void {
  const entries: WeightsMeta["variables"] = [];
  const buffers: Float32Array[] = [];
  let offset = 0;
  for (const model of models) {
    for (const w of model.weights) {
      const data = w.read().dataSync() as Float32Array;
      entries.push({ name: w.name, shape: w.shape.slice() as number[], offset, length: data.length });
      buffers.push(Float32Array.from(data));
      offset += data.length;
    }
  }
  const blob = new Float32Array(offset);
  let pos = 0;
  for (const b of buffers) {
    blob.set(b, pos);
    pos += b.length;
  }
  fs.mkdirSync(outDir, { recursive: true });
  fs.writeFileSync(path.join(outDir, "weights.bin"), Buffer.from(blob.buffer));
  const doc: WeightsMeta = { ...meta, variables: entries };
  fs.writeFileSync(path.join(outDir, "weights.json"), JSON.stringify(doc, null, 2) + "\n");
}

export function loadWeightsMeta(dir: string): WeightsMeta {
  const p = path.join(dir, "weights.json");
  if (!fs.existsSync(p)) throw new Error(`${p}: no such file`);
  return JSON.parse(fs.readFileSync(p, "utf-8")) as WeightsMeta;
}

export function restoreTrainedWeights(dir: string, meta: WeightsMeta, models: tf.LayersModel[]): void {
  const raw = fs.readFileSync(path.join(dir, "weights.bin"));
  const blob = new Float32Array(raw.buffer, raw.byteOffset, raw.byteLength / 4);
  // tfjs uniquifies layer names per process, so restore positionally:
  // model reconstruction is deterministic, making order + shape the identity
  const targets: tf.LayerVariable[] = [];
  for (const model of models) {
    targets.push(...model.weights);
  }
  if (targets.length !== meta.variables.length) {
    throw new Error(
      `weights artifact holds ${meta.variables.length} variables, model needs ${targets.length}`,
    );
  }
  targets.forEach((w, i) => {
    const entry = meta.variables[i];
    if (JSON.stringify(w.shape) !== JSON.stringify(entry.shape)) {
      throw new Error(
        `variable ${i} (${w.name}) shape ${JSON.stringify(w.shape)} does not match ` +
          `artifact ${entry.name} ${JSON.stringify(entry.shape)}`,
      );
    }
    const data = blob.subarray(entry.offset, entry.offset + entry.length);
    w.write(tf.tensor(Array.from(data), entry.shape));
  });
}
