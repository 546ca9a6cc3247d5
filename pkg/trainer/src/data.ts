/**
 * Dataset assembly: manifest records -> batched image tensors -> cached
 * backbone features. Features are extracted once per image through the
 * frozen part, which is what makes head-only training cheap.
 */

import * as path from "path";
import * as tf from "@tensorflow/tfjs";

import { SampleRecord } from "./csv";
import { loadPng, toUnitTensorData } from "./png";

export interface FeatureSet {
  /** [n, ...featureShape] features through the frozen backbone. */
  features: tf.Tensor;
  labels: Int32Array;
  paths: string[];
}

export function loadImageBatch(
  imagesDir: string,
  records: SampleRecord[],
  targetSize: number,
): tf.Tensor4D {
  const data = new Float32Array(records.length * targetSize * targetSize * 3);
  records.forEach((record, i) => {
    const raw = loadPng(path.join(imagesDir, record.path));
    data.set(toUnitTensorData(raw, targetSize), i * targetSize * targetSize * 3);
  });
  const t = tf.tensor4d(data, [records.length, targetSize, targetSize, 3]);
  // pretrained-style stems expect 3 channels; the loader guarantees it
  if (t.shape[3] !== 3) throw new Error(`expected 3 input channels, got ${t.shape[3]}`);
  return t;
}

export async function extractFeatures(
  frozen: tf.LayersModel,
  imagesDir: string,
  records: SampleRecord[],
  labels: Int32Array,
  targetSize: number,
  batchSize: number,
  onProgress?: (done: number, total: number) => void,
): Promise<FeatureSet> {
  const chunks: tf.Tensor[] = [];
  for (let start = 0; start < records.length; start += batchSize) {
    const slice = records.slice(start, start + batchSize);
    const batch = loadImageBatch(imagesDir, slice, targetSize);
    const out = frozen.predict(batch) as tf.Tensor;
    const kept = out.clone();
    tf.dispose([batch, out]);
    chunks.push(kept);
    await tf.nextFrame();
    onProgress?.(Math.min(start + batchSize, records.length), records.length);
  }
  const features = tf.concat(chunks, 0);
  tf.dispose(chunks);
  return { features, labels, paths: records.map((r) => r.path) };
}

/** Scalar standardization constants from the training features; applied
 * identically at predict time (recorded in the weights artifact). */
export function featureMoments(features: tf.Tensor): { mean: number; std: number } {
  const { mean, variance } = tf.tidy(() => {
    const m = features.mean();
    const v = features.sub(m).square().mean();
    return { mean: m.dataSync()[0], variance: v.dataSync()[0] };
  });
  return { mean, std: Math.sqrt(Math.max(variance, 1e-12)) };
}

export function standardize(features: tf.Tensor, mean: number, std: number): tf.Tensor {
  return tf.tidy(() => features.sub(mean).div(std));
}
