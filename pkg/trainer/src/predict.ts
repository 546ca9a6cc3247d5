/**
 * Inference over the manifest's test split: rebuild the seeded backbone,
 * restore the trained variables, and emit the predictions CSV in manifest
 * order per the evaluation toolkit's contract.
 */

import * as fs from "fs";
import * as tf from "@tensorflow/tfjs";

import { classMapping, formatPredictions, parseManifest, PredictionRow } from "./csv";
import { extractFeatures, standardize } from "./data";
import { buildBackbone, buildHead, ModelName } from "./models";
import { loadWeightsMeta, restoreTrainedWeights } from "./weights";

export async function predict(
  manifestPath: string,
  imagesDir: string,
  weightsDir: string,
  outPath: string,
  quiet = false,
): Promise<{ rows: number; classCount: number }> {
  const log = quiet ? () => undefined : (msg: string) => console.error(msg);
  const meta = loadWeightsMeta(weightsDir);
  if (meta.backboneWeights) {
    throw new Error(
      "artifact was trained with external backbone weights; predict requires the same " +
        "weights directory to be wired in (not supported for externally-weighted artifacts)",
    );
  }

  const records = parseManifest(fs.readFileSync(manifestPath, "utf-8"));
  const testRecs = records.filter((r) => r.split === "test");
  if (testRecs.length === 0) throw new Error("manifest has no test-split records");
  const mapping = classMapping(records);
  if (mapping.size !== meta.classCount) {
    throw new Error(
      `manifest has ${mapping.size} classes but the weights artifact was trained with ${meta.classCount}`,
    );
  }

  const parts = buildBackbone(meta.model as ModelName, meta.targetSize, meta.seed, meta.unfreezeFrom);
  const headInputShape = parts.tail
    ? (parts.tail.outputShape.slice(1) as number[])
    : (parts.frozen.outputShape.slice(1) as number[]);
  const head = buildHead(headInputShape, meta.classCount, meta.seed);
  const trained = parts.tail ? [parts.tail, head] : [head];
  restoreTrainedWeights(weightsDir, meta, trained);

  const labels = Int32Array.from(testRecs, (r) => mapping.get(r.subjectId) ?? -1);
  log(`extracting features for ${testRecs.length} test images`);
  const set = await extractFeatures(parts.frozen, imagesDir, testRecs, labels, meta.targetSize, 8);
  const x = standardize(set.features, meta.featureMean, meta.featureStd);
  set.features.dispose();

  const probs = tf.tidy(() => {
    const mid = parts.tail ? (parts.tail.apply(x, { training: false }) as tf.Tensor) : x;
    const logits = head.apply(mid, { training: false }) as tf.Tensor;
    return tf.softmax(logits);
  });
  const probData = (await probs.data()) as Float32Array;
  tf.dispose([x, probs]);

  const rows: PredictionRow[] = testRecs.map((r, i) => ({
    path: r.path,
    trueLabel: labels[i],
    probs: normalizeRow(probData.subarray(i * meta.classCount, (i + 1) * meta.classCount)),
  }));
  if (rows.length !== testRecs.length) {
    throw new Error(`row count ${rows.length} does not match test split ${testRecs.length}`);
  }
  fs.writeFileSync(outPath, formatPredictions(rows, meta.classCount));
  return { rows: rows.length, classCount: meta.classCount };
}

/** float32 softmax rows can be ~1e-7 off; renormalize in float64 so the
 * evaluation toolkit's sum==1 +- 1e-6 validation always holds. */
function normalizeRow(row: Float32Array): number[] {
  let sum = 0;
  for (const v of row) sum += v;
  return Array.from(row, (v) => v / sum);
}
