/**
 * Head-only (optionally tail-unfrozen) transfer-learning loop over cached
 * backbone features, with the Nadam optimizer and categorical
 * cross-entropy, emitting the history JSON and weights artifact.
 */

import * as fs from "fs";
import * as path from "path";
import * as tf from "@tensorflow/tfjs";

import { classMapping, parseManifest, SampleRecord } from "./csv";
import { extractFeatures, featureMoments, standardize } from "./data";
import { buildBackbone, buildHead, ModelName, MODEL_NAMES } from "./models";
import { Nadam } from "./nadam";
import { mulberry32, shuffleInPlace } from "./rng";
import { saveTrainedWeights } from "./weights";

export interface TrainConfig {
  model: ModelName;
  epochs: number;
  batchSize: number;
  targetSize: number;
  seed: number;
  learningRate: number;
  unfreezeFrom?: string;
  backboneWeights?: string;
}

export const DEFAULT_CONFIG: Omit<TrainConfig, "model"> = {
  epochs: 100,
  batchSize: 32,
  targetSize: 224,
  seed: 0,
  learningRate: 1e-3,
};

export interface EpochStats {
  train_acc: number;
  train_loss: number;
  val_acc: number;
  val_loss: number;
}

export interface TrainResult {
  history: EpochStats[];
  classCount: number;
  finalTrainAccuracy: number;
}

function configEcho(cfg: TrainConfig, classCount: number) {
  return {
    model: cfg.model,
    epochs: cfg.epochs,
    batch_size: cfg.batchSize,
    optimizer: "nadam",
    loss: "categorical-crossentropy",
    target_size: [cfg.targetSize, cfg.targetSize],
    class_count: classCount,
    seed: cfg.seed,
    learning_rate: cfg.learningRate,
    ...(cfg.unfreezeFrom ? { unfreeze_from: cfg.unfreezeFrom } : {}),
    ...(cfg.backboneWeights ? { backbone_weights: cfg.backboneWeights } : {}),
  };
}

export function validateConfig(cfg: TrainConfig): void {
  if (!MODEL_NAMES.includes(cfg.model)) {
    throw new Error(`model must be one of ${MODEL_NAMES.join("|")}, got ${cfg.model}`);
  }
  if (cfg.epochs < 1) throw new Error(`epochs must be >= 1, got ${cfg.epochs}`);
  if (cfg.batchSize < 1) throw new Error(`batch size must be >= 1, got ${cfg.batchSize}`);
  if (cfg.targetSize < 32) throw new Error(`target size must be >= 32, got ${cfg.targetSize}`);
}

function splitRecords(records: SampleRecord[]): { train: SampleRecord[]; val: SampleRecord[] } {
  const train = records.filter((r) => r.split === "train");
  const val = records.filter((r) => r.split === "test");
  if (train.length === 0 || val.length === 0) {
    throw new Error(
      `manifest needs both splits (train=${train.length}, test=${val.length}); run the split command first`,
    );
  }
  return { train, val };
}

/** Drop the batch dimension of a layers-model output shape. */
export function shapeTail(shape: tf.Shape | tf.Shape[]): number[] {
  const s = (Array.isArray(shape[0]) ? (shape as tf.Shape[])[0] : (shape as tf.Shape)).slice(1);
  return s.map((d) => {
    if (d === null) throw new Error("unexpected dynamic dimension in model output shape");
    return d;
  });
}

function labelsFor(records: SampleRecord[], mapping: Map<number, number>): Int32Array {
  return Int32Array.from(records, (r) => {
    const label = mapping.get(r.subjectId);
    if (label === undefined) throw new Error(`${r.path}: subject ${r.subjectId} not in mapping`);
    return label;
  });
}

async function loadExternalBackbone(dir: string): Promise<tf.LayersModel> {
  const modelPath = path.join(dir, "model.json");
  if (!fs.existsSync(modelPath)) throw new Error(`${modelPath}: no such file`);
  const doc = JSON.parse(fs.readFileSync(modelPath, "utf-8"));
  const manifest = doc.weightsManifest as Array<{ paths: string[]; weights: tf.io.WeightsManifestEntry[] }>;
  const specs: tf.io.WeightsManifestEntry[] = [];
  const buffers: Buffer[] = [];
  for (const group of manifest) {
    specs.push(...group.weights);
    for (const p of group.paths) {
      buffers.push(fs.readFileSync(path.join(dir, p)));
    }
  }
  const data = Buffer.concat(buffers);
  const model = await tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: doc.modelTopology,
      weightSpecs: specs,
      weightData: data.buffer.slice(data.byteOffset, data.byteOffset + data.byteLength),
    }),
  );
  model.trainable = false;
  return model;
}

export async function train(
  manifestPath: string,
  imagesDir: string,
  cfg: TrainConfig,
  outDir: string,
  quiet = false,
): Promise<TrainResult> {
  validateConfig(cfg);
  const log = quiet ? () => undefined : (msg: string) => console.error(msg);

  const records = parseManifest(fs.readFileSync(manifestPath, "utf-8"));
  const { train: trainRecs, val: valRecs } = splitRecords(records);
  const mapping = classMapping(records);
  const classCount = mapping.size;

  let frozen: tf.LayersModel;
  let tail: tf.LayersModel | null = null;
  if (cfg.backboneWeights) {
    if (cfg.unfreezeFrom) {
      throw new Error("--unfreeze-from is only supported with the built-in seeded backbone");
    }
    log(`loading backbone weights from ${cfg.backboneWeights}`);
    frozen = await loadExternalBackbone(cfg.backboneWeights);
  } else {
    log(
      `warning: no pretrained weights available; using a seeded random ${cfg.model} backbone ` +
        `(seed ${cfg.seed}) as a deterministic stand-in`,
    );
    const parts = buildBackbone(cfg.model, cfg.targetSize, cfg.seed, cfg.unfreezeFrom);
    frozen = parts.frozen;
    tail = parts.tail;
  }

  log(`extracting features for ${trainRecs.length} train / ${valRecs.length} val images`);
  const featBatch = Math.min(cfg.batchSize, 8);
  const trainSet = await extractFeatures(
    frozen, imagesDir, trainRecs, labelsFor(trainRecs, mapping), cfg.targetSize, featBatch,
    (done, total) => log(`  train features ${done}/${total}`),
  );
  const valSet = await extractFeatures(
    frozen, imagesDir, valRecs, labelsFor(valRecs, mapping), cfg.targetSize, featBatch,
    (done, total) => log(`  val features ${done}/${total}`),
  );

  const moments = featureMoments(trainSet.features);
  const xTrain = standardize(trainSet.features, moments.mean, moments.std);
  const xVal = standardize(valSet.features, moments.mean, moments.std);
  tf.dispose([trainSet.features, valSet.features]);

  const featureShape = xTrain.shape.slice(1);
  const headInputShape = tail ? shapeTail(tail.outputShape) : featureShape;
  const head = buildHead(headInputShape, classCount, cfg.seed);
  const trainable: tf.LayersModel[] = tail ? [tail, head] : [head];

  const forward = (x: tf.Tensor, training: boolean): tf.Tensor => {
    const mid = tail ? (tail.apply(x, { training }) as tf.Tensor) : x;
    return head.apply(mid, { training }) as tf.Tensor;
  };

  const varsByName: Record<string, tf.Variable> = {};
  const varList: tf.Variable[] = [];
  for (const model of trainable) {
    for (const w of model.trainableWeights) {
      // LayerVariable types its backing tf.Variable as protected; reach it anyway
      const variable = (w as unknown as { val: tf.Variable }).val;
      varsByName[variable.name] = variable;
      varList.push(variable);
    }
  }

  const optimizer = new Nadam(cfg.learningRate);
  const yTrain = tf.oneHot(tf.tensor1d(trainSet.labels, "int32"), classCount);
  const yVal = tf.oneHot(tf.tensor1d(valSet.labels, "int32"), classCount);

  const evaluate = (x: tf.Tensor, y: tf.Tensor, labels: Int32Array): { loss: number; acc: number } =>
    tf.tidy(() => {
      const logits = forward(x, false);
      const loss = tf.losses.softmaxCrossEntropy(y, logits).dataSync()[0];
      const pred = logits.argMax(-1).dataSync() as Int32Array;
      let correct = 0;
      for (let i = 0; i < labels.length; i++) if (pred[i] === labels[i]) correct += 1;
      return { loss, acc: correct / labels.length };
    });

  const history: EpochStats[] = [];
  const rand = mulberry32(cfg.seed * 2654435761 + 1);
  const n = trainRecs.length;
  for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
    const order = Array.from({ length: n }, (_, i) => i);
    shuffleInPlace(order, rand);
    let lossSum = 0;
    let correct = 0;
    for (let start = 0; start < n; start += cfg.batchSize) {
      const idx = order.slice(start, start + cfg.batchSize);
      const idxTensor = tf.tensor1d(idx, "int32");
      const xBatch = tf.gather(xTrain, idxTensor);
      const yBatch = tf.gather(yTrain, idxTensor);
      const batchLabels = idx.map((i) => trainSet.labels[i]);

      const { value, grads } = tf.variableGrads(() => {
        const logits = forward(xBatch, true);
        return tf.losses.softmaxCrossEntropy(yBatch, logits) as tf.Scalar;
      }, varList);
      optimizer.applyGradients(grads, varsByName);
      lossSum += value.dataSync()[0] * idx.length;
      const pred = tf.tidy(() => forward(xBatch, false).argMax(-1).dataSync() as Int32Array);
      for (let i = 0; i < idx.length; i++) if (pred[i] === batchLabels[i]) correct += 1;
      tf.dispose([value, idxTensor, xBatch, yBatch]);
      tf.dispose(grads);
    }
    const val = evaluate(xVal, yVal, valSet.labels);
    const stats: EpochStats = {
      train_acc: correct / n,
      train_loss: lossSum / n,
      val_acc: val.acc,
      val_loss: val.loss,
    };
    history.push(stats);
    log(
      `epoch ${epoch}/${cfg.epochs}: train acc ${stats.train_acc.toFixed(3)} ` +
        `loss ${stats.train_loss.toFixed(4)} | val acc ${stats.val_acc.toFixed(3)} ` +
        `loss ${stats.val_loss.toFixed(4)}`,
    );
  }

  fs.mkdirSync(outDir, { recursive: true });
  const historyDoc = {
    model: cfg.model,
    config: configEcho(cfg, classCount),
    epochs: history,
  };
  fs.writeFileSync(path.join(outDir, "history.json"), JSON.stringify(historyDoc, null, 2) + "\n");
  saveTrainedWeights(
    outDir,
    {
      model: cfg.model,
      classCount,
      targetSize: cfg.targetSize,
      seed: cfg.seed,
      ...(cfg.unfreezeFrom ? { unfreezeFrom: cfg.unfreezeFrom } : {}),
      ...(cfg.backboneWeights ? { backboneWeights: cfg.backboneWeights } : {}),
      featureMean: moments.mean,
      featureStd: moments.std,
    },
    trainable,
  );

  optimizer.dispose();
  tf.dispose([xTrain, xVal, yTrain, yVal]);
  return {
    history,
    classCount,
    finalTrainAccuracy: history[history.length - 1].train_acc,
  };
}
