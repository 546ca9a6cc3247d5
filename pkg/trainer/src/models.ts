/**
 * Backbone topologies (VGG-16, VGG-19, ResNet-50, Inception-V3) built from
 * tfjs layers as ordered segments, so the freeze boundary can sit at any
 * segment edge. Weights come from a local saved model when provided;
 * otherwise every initializer is seeded, giving a deterministic random
 * backbone (clearly warned about: it is a stand-in when the published
 * pretrained weights are not available on disk).
 */

import * as tf from "@tensorflow/tfjs";

export const MODEL_NAMES = ["vgg16", "vgg19", "resnet50", "inceptionv3"] as const;
export type ModelName = (typeof MODEL_NAMES)[number];

export interface Segment {
  name: string;
  apply: (x: tf.SymbolicTensor) => tf.SymbolicTensor;
}

let seedCounter = 0;

function seeded(seed: number): number {
  seedCounter += 1;
  return (seed * 9973 + seedCounter * 7919) % 2147483647;
}

function conv(
  seed: number,
  filters: number,
  kernel: number | [number, number],
  opts: { strides?: number | [number, number]; padding?: "same" | "valid"; name?: string } = {},
) {
  return tf.layers.conv2d({
    filters,
    kernelSize: kernel,
    strides: opts.strides ?? 1,
    padding: opts.padding ?? "same",
    activation: "relu",
    kernelInitializer: tf.initializers.heNormal({ seed: seeded(seed) }),
    biasInitializer: "zeros",
    name: opts.name,
  });
}

// --- VGG ---------------------------------------------------------------

function vggSegments(seed: number, blocks: number[]): Segment[] {
  const widths = [64, 128, 256, 512, 512];
  return blocks.map((convCount, b) => ({
    name: `block${b + 1}`,
    apply: (x: tf.SymbolicTensor) => {
      let h = x;
      for (let i = 0; i < convCount; i++) {
        h = conv(seed, widths[b], 3, { name: `block${b + 1}_conv${i + 1}` }).apply(h) as tf.SymbolicTensor;
      }
      return tf.layers
        .maxPooling2d({ poolSize: 2, strides: 2, name: `block${b + 1}_pool` })
        .apply(h) as tf.SymbolicTensor;
    },
  }));
}

// --- ResNet-50 -----------------------------------------------------------

function convBn(
  seed: number,
  filters: number,
  kernel: number | [number, number],
  opts: { strides?: number | [number, number]; padding?: "same" | "valid" } = {},
) {
  return (x: tf.SymbolicTensor): tf.SymbolicTensor => {
    let h = tf.layers
      .conv2d({
        filters,
        kernelSize: kernel,
        strides: opts.strides ?? 1,
        padding: opts.padding ?? "same",
        useBias: false,
        kernelInitializer: tf.initializers.heNormal({ seed: seeded(seed) }),
      })
      .apply(x) as tf.SymbolicTensor;
    h = tf.layers.batchNormalization({}).apply(h) as tf.SymbolicTensor;
    return tf.layers.reLU().apply(h) as tf.SymbolicTensor;
  };
}

function bottleneck(seed: number, filters: number, stride: number, project: boolean) {
  return (x: tf.SymbolicTensor): tf.SymbolicTensor => {
    let h = convBn(seed, filters, 1, { strides: stride })(x);
    h = convBn(seed, filters, 3)(h);
    h = tf.layers
      .conv2d({
        filters: filters * 4,
        kernelSize: 1,
        useBias: false,
        kernelInitializer: tf.initializers.heNormal({ seed: seeded(seed) }),
      })
      .apply(h) as tf.SymbolicTensor;
    h = tf.layers.batchNormalization({}).apply(h) as tf.SymbolicTensor;
    let shortcut = x;
    if (project) {
      shortcut = tf.layers
        .conv2d({
          filters: filters * 4,
          kernelSize: 1,
          strides: stride,
          useBias: false,
          kernelInitializer: tf.initializers.heNormal({ seed: seeded(seed) }),
        })
        .apply(x) as tf.SymbolicTensor;
      shortcut = tf.layers.batchNormalization({}).apply(shortcut) as tf.SymbolicTensor;
    }
    const sum = tf.layers.add().apply([h, shortcut]) as tf.SymbolicTensor;
    return tf.layers.reLU().apply(sum) as tf.SymbolicTensor;
  };
}

function resnet50Segments(seed: number): Segment[] {
  const stages: Array<[number, number, number]> = [
    // [filters, blocks, first stride]
    [64, 3, 1],
    [128, 4, 2],
    [256, 6, 2],
    [512, 3, 2],
  ];
  const segments: Segment[] = [
    {
      name: "stem",
      apply: (x) => {
        let h = convBn(seed, 64, 7, { strides: 2 })(x);
        return tf.layers
          .maxPooling2d({ poolSize: 3, strides: 2, padding: "same" })
          .apply(h) as tf.SymbolicTensor;
      },
    },
  ];
  stages.forEach(([filters, blocks, stride], s) => {
    segments.push({
      name: `stage${s + 1}`,
      apply: (x) => {
        let h = bottleneck(seed, filters, stride, true)(x);
        for (let b = 1; b < blocks; b++) {
          h = bottleneck(seed, filters, 1, false)(h);
        }
        return h;
      },
    });
  });
  return segments;
}

// --- Inception-V3 -----------------------------------------------------------

function inceptionSegments(seed: number): Segment[] {
  const cb = (f: number, k: number | [number, number], opts: Parameters<typeof convBn>[3] = {}) =>
    convBn(seed, f, k, opts);

  function mixedA(x: tf.SymbolicTensor, poolFilters: number): tf.SymbolicTensor {
    const b0 = cb(64, 1)(x);
    const b1 = cb(64, 5)(cb(48, 1)(x));
    const b2 = cb(96, 3)(cb(96, 3)(cb(64, 1)(x)));
    const pool = tf.layers.averagePooling2d({ poolSize: 3, strides: 1, padding: "same" }).apply(x) as tf.SymbolicTensor;
    const b3 = cb(poolFilters, 1)(pool);
    return tf.layers.concatenate().apply([b0, b1, b2, b3]) as tf.SymbolicTensor;
  }

  function mixedB(x: tf.SymbolicTensor): tf.SymbolicTensor {
    // 35x35 -> 17x17 reduction
    const b0 = cb(384, 3, { strides: 2, padding: "valid" })(x);
    const b1 = cb(96, 3, { strides: 2, padding: "valid" })(cb(96, 3)(cb(64, 1)(x)));
    const pool = tf.layers.maxPooling2d({ poolSize: 3, strides: 2 }).apply(x) as tf.SymbolicTensor;
    return tf.layers.concatenate().apply([b0, b1, pool]) as tf.SymbolicTensor;
  }

  function mixedC(x: tf.SymbolicTensor, c7: number): tf.SymbolicTensor {
    const b0 = cb(192, 1)(x);
    const b1 = cb(192, [1, 7])(cb(c7, [7, 1])(cb(c7, 1)(x)));
    let b2 = cb(c7, 1)(x);
    b2 = cb(c7, [7, 1])(b2);
    b2 = cb(c7, [1, 7])(b2);
    b2 = cb(c7, [7, 1])(b2);
    b2 = cb(192, [1, 7])(b2);
    const pool = tf.layers.averagePooling2d({ poolSize: 3, strides: 1, padding: "same" }).apply(x) as tf.SymbolicTensor;
    const b3 = cb(192, 1)(pool);
    return tf.layers.concatenate().apply([b0, b1, b2, b3]) as tf.SymbolicTensor;
  }

  function mixedD(x: tf.SymbolicTensor): tf.SymbolicTensor {
    // 17x17 -> 8x8 reduction
    const b0 = cb(320, 3, { strides: 2, padding: "valid" })(cb(192, 1)(x));
    let b1 = cb(192, 1)(x);
    b1 = cb(192, [1, 7])(b1);
    b1 = cb(192, [7, 1])(b1);
    b1 = cb(192, 3, { strides: 2, padding: "valid" })(b1);
    const pool = tf.layers.maxPooling2d({ poolSize: 3, strides: 2 }).apply(x) as tf.SymbolicTensor;
    return tf.layers.concatenate().apply([b0, b1, pool]) as tf.SymbolicTensor;
  }

  function mixedE(x: tf.SymbolicTensor): tf.SymbolicTensor {
    const b0 = cb(320, 1)(x);
    const b1in = cb(384, 1)(x);
    const b1 = tf.layers
      .concatenate()
      .apply([cb(384, [1, 3])(b1in), cb(384, [3, 1])(b1in)]) as tf.SymbolicTensor;
    const b2in = cb(384, 3)(cb(448, 1)(x));
    const b2 = tf.layers
      .concatenate()
      .apply([cb(384, [1, 3])(b2in), cb(384, [3, 1])(b2in)]) as tf.SymbolicTensor;
    const pool = tf.layers.averagePooling2d({ poolSize: 3, strides: 1, padding: "same" }).apply(x) as tf.SymbolicTensor;
    const b3 = cb(192, 1)(pool);
    return tf.layers.concatenate().apply([b0, b1, b2, b3]) as tf.SymbolicTensor;
  }

  const segments: Segment[] = [
    {
      name: "stem",
      apply: (x) => {
        let h = cb(32, 3, { strides: 2, padding: "valid" })(x);
        h = cb(32, 3, { padding: "valid" })(h);
        h = cb(64, 3)(h);
        h = tf.layers.maxPooling2d({ poolSize: 3, strides: 2 }).apply(h) as tf.SymbolicTensor;
        h = cb(80, 1, { padding: "valid" })(h);
        h = cb(192, 3, { padding: "valid" })(h);
        return tf.layers.maxPooling2d({ poolSize: 3, strides: 2 }).apply(h) as tf.SymbolicTensor;
      },
    },
    { name: "mixed0", apply: (x) => mixedA(x, 32) },
    { name: "mixed1", apply: (x) => mixedA(x, 64) },
    { name: "mixed2", apply: (x) => mixedA(x, 64) },
    { name: "mixed3", apply: (x) => mixedB(x) },
    { name: "mixed4", apply: (x) => mixedC(x, 128) },
    { name: "mixed5", apply: (x) => mixedC(x, 160) },
    { name: "mixed6", apply: (x) => mixedC(x, 160) },
    { name: "mixed7", apply: (x) => mixedC(x, 192) },
    { name: "mixed8", apply: (x) => mixedD(x) },
    { name: "mixed9", apply: (x) => mixedE(x) },
    { name: "mixed10", apply: (x) => mixedE(x) },
  ];
  return segments;
}

// --- assembly ------------------------------------------------------------

export function backboneSegments(model: ModelName, seed: number): Segment[] {
  seedCounter = 0; // topology construction is deterministic per (model, seed)
  switch (model) {
    case "vgg16":
      return vggSegments(seed, [2, 2, 3, 3, 3]);
    case "vgg19":
      return vggSegments(seed, [2, 2, 4, 4, 4]);
    case "resnet50":
      return resnet50Segments(seed);
    case "inceptionv3":
      return inceptionSegments(seed);
    default:
      throw new Error(`unknown model ${model}; expected one of ${MODEL_NAMES.join(", ")}`);
  }
}

export interface BackboneParts {
  /** Frozen feature extractor (may be the whole backbone). */
  frozen: tf.LayersModel;
  /** Trainable remainder; null when only the classification head trains. */
  tail: tf.LayersModel | null;
  segmentNames: string[];
  freezeBoundary: number;
}

/**
 * Build the backbone split at `unfreezeFrom` (a segment name, e.g.
 * "block5"); everything before it is frozen. Default: all segments frozen.
 */
export function buildBackbone(
  model: ModelName,
  targetSize: number,
  seed: number,
  unfreezeFrom?: string,
): BackboneParts {
  const segments = backboneSegments(model, seed);
  const names = segments.map((s) => s.name);
  let boundary = segments.length;
  if (unfreezeFrom !== undefined) {
    boundary = names.indexOf(unfreezeFrom);
    if (boundary < 0) {
      throw new Error(`unknown segment ${unfreezeFrom}; available: ${names.join(", ")}`);
    }
  }

  const input = tf.input({ shape: [targetSize, targetSize, 3] });
  let h = input;
  for (const seg of segments.slice(0, boundary)) {
    h = seg.apply(h);
  }
  const frozen = tf.model({ inputs: input, outputs: h, name: `${model}_frozen` });
  frozen.trainable = false;

  let tail: tf.LayersModel | null = null;
  if (boundary < segments.length) {
    const tailInput = tf.input({ shape: frozen.outputShape.slice(1) as number[] });
    let t = tailInput;
    for (const seg of segments.slice(boundary)) {
      t = seg.apply(t);
    }
    tail = tf.model({ inputs: tailInput, outputs: t, name: `${model}_tail` });
  }
  return { frozen, tail, segmentNames: names, freezeBoundary: boundary };
}

/**
 * Classification head: global average pooling over the spatial feature map
 * followed by a K-way softmax (emitted as logits). Pooling keeps the head's
 * input at backbone-width (512/2048) rather than flattened 25k dims, which
 * an adaptive optimizer needs for sane per-step logit movement.
 */
export function buildHead(featureShape: number[], classCount: number, seed: number): tf.LayersModel {
  const input = tf.input({ shape: featureShape });
  let h = input as tf.SymbolicTensor;
  if (featureShape.length === 3) {
    h = tf.layers.globalAveragePooling2d({}).apply(h) as tf.SymbolicTensor;
  } else if (featureShape.length > 1) {
    h = tf.layers.flatten().apply(h) as tf.SymbolicTensor;
  }
  const logits = tf.layers
    .dense({
      units: classCount,
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 17 }),
      biasInitializer: "zeros",
      name: "classifier_logits",
    })
    .apply(h) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: logits, name: "head" });
}
