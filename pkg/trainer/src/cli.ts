/**
 * Trainer CLI. Exit codes: 0 success, 1 usage error, 2 data error,
 * 3 internal failure. Diagnostics go to stderr; data goes to files.
 *
 *   train   --manifest m.csv --images dir --model vgg16 --epochs 100
 *           --batch 32 --seed 0 --out-dir runs/vgg16
 *           [--lr 1e-3] [--target-size 224] [--unfreeze-from block5]
 *           [--backbone-weights dir]
 *   predict --manifest m.csv --images dir --weights runs/vgg16 --out preds.csv
 */

import { initBackend } from "./backend";
import { MODEL_NAMES, ModelName } from "./models";
import { predict } from "./predict";
import { DEFAULT_CONFIG, train, TrainConfig } from "./train";

class UsageError extends Error {}

interface FlagSpec {
  required?: string[];
  optional?: string[];
}

function parseFlags(argv: string[], spec: FlagSpec): Map<string, string> {
  const known = new Set([...(spec.required ?? []), ...(spec.optional ?? [])]);
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--")) throw new UsageError(`expected a flag, got ${key}`);
    const name = key.slice(2);
    if (!known.has(name)) throw new UsageError(`unknown flag --${name}`);
    const value = argv[i + 1];
    if (value === undefined) throw new UsageError(`flag --${name} needs a value`);
    flags.set(name, value);
  }
  for (const name of spec.required ?? []) {
    if (!flags.has(name)) throw new UsageError(`missing required flag --${name}`);
  }
  return flags;
}

function intFlag(flags: Map<string, string>, name: string, fallback: number): number {
  const raw = flags.get(name);
  if (raw === undefined) return fallback;
  const v = Number(raw);
  if (!Number.isInteger(v)) throw new UsageError(`--${name} must be an integer, got ${raw}`);
  return v;
}

async function cmdTrain(argv: string[]): Promise<void> {
  const flags = parseFlags(argv, {
    required: ["manifest", "images", "model", "out-dir"],
    optional: ["epochs", "batch", "seed", "lr", "target-size", "unfreeze-from", "backbone-weights"],
  });
  const model = flags.get("model") as ModelName;
  if (!MODEL_NAMES.includes(model)) {
    throw new UsageError(`--model must be one of ${MODEL_NAMES.join("|")}`);
  }
  const cfg: TrainConfig = {
    model,
    epochs: intFlag(flags, "epochs", DEFAULT_CONFIG.epochs),
    batchSize: intFlag(flags, "batch", DEFAULT_CONFIG.batchSize),
    targetSize: intFlag(flags, "target-size", DEFAULT_CONFIG.targetSize),
    seed: intFlag(flags, "seed", DEFAULT_CONFIG.seed),
    learningRate: flags.has("lr") ? Number(flags.get("lr")) : DEFAULT_CONFIG.learningRate,
    ...(flags.has("unfreeze-from") ? { unfreezeFrom: flags.get("unfreeze-from")! } : {}),
    ...(flags.has("backbone-weights") ? { backboneWeights: flags.get("backbone-weights")! } : {}),
  };
  const backend = await initBackend();
  console.error(`backend: ${backend}`);
  const result = await train(flags.get("manifest")!, flags.get("images")!, cfg, flags.get("out-dir")!);
  console.error(
    `done: ${result.history.length} epochs, final train accuracy ${result.finalTrainAccuracy.toFixed(3)}`,
  );
}

async function cmdPredict(argv: string[]): Promise<void> {
  const flags = parseFlags(argv, {
    required: ["manifest", "images", "weights", "out"],
  });
  const backend = await initBackend();
  console.error(`backend: ${backend}`);
  const result = await predict(
    flags.get("manifest")!,
    flags.get("images")!,
    flags.get("weights")!,
    flags.get("out")!,
  );
  console.error(`wrote ${result.rows} prediction rows (${result.classCount} classes)`);
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    if (command === "train") {
      await cmdTrain(rest);
    } else if (command === "predict") {
      await cmdPredict(rest);
    } else {
      throw new UsageError("usage: trainer <train|predict> --flags... (see module docs)");
    }
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 1;
    }
    if (err instanceof Error && !("internal" in err)) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    console.error(err);
    return 3;
  }
}

if (require.main === module) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
