/**
 * Directional comparison (report-only, not a gate): run the micro-benchmark
 * dataset through both image pipelines via the evaluation toolkit's CLI,
 * train the same VGG-16 head on each arm, and report whether the
 * enhancement arm's test accuracy matches or beats the augmentation arm's.
 */

import { spawnSync } from "node:child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { initBackend } from "../src/backend";
import { generateMicroDataset } from "../src/microdata";
import { predict } from "../src/predict";
import { train, TrainConfig } from "../src/train";

function runPrimary(args: string[]): void {
  const proc = spawnSync("python3", ["-m", "touchprint.cli", ...args], { encoding: "utf-8" });
  if (proc.status !== 0) {
    throw new Error(`touchprint ${args[0]} failed (exit ${proc.status}):\n${proc.stderr}`);
  }
}

interface ArmResult {
  name: string;
  trainAcc: number;
  summary: { accuracy: number; loss: number; f1: number };
  summaryPath: string;
}

async function runArm(
  name: string,
  pipelineCmd: "augment" | "enhance",
  fraction: string,
  scanManifest: string,
  imagesRoot: string,
  workDir: string,
): Promise<ArmResult> {
  const outDir = path.join(workDir, name);
  const pipeManifest = path.join(workDir, `${name}.csv`);
  runPrimary([
    pipelineCmd, "--manifest", scanManifest, "--images", imagesRoot,
    "--out-dir", outDir, "--out-manifest", pipeManifest, "--jobs", "1",
  ]);
  const splitManifest = path.join(workDir, `${name}_split.csv`);
  runPrimary(["split", "--manifest", pipeManifest, "--fraction", fraction, "--seed", "7", "--out", splitManifest]);

  const cfg: TrainConfig = {
    model: "vgg16",
    epochs: 5,
    batchSize: 8,
    targetSize: 224,
    seed: 7,
    learningRate: 1e-2,
  };
  const runDir = path.join(workDir, `${name}_run`);
  const result = await train(splitManifest, outDir, cfg, runDir);

  const predsPath = path.join(workDir, `${name}_preds.csv`);
  await predict(splitManifest, outDir, runDir, predsPath);

  const summaryPath = path.join(workDir, `${name}_summary.json`);
  const k = String(result.classCount);
  runPrimary(["evaluate", "--predictions", predsPath, "--classes", k, "--model", `vgg16-${name}`, "--out", summaryPath]);
  const summary = JSON.parse(fs.readFileSync(summaryPath, "utf-8"));
  return { name, trainAcc: result.finalTrainAccuracy, summary, summaryPath };
}

async function main(): Promise<void> {
  const backend = await initBackend();
  console.error(`backend: ${backend}`);
  const workDir = fs.mkdtempSync(path.join(os.tmpdir(), "directional-"));
  const imagesRoot = path.join(workDir, "data");
  generateMicroDataset(imagesRoot, {
    classes: 10,
    samplesPerClass: 4,
    width: 170,
    height: 260,
    seed: 99,
    testSamples: [], // splits come from the toolkit's split command
    rgb: true,
  });
  const scanManifest = path.join(workDir, "scan.csv");
  runPrimary(["scan", "--root", imagesRoot, "--out", scanManifest]);

  const direct = await runArm("direct", "augment", "0.666667", scanManifest, imagesRoot, workDir);
  const indirect = await runArm("indirect", "enhance", "0.75", scanManifest, imagesRoot, workDir);

  // the comparison pairs rows by model name: give both arms the shared name
  const shared = (p: string) => {
    const doc = JSON.parse(fs.readFileSync(p, "utf-8"));
    doc.model = "VGG-16";
    fs.writeFileSync(p, JSON.stringify(doc, null, 2) + "\n");
  };
  shared(direct.summaryPath);
  shared(indirect.summaryPath);
  const reportPath = path.join(workDir, "comparison.txt");
  runPrimary([
    "report",
    "--without", direct.summaryPath,
    "--with", indirect.summaryPath,
    "--out", reportPath,
  ]);

  const lines = [
    "Directional check (report-only): enhancement arm vs augmentation arm",
    "model: vgg16 head-only, 5 epochs, batch 8, lr 1e-2, seed 7, seeded random backbone",
    "",
    `direct   (augment,  split 2/3): train acc ${direct.trainAcc.toFixed(3)}, ` +
      `test acc ${direct.summary.accuracy.toFixed(3)}, loss ${direct.summary.loss.toFixed(3)}, f1 ${direct.summary.f1.toFixed(3)}`,
    `indirect (enhance,  split 3/4): train acc ${indirect.trainAcc.toFixed(3)}, ` +
      `test acc ${indirect.summary.accuracy.toFixed(3)}, loss ${indirect.summary.loss.toFixed(3)}, f1 ${indirect.summary.f1.toFixed(3)}`,
    "",
    indirect.summary.accuracy >= direct.summary.accuracy
      ? "direction HOLDS: enhanced-pipeline test accuracy >= direct-pipeline test accuracy"
      : "direction DOES NOT HOLD on this run (report-only; not a gate)",
    "",
    fs.readFileSync(reportPath, "utf-8"),
  ];
  const text = lines.join("\n");
  console.log(text);
  fs.writeFileSync(path.join(__dirname, "..", "..", "directional-report.txt"), text + "\n");
}

main().catch((err) => {
  console.error(err);
  process.exitCode = 1;
});
