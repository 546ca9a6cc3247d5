import assert from "node:assert/strict";
import { test } from "node:test";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { classMapping, formatPredictions, MANIFEST_HEADER, parseManifest } from "../src/csv";
import { loadPng, toUnitTensorData, writeGrayPng } from "../src/png";
import { mulberry32, shuffleInPlace } from "../src/rng";

test("manifest parses and preserves order", () => {
  const text =
    MANIFEST_HEADER +
    "\n2/b.png,2,1,touchless,test\n1/a.png,1,1,touchless,train\n";
  const records = parseManifest(text);
  assert.equal(records.length, 2);
  assert.equal(records[0].path, "2/b.png");
  assert.equal(records[1].subjectId, 1);
});

test("manifest rejects bad header and duplicates", () => {
  assert.throws(() => parseManifest("nope\n"), /header/);
  const dup = MANIFEST_HEADER + "\na.png,1,1,touchless,train\na.png,1,2,touchless,train\n";
  assert.throws(() => parseManifest(dup), /duplicate/);
  const short = MANIFEST_HEADER + "\na.png,1,1,touchless\n";
  assert.throws(() => parseManifest(short), /5 fields/);
});

test("class mapping is sorted and dense", () => {
  const records = parseManifest(
    MANIFEST_HEADER +
      "\nx.png,30,1,touchless,train\ny.png,4,1,touchless,train\nz.png,30,2,touchless,test\n",
  );
  const mapping = classMapping(records);
  assert.equal(mapping.size, 2);
  assert.equal(mapping.get(4), 0);
  assert.equal(mapping.get(30), 1);
});

test("predictions CSV matches the evaluation contract", () => {
  const text = formatPredictions(
    [
      { path: "a.png", trueLabel: 0, probs: [0.75, 0.25] },
      { path: "b.png", trueLabel: 1, probs: [0.5, 0.5] },
    ],
    2,
  );
  const lines = text.trimEnd().split("\n");
  assert.equal(lines[0], "path,true_label,p0,p1");
  assert.equal(lines[1], "a.png,0,0.75,0.25");
  assert.throws(() => formatPredictions([{ path: "x", trueLabel: 0, probs: [1] }], 2), /expected 2/);
});

test("png round trip and unit scaling", () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "trainer-png-"));
  const gray = new Uint8Array([0, 64, 128, 255]);
  const file = path.join(dir, "t.png");
  writeGrayPng(file, 2, 2, gray);
  const img = loadPng(file);
  assert.equal(img.width, 2);
  assert.deepEqual(Array.from(img.data.slice(0, 3)), [0, 0, 0]);
  assert.deepEqual(Array.from(img.data.slice(9, 12)), [255, 255, 255]);
  const unit = toUnitTensorData(img, 2); // same size: v/255 at float32 precision
  assert.equal(unit[0], 0);
  assert.equal(unit[3], Math.fround(64 / 255));
  assert.equal(unit[11], 1);
  fs.rmSync(dir, { recursive: true, force: true });
});

test("bilinear resize averages the checkerboard", () => {
  const img = { width: 2, height: 2, data: new Uint8Array([0, 0, 0, 255, 255, 255, 255, 255, 255, 0, 0, 0]) };
  const unit = toUnitTensorData(img, 1);
  assert.ok(Math.abs(unit[0] - 127.5 / 255) < 1e-6);
});

test("seeded shuffle is deterministic", () => {
  const a = [1, 2, 3, 4, 5, 6, 7, 8];
  const b = [...a];
  shuffleInPlace(a, mulberry32(42));
  shuffleInPlace(b, mulberry32(42));
  assert.deepEqual(a, b);
  const c = [...b];
  shuffleInPlace(c, mulberry32(43));
  assert.notDeepEqual(b, c);
});
