/**
 * File contracts shared with the evaluation toolkit: the dataset manifest
 * (path,subject_id,sample_idx,modality,split) and the predictions CSV
 * (path,true_label,p0,...,p{K-1}). Both are UTF-8 with LF endings.
 */

export const MANIFEST_HEADER = "path,subject_id,sample_idx,modality,split";

export interface SampleRecord {
  path: string;
  subjectId: number;
  sampleIdx: number;
  modality: string;
  split: string;
}

export function parseManifest(text: string): SampleRecord[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0 || lines[0] !== MANIFEST_HEADER) {
    throw new Error(`manifest: expected header "${MANIFEST_HEADER}"`);
  }
  const records: SampleRecord[] = [];
  const seen = new Set<string>();
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== 5) {
      throw new Error(`manifest line ${i + 1}: expected 5 fields, got ${parts.length}`);
    }
    const [path, sid, sidx, modality, split] = parts;
    const subjectId = Number(sid);
    const sampleIdx = Number(sidx);
    if (!Number.isInteger(subjectId) || !Number.isInteger(sampleIdx)) {
      throw new Error(`manifest line ${i + 1}: non-integer id fields`);
    }
    if (seen.has(path)) {
      throw new Error(`manifest line ${i + 1}: duplicate path ${path}`);
    }
    seen.add(path);
    records.push({ path, subjectId, sampleIdx, modality, split });
  }
  return records;
}

/** Deterministic subject-id -> class-index mapping: ascending subject order. */
export function classMapping(records: SampleRecord[]): Map<number, number> {
  const ids = [...new Set(records.map((r) => r.subjectId))].sort((a, b) => a - b);
  return new Map(ids.map((id, i) => [id, i]));
}

export interface PredictionRow {
  path: string;
  trueLabel: number;
  probs: Float32Array | number[];
}

export function formatPredictions(rows: PredictionRow[], classCount: number): string {
  const header =
    "path,true_label," + Array.from({ length: classCount }, (_, i) => `p${i}`).join(",");
  const lines = [header];
  for (const row of rows) {
    if (row.probs.length !== classCount) {
      throw new Error(`${row.path}: expected ${classCount} probabilities, got ${row.probs.length}`);
    }
    const probs = Array.from(row.probs, (p) => formatProb(p)).join(",");
    lines.push(`${row.path},${row.trueLabel},${probs}`);
  }
  return lines.join("\n") + "\n";
}

/** Full-precision float formatting that the Python reader parses exactly. */
function formatProb(p: number): string {
  if (!Number.isFinite(p)) throw new Error(`non-finite probability ${p}`);
  return String(p);
}
