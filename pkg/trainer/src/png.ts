/**
 * PNG ingest for the training harness. Images load as RGB float tensors in
 * [0, 1] (grayscale files are replicated to 3 channels), resized to the
 * configured square with bilinear half-pixel-center sampling.
 */

import * as fs from "fs";
import { PNG } from "pngjs";

export interface RawImage {
  width: number;
  height: number;
  /** RGB interleaved, length = width * height * 3, values in [0, 255]. */
  data: Uint8Array;
}

export function loadPng(path: string): RawImage {
  let buf: Buffer;
  try {
    buf = fs.readFileSync(path);
  } catch {
    throw new Error(`${path}: no such file`);
  }
  const png = PNG.sync.read(buf); // pngjs expands every color type to RGBA
  const { width, height } = png;
  const rgb = new Uint8Array(width * height * 3);
  for (let i = 0, j = 0; i < png.data.length; i += 4, j += 3) {
    rgb[j] = png.data[i];
    rgb[j + 1] = png.data[i + 1];
    rgb[j + 2] = png.data[i + 2];
  }
  return { width, height, data: rgb };
}

export function writeGrayPng(path: string, width: number, height: number, gray: Uint8Array): void {
  const png = new PNG({ width, height, colorType: 0 });
  for (let i = 0, j = 0; i < gray.length; i++, j += 4) {
    png.data[j] = gray[i];
    png.data[j + 1] = gray[i];
    png.data[j + 2] = gray[i];
    png.data[j + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png, { colorType: 0 }));
}

/** Writes a warm-tinted RGB render of a gray raster (camera-capture style). */
export function writeTintedPng(path: string, width: number, height: number, gray: Uint8Array): void {
  const png = new PNG({ width, height, colorType: 2 });
  for (let i = 0, j = 0; i < gray.length; i++, j += 4) {
    png.data[j] = gray[i];
    png.data[j + 1] = Math.round(gray[i] * 0.93);
    png.data[j + 2] = Math.round(gray[i] * 0.86);
    png.data[j + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png, { colorType: 2 }));
}

/** Bilinear resize to a square target, then scale to [0, 1] floats. */
export function toUnitTensorData(img: RawImage, target: number): Float32Array {
  const out = new Float32Array(target * target * 3);
  const sx = img.width / target;
  const sy = img.height / target;
  for (let y = 0; y < target; y++) {
    let fy = (y + 0.5) * sy - 0.5;
    fy = Math.min(Math.max(fy, 0), img.height - 1);
    const y0 = Math.floor(fy);
    const y1 = Math.min(y0 + 1, img.height - 1);
    const wy = fy - y0;
    for (let x = 0; x < target; x++) {
      let fx = (x + 0.5) * sx - 0.5;
      fx = Math.min(Math.max(fx, 0), img.width - 1);
      const x0 = Math.floor(fx);
      const x1 = Math.min(x0 + 1, img.width - 1);
      const wx = fx - x0;
      for (let c = 0; c < 3; c++) {
        const tl = img.data[(y0 * img.width + x0) * 3 + c];
        const tr = img.data[(y0 * img.width + x1) * 3 + c];
        const bl = img.data[(y1 * img.width + x0) * 3 + c];
        const br = img.data[(y1 * img.width + x1) * 3 + c];
        const top = tl + (tr - tl) * wx;
        const bot = bl + (br - bl) * wx;
        out[(y * target + x) * 3 + c] = (top + (bot - top) * wy) / 255;
      }
    }
  }
  return out;
}
