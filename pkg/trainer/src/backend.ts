/** Backend bootstrap: prefer wasm (fast on CPU-only hosts), fall back to
 * the pure-JS cpu backend. */

import * as path from "path";
import * as tf from "@tensorflow/tfjs";

let ready: Promise<string> | null = null;

export function initBackend(): Promise<string> {
  if (!ready) {
    ready = (async () => {
      try {
        const wasm = require("@tensorflow/tfjs-backend-wasm");
        const wasmDir = path.join(
          path.dirname(require.resolve("@tensorflow/tfjs-backend-wasm/package.json")),
          "dist",
        );
        wasm.setWasmPaths(wasmDir + path.sep);
        await tf.setBackend("wasm");
        await tf.ready();
      } catch {
        await tf.setBackend("cpu");
        await tf.ready();
      }
      return tf.getBackend();
    })();
  }
  return ready;
}
