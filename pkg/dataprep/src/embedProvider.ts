// Text-embedding providers for the feature exporter.
//
// The production encoder (a pretrained sentence-embedding model) cannot be
// bundled here, so embedding happens through one of two boundaries:
//   * command provider: spawn a user-supplied command that reads JSONL
//     {"id": n, "text": "..."} on stdin and writes {"id": n, "vector": [..]}
//     per line on stdout (order-independent);
//   * file provider: precomputed vectors keyed by item raw id, JSONL
//     {"asin": "...", "vector": [...]}.

import { spawn } from "node:child_process";
import fs from "node:fs";
import readline from "node:readline";

export interface Embedder {
  /** Embed texts[i] for every i; returns row-aligned vectors. */
  embed(texts: string[]): Promise<Float32Array[]>;
}

export class CommandEmbedder implements Embedder {
  constructor(private command: string) {}

  embed(texts: string[]): Promise<Float32Array[]> {
    return new Promise((resolve, reject) => {
      const child = spawn(this.command, { shell: true, stdio: ["pipe", "pipe", "inherit"] });
      const out: (Float32Array | undefined)[] = new Array(texts.length);
      let received = 0;
      const rl = readline.createInterface({ input: child.stdout });
      rl.on("line", (line) => {
        if (!line.trim()) return;
        const obj = JSON.parse(line);
        const id = Number(obj.id);
        if (!(id >= 0 && id < texts.length)) {
          reject(new Error(`embedder returned unknown id ${obj.id}`));
          return;
        }
        out[id] = Float32Array.from(obj.vector as number[]);
        received++;
      });
      child.on("error", reject);
      child.on("close", (code) => {
        if (code !== 0) {
          reject(new Error(`embed command exited with code ${code}`));
        } else if (received !== texts.length) {
          reject(new Error(`embed command returned ${received}/${texts.length} vectors`));
        } else {
          resolve(out as Float32Array[]);
        }
      });
      for (const [i, text] of texts.entries()) {
        child.stdin.write(JSON.stringify({ id: i, text }) + "\n");
      }
      child.stdin.end();
    });
  }
}

export class PrecomputedEmbedder {
  private table = new Map<string, Float32Array>();
  readonly dim: number;

  constructor(path: string) {
    const lines = fs.readFileSync(path, "utf-8").split("\n");
    let dim = -1;
    for (const line of lines) {
      if (!line.trim()) continue;
      const obj = JSON.parse(line);
      const vec = Float32Array.from(obj.vector as number[]);
      if (dim === -1) dim = vec.length;
      else if (vec.length !== dim) {
        throw new Error(`${path}: inconsistent vector lengths (${vec.length} vs ${dim})`);
      }
      this.table.set(String(obj.asin), vec);
    }
    if (dim === -1) throw new Error(`${path}: no vectors found`);
    this.dim = dim;
  }

  lookup(asin: string): Float32Array | undefined {
    return this.table.get(asin);
  }
}
