// Vocabulary TSVs written by the engine: raw_id<TAB>dense_index.

import fs from "node:fs";

export function readVocab(path: string): Map<string, number> {
  const vocab = new Map<string, number>();
  const text = fs.readFileSync(path, "utf-8");
  for (const [lineno, line] of text.split("\n").entries()) {
    if (!line) continue;
    const parts = line.split("\t");
    if (parts.length !== 2) {
      throw new Error(`${path}:${lineno + 1}: expected raw_id<TAB>dense_index`);
    }
    vocab.set(parts[0], Number(parts[1]));
  }
  if (vocab.size === 0) throw new Error(`${path}: empty vocabulary`);
  return vocab;
}

/** Raw ids ordered by their dense index (row order of feature files). */
export function denseOrder(vocab: Map<string, number>): string[] {
  const out = new Array<string>(vocab.size);
  for (const [raw, idx] of vocab) {
    if (idx < 0 || idx >= vocab.size || out[idx] !== undefined) {
      throw new Error(`vocabulary indices are not a contiguous 0..${vocab.size - 1} range`);
    }
    out[idx] = raw;
  }
  return out;
}
