// Per-item text features: join product metadata onto the item vocabulary,
// compose title + categories + description, embed, and write SGFM rows in
// dense-index order. Items without metadata are encoded from the empty
// string (command provider) or zero-filled (precomputed provider), with a
// warning either way.

import fs from "node:fs";
import readline from "node:readline";
import zlib from "node:zlib";

import { CommandEmbedder, PrecomputedEmbedder } from "./embedProvider.js";
import { writeSgfm } from "./sgfm.js";
import { denseOrder, readVocab } from "./vocab.js";

export interface TextExportStats {
  items: number;
  dim: number;
  missingMetadata: number;
}

export function composeText(meta: any): string {
  const parts: string[] = [];
  if (meta.title) parts.push(String(meta.title));
  if (meta.categories) {
    const cats = Array.isArray(meta.categories) ? meta.categories.flat(Infinity) : [meta.categories];
    parts.push(cats.map(String).join(" "));
  }
  if (meta.description) {
    const desc = Array.isArray(meta.description) ? meta.description.join(" ") : meta.description;
    parts.push(String(desc));
  }
  return parts.join(" ").replace(/\s+/g, " ").trim();
}

export async function loadMetadata(path: string): Promise<Map<string, string>> {
  const raw = fs.createReadStream(path);
  const stream = path.endsWith(".gz") ? raw.pipe(zlib.createGunzip()) : raw;
  const rl = readline.createInterface({ input: stream, crlfDelay: Infinity });
  const texts = new Map<string, string>();
  let lineno = 0;
  for await (const line of rl) {
    lineno++;
    if (!line.trim()) continue;
    let obj: any;
    try {
      // the published metadata dumps are python-repr-ish; tolerate plain JSON only
      obj = JSON.parse(line);
    } catch {
      throw new Error(`${path}:${lineno}: metadata line is not valid JSON`);
    }
    if (!obj.asin) continue;
    texts.set(String(obj.asin), composeText(obj));
  }
  return texts;
}

export async function exportTextFeatures(opts: {
  metadataPath: string;
  vocabPath: string;
  outPath: string;
  embedCommand?: string;
  embeddingsFile?: string;
}): Promise<TextExportStats> {
  const vocab = readVocab(opts.vocabPath);
  const order = denseOrder(vocab);
  const texts = await loadMetadata(opts.metadataPath);
  let missing = 0;
  const perItem = order.map((asin) => {
    const t = texts.get(asin);
    if (t === undefined || t === "") missing++;
    return t ?? "";
  });
  if (missing) {
    console.warn(`warning: ${missing}/${order.length} items lack metadata text`);
  }

  let rowsOut: Float32Array[];
  if (opts.embedCommand) {
    rowsOut = await new CommandEmbedder(opts.embedCommand).embed(perItem);
  } else if (opts.embeddingsFile) {
    const table = new PrecomputedEmbedder(opts.embeddingsFile);
    rowsOut = order.map((asin) => {
      const vec = table.lookup(asin);
      return vec ?? new Float32Array(table.dim);
    });
  } else {
    throw new Error("need --embed-cmd or --embeddings-file to produce text vectors");
  }
  const dim = rowsOut[0].length;
  for (const [i, row] of rowsOut.entries()) {
    if (row.length !== dim) {
      throw new Error(`item ${order[i]}: vector length ${row.length} != ${dim}`);
    }
  }
  const data = new Float32Array(order.length * dim);
  rowsOut.forEach((row, i) => data.set(row, i * dim));
  writeSgfm(opts.outPath, { rows: order.length, cols: dim, data });
  return { items: order.length, dim, missingMetadata: missing };
}
