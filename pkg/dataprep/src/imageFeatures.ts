// Extract the published per-product image features into SGFM rows aligned
// with the item vocabulary. The source binary is a flat sequence of
// records: 10 ASCII bytes of product id (space/NUL padded) followed by
// `dim` little-endian f32 values. Matched rows are copied byte-for-byte;
// vocabulary items absent from the source get zero rows with a warning.

import fs from "node:fs";

import { writeSgfmRaw } from "./sgfm.js";
import { denseOrder, readVocab } from "./vocab.js";

const ASIN_BYTES = 10;

export interface ImageExportStats {
  items: number;
  dim: number;
  sourceRecords: number;
  missing: number;
}

export async function exportImageFeatures(opts: {
  sourcePath: string;
  vocabPath: string;
  outPath: string;
  dim?: number;
}): Promise<ImageExportStats> {
  const dim = opts.dim ?? 4096;
  const recordBytes = ASIN_BYTES + dim * 4;
  const vocab = readVocab(opts.vocabPath);
  const order = denseOrder(vocab);
  const rows: (Buffer | undefined)[] = new Array(order.length);

  let pending: Buffer = Buffer.alloc(0);
  let records = 0;
  const stream = fs.createReadStream(opts.sourcePath);
  for await (const chunk of stream) {
    pending = pending.length ? Buffer.concat([pending, chunk as Buffer]) : (chunk as Buffer);
    let offset = 0;
    while (pending.length - offset >= recordBytes) {
      const asin = pending
        .toString("ascii", offset, offset + ASIN_BYTES)
        .replace(/[\s\0]+$/g, "");
      const idx = vocab.get(asin);
      if (idx !== undefined && rows[idx] === undefined) {
        rows[idx] = Buffer.from(
          pending.subarray(offset + ASIN_BYTES, offset + recordBytes),
        );
      }
      offset += recordBytes;
      records++;
    }
    pending = pending.subarray(offset);
  }
  if (pending.length !== 0) {
    throw new Error(
      `${opts.sourcePath}: ${pending.length} trailing bytes; corrupt source or wrong --dim`,
    );
  }
  let missing = 0;
  const zero = Buffer.alloc(dim * 4);
  const out = order.map((_asin, i) => {
    if (rows[i] === undefined) {
      missing++;
      return zero;
    }
    return rows[i] as Buffer;
  });
  if (missing) {
    console.warn(`warning: ${missing}/${order.length} items lack image features (zero rows)`);
  }
  writeSgfmRaw(opts.outPath, dim, out);
  return { items: order.length, dim, sourceRecords: records, missing };
}
