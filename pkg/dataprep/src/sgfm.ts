// SGFM dense feature matrix files: magic "SGFM", u32 version=1, u32 rows,
// u32 cols (little-endian), then rows*cols little-endian f32, row-major.

import fs from "node:fs";

export const SGFM_MAGIC = "SGFM";
export const SGFM_VERSION = 1;

export interface FeatureMatrix {
  rows: number;
  cols: number;
  data: Float32Array; // row-major
}

export function writeSgfm(path: string, matrix: FeatureMatrix): void {
  const { rows, cols, data } = matrix;
  if (data.length !== rows * cols) {
    throw new Error(`SGFM payload length ${data.length} != ${rows}*${cols}`);
  }
  const header = Buffer.alloc(16);
  header.write(SGFM_MAGIC, 0, "ascii");
  header.writeUInt32LE(SGFM_VERSION, 4);
  header.writeUInt32LE(rows, 8);
  header.writeUInt32LE(cols, 12);
  const payload = Buffer.alloc(data.length * 4);
  for (let i = 0; i < data.length; i++) {
    payload.writeFloatLE(data[i], i * 4);
  }
  fs.writeFileSync(path, Buffer.concat([header, payload]));
}

/** Write rows given as raw little-endian f32 buffers (bit-exact copies). */
export function writeSgfmRaw(path: string, cols: number, rows: Buffer[]): void {
  const header = Buffer.alloc(16);
  header.write(SGFM_MAGIC, 0, "ascii");
  header.writeUInt32LE(SGFM_VERSION, 4);
  header.writeUInt32LE(rows.length, 8);
  header.writeUInt32LE(cols, 12);
  for (const row of rows) {
    if (row.length !== cols * 4) {
      throw new Error(`row byte length ${row.length} != ${cols * 4}`);
    }
  }
  fs.writeFileSync(path, Buffer.concat([header, ...rows]));
}

export function readSgfm(path: string): FeatureMatrix {
  const buf = fs.readFileSync(path);
  if (buf.length < 16 || buf.toString("ascii", 0, 4) !== SGFM_MAGIC) {
    throw new Error(`${path}: not an SGFM file`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== SGFM_VERSION) {
    throw new Error(`${path}: unsupported SGFM version ${version}`);
  }
  const rows = buf.readUInt32LE(8);
  const cols = buf.readUInt32LE(12);
  if (buf.length !== 16 + rows * cols * 4) {
    throw new Error(`${path}: truncated SGFM payload`);
  }
  const data = new Float32Array(rows * cols);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(16 + i * 4);
  }
  return { rows, cols, data };
}
