// Convert raw 5-core review records into the engine's interactions TSV
// (user_id<TAB>item_id<TAB>timestamp). Duplicate (user, item) pairs keep
// the earliest timestamp, matching the loader's dedup rule.

import fs from "node:fs";
import readline from "node:readline";
import zlib from "node:zlib";

export interface ExportStats {
  records: number;
  rows: number;
  users: number;
  items: number;
}

function openLines(path: string): readline.Interface {
  const raw = fs.createReadStream(path);
  const stream = path.endsWith(".gz") ? raw.pipe(zlib.createGunzip()) : raw;
  return readline.createInterface({ input: stream, crlfDelay: Infinity });
}

interface Review {
  user: string;
  item: string;
  ts: number;
}

function parseReviewLine(line: string, lineno: number, path: string): Review {
  // JSON-lines review dumps use reviewerID/asin/unixReviewTime; the
  // ratings-only CSV variant is user,item,rating,timestamp.
  if (line.startsWith("{")) {
    let obj: any;
    try {
      obj = JSON.parse(line);
    } catch {
      throw new Error(`${path}:${lineno}: invalid JSON record`);
    }
    const user = obj.reviewerID ?? obj.user_id;
    const item = obj.asin ?? obj.item_id;
    if (!user || !item) {
      throw new Error(`${path}:${lineno}: record lacks reviewer/item ids`);
    }
    return { user, item, ts: Number(obj.unixReviewTime ?? obj.timestamp ?? 0) };
  }
  const parts = line.split(",");
  if (parts.length < 2) {
    throw new Error(`${path}:${lineno}: expected user,item[,rating[,timestamp]]`);
  }
  return {
    user: parts[0],
    item: parts[1],
    ts: parts.length >= 4 ? Number(parts[3]) : 0,
  };
}

export async function exportInteractions(
  inputPath: string,
  outPath: string,
): Promise<ExportStats> {
  if (!fs.existsSync(inputPath)) {
    throw new Error(`missing input file: ${inputPath}`);
  }
  const earliest = new Map<string, number>();
  const order: string[] = [];
  let records = 0;
  let lineno = 0;
  for await (const line of openLines(inputPath)) {
    lineno++;
    if (!line.trim()) continue;
    const { user, item, ts } = parseReviewLine(line, lineno, inputPath);
    records++;
    const key = `${user}\t${item}`;
    const prev = earliest.get(key);
    if (prev === undefined) {
      earliest.set(key, ts);
      order.push(key);
    } else if (ts < prev) {
      earliest.set(key, ts);
    }
  }
  if (order.length === 0) {
    throw new Error(`${inputPath}: no interactions found`);
  }
  const users = new Set<string>();
  const items = new Set<string>();
  const out = fs.createWriteStream(outPath);
  for (const key of order) {
    const [user, item] = key.split("\t");
    users.add(user);
    items.add(item);
    out.write(`${key}\t${earliest.get(key)}\n`);
  }
  await new Promise<void>((resolve, reject) => {
    out.end(() => resolve());
    out.on("error", reject);
  });
  return { records, rows: order.length, users: users.size, items: items.size };
}
