// synergraph-dataprep: export raw Amazon 5-core data into the engine's
// formats.
//
//   interactions    --input reviews.json[.gz]|ratings.csv --out interactions.tsv
//   text-features   --metadata meta.json[.gz] --vocab item_vocab.tsv
//                   --out features_textual.sgfm (--embed-cmd CMD | --embeddings-file F)
//   image-features  --source image_features.b --vocab item_vocab.tsv
//                   --out features_visual.sgfm [--dim 4096]
//
// Typical flow: export interactions, run `synergraph vocab interactions.tsv`
// to get the vocabularies, then export both feature files.

import { exportImageFeatures } from "./imageFeatures.js";
import { exportInteractions } from "./interactions.js";
import { exportTextFeatures } from "./textFeatures.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new UsageError(`malformed flag near ${key}`);
    }
    flags.set(key.slice(2), argv[i + 1]);
  }
  return flags;
}

class UsageError extends Error {}

function need(flags: Map<string, string>, name: string): string {
  const v = flags.get(name);
  if (v === undefined) throw new UsageError(`missing --${name}`);
  return v;
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    const flags = parseFlags(rest);
    switch (command) {
      case "interactions": {
        const stats = await exportInteractions(need(flags, "input"), need(flags, "out"));
        console.log(
          `wrote ${stats.rows} interactions (${stats.users} users, ` +
          `${stats.items} items) from ${stats.records} records`,
        );
        return 0;
      }
      case "text-features": {
        const stats = await exportTextFeatures({
          metadataPath: need(flags, "metadata"),
          vocabPath: need(flags, "vocab"),
          outPath: need(flags, "out"),
          embedCommand: flags.get("embed-cmd"),
          embeddingsFile: flags.get("embeddings-file"),
        });
        console.log(
          `wrote ${stats.items} x ${stats.dim} text features ` +
          `(${stats.missingMetadata} items without metadata)`,
        );
        return 0;
      }
      case "image-features": {
        const stats = await exportImageFeatures({
          sourcePath: need(flags, "source"),
          vocabPath: need(flags, "vocab"),
          outPath: need(flags, "out"),
          dim: flags.has("dim") ? Number(flags.get("dim")) : undefined,
        });
        console.log(
          `wrote ${stats.items} x ${stats.dim} image features ` +
          `(${stats.sourceRecords} source records, ${stats.missing} missing)`,
        );
        return 0;
      }
      default:
        throw new UsageError(`unknown command ${command ?? "(none)"}`);
    }
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
