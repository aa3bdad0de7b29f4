#!/usr/bin/env python3
"""Reference embed command for the text-feature exporter.

Reads JSONL {"id": n, "text": "..."} on stdin, writes {"id": n,
"vector": [...]} per line on stdout, using the all-mpnet-base-v2
sentence encoder (768-dim). Requires the sentence-transformers package
and its model weights to be available locally.

Usage:
  synergraph-dataprep text-features --metadata meta.json --vocab item_vocab.tsv \
      --out features_textual.sgfm --embed-cmd "python3 embed_sentence_transformers.py"
"""

import json
import sys


def main() -> int:
    from sentence_transformers import SentenceTransformer

    model = SentenceTransformer("all-mpnet-base-v2")
    ids, texts = [], []
    for line in sys.stdin:
        if not line.strip():
            continue
        obj = json.loads(line)
        ids.append(obj["id"])
        texts.append(obj["text"])
    vectors = model.encode(texts, batch_size=64, show_progress_bar=False,
                           convert_to_numpy=True)
    for i, vec in zip(ids, vectors):
        sys.stdout.write(json.dumps({"id": i, "vector": vec.tolist()}) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
