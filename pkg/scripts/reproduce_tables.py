"""Drive the full desk-scale reproduction against prepared datasets.

Expects dataset directories (interactions.tsv + features_*.sgfm) under
--data-dir/<name> for the datasets you want, as produced by the dataprep
exporter. Each stage is a plain CLI invocation, so partial reruns are
cheap; expect hours per dataset for the training stages.

  python scripts/reproduce_tables.py --data-dir data --out runs \
      --datasets baby --stages main,baselines,ablations,modality,sweep
"""

import argparse
import sys

from synergraph.cli import run

TOP_K = {"baby": 35, "sports": 30, "clothing": 30}


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--data-dir", default="data")
    ap.add_argument("--out", default="runs")
    ap.add_argument("--datasets", default="baby")
    ap.add_argument("--stages", default="main,baselines,ablations,modality,sweep")
    ap.add_argument("--seed", type=int, default=123)
    args = ap.parse_args()

    stages = set(args.stages.split(","))
    for name in args.datasets.split(","):
        data = f"{args.data_dir}/{name}"
        common = ["--dataset", data, "--out", f"{args.out}/{name}",
                  "--seed", str(args.seed), "--top-k", str(TOP_K.get(name, 35))]
        plan: list[list[str]] = []
        if "main" in stages:
            plan.append(["train", "--name", "full"] + common)
        if "baselines" in stages:
            for model in ("itemknn", "bprmf", "lightgcn"):
                plan.append(["baseline", "--model", model, "--name", model] + common)
        if "ablations" in stages:
            plan.append(["ablate"] + common)
        if "modality" in stages:
            plan.append(["modality-ablate"] + common)
        if "sweep" in stages:
            plan.append(["sweep-topk", "--values", "5,10,15,20,25,30,35,40,45"] + common)
        for argv in plan:
            print(f"\n=== {name}: {' '.join(argv)}")
            code = run(argv)
            if code != 0:
                print(f"stage failed with exit code {code}", file=sys.stderr)
                return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
