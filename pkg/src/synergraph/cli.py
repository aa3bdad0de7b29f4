"""Command-line entry point: train / evaluate / ablate / modality-ablate /
sweep-topk / baseline / compare / gradcheck / synth.

Every run writes ``config.resolved.json`` echoing the effective settings;
re-running with that config reproduces the run bit-identically on the
same platform. Paper-default hyperparameters are baked into the config
defaults, so table reproductions are one-liners.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .baselines import train_bprmf, train_itemknn, train_lightgcn
from .data import (
    FeatureMatrix,
    InteractionDataset,
    SplitDataset,
    check_core,
    encode_ids,
    load_feature_matrix,
    load_interactions,
    save_feature_matrix,
    save_interactions,
    save_vocab,
    synth_dataset,
    user_split,
)
from .evaluation import (
    DotProductProvider,
    compare_significance,
    evaluate_model,
    load_per_user,
    save_per_user,
    save_report,
)
from .losses import CircleParams
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .trainer import TrainConfig, build_model, fit, grad_check, make_gradcheck_fixture

DEFAULT_TOP_K = {"baby": 35, "sports": 30, "clothing": 30, "synthetic": 10}
MODALITY_SHORTHAND = {"v": "visual", "t": "textual", "visual": "visual", "textual": "textual"}
ABLATIONS = ("none", "no-mp", "no-iiv", "no-circle")

SYNTH_DEFAULT = dict(n_users=100, n_items=80, edges_per_user=10, d_v=16, d_t=24)


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def default_config() -> dict:
    return {
        "dataset_dir": "data",
        "output_dir": "runs",
        "model": {"d": 64, "ui_layers": 2, "ii_layers": 1},
        "train": {
            "lr": 0.001,
            "batch_size": 1024,
            "epochs": 200,
            "weight_decay": 1e-5,
            "seed": 123,
            "lam": 1e-4,
            "early_stop_patience": 20,
            "eval_every": 5,
            "circle": {
                "margin": 0.75,
                "gamma_scale": 1000.0,
                "conf": {"textual": 0.7, "visual": 0.3},
                "coef": 0.1,
            },
        },
        "top_k": None,
        "modalities": ["visual", "textual"],
        "ablation": "none",
        "baseline": None,
    }


def _merge_checked(base: dict, override: dict, path: str = "") -> None:
    for key, value in override.items():
        if key not in base:
            raise UsageError(f"unknown config key: {path}{key}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            _merge_checked(base[key], value, path=f"{path}{key}.")
        else:
            base[key] = value


def load_config(path: str | None) -> dict:
    cfg = default_config()
    if path:
        with open(path, encoding="utf-8") as fh:
            _merge_checked(cfg, json.load(fh))
    return cfg


def apply_flag_overrides(cfg: dict, args: argparse.Namespace) -> None:
    if getattr(args, "out", None):
        cfg["output_dir"] = args.out
    if getattr(args, "seed", None) is not None:
        cfg["train"]["seed"] = args.seed
    if getattr(args, "top_k", None) is not None:
        cfg["top_k"] = args.top_k
    if getattr(args, "ablation", None):
        cfg["ablation"] = args.ablation
    if getattr(args, "modalities", None):
        cfg["modalities"] = parse_modalities(args.modalities)
    if getattr(args, "lr", None) is not None:
        cfg["train"]["lr"] = args.lr
    if getattr(args, "epochs", None) is not None:
        cfg["train"]["epochs"] = args.epochs
    if getattr(args, "batch_size", None) is not None:
        cfg["train"]["batch_size"] = args.batch_size


def parse_modalities(text: str | list) -> list[str]:
    parts = text.split(",") if isinstance(text, str) else list(text)
    out = []
    for p in parts:
        p = p.strip().lower()
        if p not in MODALITY_SHORTHAND:
            raise UsageError(f"unknown modality {p!r} (expected v/visual or t/textual)")
        name = MODALITY_SHORTHAND[p]
        if name not in out:
            out.append(name)
    if not out:
        raise UsageError("at least one modality required")
    return out


def model_config_from(cfg: dict) -> ModelConfig:
    ablation = cfg["ablation"]
    if ablation not in ABLATIONS:
        raise UsageError(f"unknown ablation {ablation!r}; expected one of {ABLATIONS}")
    return ModelConfig(
        d=cfg["model"]["d"],
        ui_layers=cfg["model"]["ui_layers"],
        ii_layers=cfg["model"]["ii_layers"],
        modalities=tuple(cfg["modalities"]),
        use_purifier=ablation != "no-mp",
        use_item_item=ablation != "no-iiv",
        use_circle=ablation != "no-circle",
    )


def train_config_from(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    circle = CircleParams(
        margin=t["circle"]["margin"],
        gamma_scale=t["circle"]["gamma_scale"],
        conf=dict(t["circle"]["conf"]),
        coef=t["circle"]["coef"],
    )
    return TrainConfig(
        lr=t["lr"],
        batch_size=t["batch_size"],
        epochs=t["epochs"],
        weight_decay=t["weight_decay"],
        seed=t["seed"],
        lam=t["lam"],
        circle=circle,
        early_stop_patience=t["early_stop_patience"],
        eval_every=t["eval_every"],
    )


def resolve_top_k(cfg: dict, dataset_name: str) -> int:
    if cfg["top_k"] is not None:
        return int(cfg["top_k"])
    return DEFAULT_TOP_K.get(dataset_name, 35)


# ---------------------------------------------------------------------------
# dataset loading


def load_dataset(
    cfg: dict, name: str, modalities: list[str]
) -> tuple[InteractionDataset, SplitDataset, dict[str, FeatureMatrix], str]:
    """Resolve a dataset argument (named, 'synthetic', or a directory)."""
    seed = cfg["train"]["seed"]
    if name == "synthetic":
        ds, fv, ft = synth_dataset(seed=seed, **SYNTH_DEFAULT)
        feats = {"visual": fv, "textual": ft}
    else:
        directory = Path(name) if Path(name).is_dir() else Path(cfg["dataset_dir"]) / name
        inter = directory / "interactions.tsv"
        if not inter.exists():
            raise FileNotFoundError(f"no interactions file at {inter}")
        ds = encode_ids(load_interactions(inter))
        if name in ("baby", "sports", "clothing") and not check_core(ds, 5):
            print(f"warning: {name} dataset is not 5-core", file=sys.stderr)
        feats = {}
        for m in modalities:
            feats[m] = load_feature_matrix(
                directory / f"features_{m}.sgfm", ds.n_items, modality=m
            )
    split = user_split(ds, seed=seed)
    dataset_label = name if name in DEFAULT_TOP_K else Path(name).name
    return ds, split, {m: feats[m] for m in modalities}, dataset_label


# ---------------------------------------------------------------------------
# run orchestration


def _run_dir(cfg: dict, name: str) -> Path:
    out = Path(cfg["output_dir"]) / name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved(cfg: dict, run_dir: Path, dataset: str, extra: dict | None = None) -> None:
    resolved = json.loads(json.dumps(cfg))
    resolved["dataset"] = dataset
    if extra:
        resolved.update(extra)
    with open(run_dir / "config.resolved.json", "w", encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2)
        fh.write("\n")


def _train_and_eval(cfg: dict, dataset_arg: str, run_name: str | None, verbose: bool = True):
    mcfg = model_config_from(cfg)
    tcfg = train_config_from(cfg)
    _ds, split, feats, dataset = load_dataset(cfg, dataset_arg, list(mcfg.modalities))
    top_k = resolve_top_k(cfg, dataset)
    model = build_model(mcfg, split, feats, top_k, tcfg.circle, tcfg.lam)
    name = run_name or f"synergraph_{dataset}_{cfg['ablation']}_s{tcfg.seed}"
    run_dir = _run_dir(cfg, name)
    _write_resolved(cfg, run_dir, str(dataset_arg), {"top_k": top_k, "run": name})
    params, history = fit(
        model, split, tcfg, history_path=run_dir / "history.jsonl", verbose=verbose
    )
    save_checkpoint(run_dir / "checkpoint.sgck", params)
    fu, fi = model.final_embeddings(params)
    provider = DotProductProvider(fu, fi)
    reports = {}
    for phase in ("val", "test"):
        rep = evaluate_model(
            provider, split, phase, k=20, model="synergraph", seed=tcfg.seed, dataset=dataset
        )
        suffix = "" if phase == "test" else "_val"
        save_report(run_dir / f"report{suffix}.json", rep)
        save_per_user(run_dir / f"per_user_{phase}.csv", rep)
        reports[phase] = rep
    return reports, run_dir, history


def cmd_train(cfg: dict, args) -> int:
    reports, run_dir, _history = _train_and_eval(cfg, args.dataset, args.name)
    rep = reports["test"]
    print(f"run dir: {run_dir}")
    print(f"test recall@20 {rep.recall:.4f}  ndcg@20 {rep.ndcg:.4f}  ({rep.n_users} users)")
    return 0


def cmd_evaluate(cfg: dict, args) -> int:
    run_dir = Path(args.run)
    with open(run_dir / "config.resolved.json", encoding="utf-8") as fh:
        saved = json.load(fh)
    cfg = default_config()
    _merge_checked(cfg, {k: v for k, v in saved.items() if k in cfg})
    mcfg = model_config_from(cfg)
    tcfg = train_config_from(cfg)
    _ds, split, feats, dataset = load_dataset(cfg, saved["dataset"], list(mcfg.modalities))
    model = build_model(
        mcfg, split, feats, saved.get("top_k", resolve_top_k(cfg, dataset)),
        tcfg.circle, tcfg.lam,
    )
    params = load_checkpoint(run_dir / "checkpoint.sgck")
    fu, fi = model.final_embeddings(params)
    rep = evaluate_model(
        DotProductProvider(fu, fi), split, args.split, k=args.k,
        model="synergraph", seed=tcfg.seed, dataset=dataset,
    )
    out_path = run_dir / f"report_{args.split}_k{args.k}.json"
    save_report(out_path, rep)
    print(f"{args.split} recall@{args.k} {rep.recall:.4f}  ndcg@{args.k} {rep.ndcg:.4f}")
    return 0


def cmd_ablate(cfg: dict, args) -> int:
    rows = []
    for ablation in ("no-mp", "no-iiv", "no-circle", "none"):
        run_cfg = json.loads(json.dumps(cfg))
        run_cfg["ablation"] = ablation
        reports, _dir, _hist = _train_and_eval(
            run_cfg, args.dataset, args.name and f"{args.name}_{ablation}", verbose=False
        )
        rep = reports["test"]
        rows.append((ablation, rep.recall, rep.ndcg))
        print(f"{ablation:10s} recall@20 {rep.recall:.4f}  ndcg@20 {rep.ndcg:.4f}")
    out = Path(cfg["output_dir"]) / "ablation.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "recall@20", "ndcg@20"])
        w.writerows(rows)
    print(f"wrote {out}")
    return 0


def cmd_modality_ablate(cfg: dict, args) -> int:
    rows = []
    for mods in (["visual"], ["textual"], ["visual", "textual"]):
        run_cfg = json.loads(json.dumps(cfg))
        run_cfg["modalities"] = mods
        label = "+".join(mods)
        reports, _dir, _hist = _train_and_eval(
            run_cfg, args.dataset, args.name and f"{args.name}_{label}", verbose=False
        )
        rep = reports["test"]
        rows.append((label, rep.recall, rep.ndcg))
        print(f"{label:16s} recall@20 {rep.recall:.4f}  ndcg@20 {rep.ndcg:.4f}")
    out = Path(cfg["output_dir"]) / "modality_ablation.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["modalities", "recall@20", "ndcg@20"])
        w.writerows(rows)
    print(f"wrote {out}")
    return 0


def cmd_sweep_topk(cfg: dict, args) -> int:
    values = [int(v) for v in args.values.split(",")]
    rows = []
    for k in values:
        run_cfg = json.loads(json.dumps(cfg))
        run_cfg["top_k"] = k
        reports, _dir, _hist = _train_and_eval(
            run_cfg, args.dataset, f"sweep_k{k}_s{run_cfg['train']['seed']}", verbose=False
        )
        rep = reports["test"]
        rows.append((k, rep.recall, rep.ndcg))
        print(f"K={k:3d} recall@20 {rep.recall:.4f}  ndcg@20 {rep.ndcg:.4f}")
    out = Path(cfg["output_dir"]) / "topk_sweep.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["top_k", "recall@20", "ndcg@20"])
        w.writerows(rows)
    best = max(rows, key=lambda r: r[1])
    print(f"wrote {out}; best K={best[0]} (recall@20 {best[1]:.4f})")
    return 0


def cmd_baseline(cfg: dict, args) -> int:
    tcfg = train_config_from(cfg)
    _ds, split, _feats, dataset = load_dataset(cfg, args.dataset, [])
    name = args.name or f"{args.model}_{dataset}_s{tcfg.seed}"
    run_dir = _run_dir(cfg, name)
    _write_resolved(cfg, run_dir, str(args.dataset), {"run": name, "baseline": args.model})
    if args.model == "itemknn":
        provider = train_itemknn(split, k_neighbors=args.k_neighbors)
    else:
        tcfg = dataclasses.replace(tcfg, weight_decay=0.0)  # plain Adam for baselines
        if args.model == "bprmf":
            params, _hist = train_bprmf(
                split, tcfg, d=cfg["model"]["d"], history_path=run_dir / "history.jsonl"
            )
        elif args.model == "lightgcn":
            params, _hist = train_lightgcn(
                split, tcfg, n_layers=args.layers, d=cfg["model"]["d"],
                history_path=run_dir / "history.jsonl",
            )
        else:
            raise UsageError(f"unknown baseline {args.model!r}")
        save_checkpoint(run_dir / "checkpoint.sgck", params)
        fu = params.tensors["user_emb"]
        fi = params.tensors["item_emb"]
        if args.model == "lightgcn" and args.layers > 0:
            from .baselines import EmbeddingModel
            from .sparse import build_interaction_matrix, build_norm_adjacency

            adj = build_norm_adjacency(build_interaction_matrix(split))
            m = EmbeddingModel(
                split.base.n_users, split.base.n_items, cfg["model"]["d"],
                lam=tcfg.lam, norm_adj=adj, n_layers=args.layers,
            )
            fu, fi = m.final_embeddings(params)
        provider = DotProductProvider(fu, fi)
    for phase in ("val", "test"):
        rep = evaluate_model(
            provider, split, phase, k=20, model=args.model, seed=tcfg.seed, dataset=dataset
        )
        suffix = "" if phase == "test" else "_val"
        save_report(run_dir / f"report{suffix}.json", rep)
        save_per_user(run_dir / f"per_user_{phase}.csv", rep)
        if phase == "test":
            print(f"{args.model} test recall@20 {rep.recall:.4f}  ndcg@20 {rep.ndcg:.4f}")
    return 0


def cmd_compare(cfg: dict, args) -> int:
    users_a, rec_a, ndcg_a = load_per_user(Path(args.run_a) / f"per_user_{args.split}.csv")
    users_b, rec_b, ndcg_b = load_per_user(Path(args.run_b) / f"per_user_{args.split}.csv")
    if len(users_a) != len(users_b) or not np.array_equal(users_a, users_b):
        raise ValueError("runs evaluated different user sets; cannot pair per-user metrics")
    p_recall = compare_significance(rec_a, rec_b, n_boot=args.n_boot, seed=args.seed or 0)
    p_ndcg = compare_significance(ndcg_a, ndcg_b, n_boot=args.n_boot, seed=args.seed or 0)
    print(json.dumps({
        "recall_a": float(rec_a.mean()), "recall_b": float(rec_b.mean()),
        "p_recall": p_recall,
        "ndcg_a": float(ndcg_a.mean()), "ndcg_b": float(ndcg_b.mean()),
        "p_ndcg": p_ndcg,
    }, indent=2))
    return 0


def cmd_gradcheck(cfg: dict, args) -> int:
    model, batch = make_gradcheck_fixture(seed=args.seed if args.seed is not None else 7)
    err = grad_check(model, batch, seed=0, eps=args.eps)
    print(f"gradcheck max relative error: {err:.3e}")
    return 0 if err < 1e-3 else 1


def cmd_vocab(cfg: dict, args) -> int:
    """Encode an interactions file and export the raw-id vocabularies
    (consumed by the dataprep feature exporters)."""
    inter = Path(args.interactions)
    ds = encode_ids(load_interactions(inter))
    out = Path(args.out or inter.parent)
    out.mkdir(parents=True, exist_ok=True)
    save_vocab(out / "user_vocab.tsv", ds.user_vocab)
    save_vocab(out / "item_vocab.tsv", ds.item_vocab)
    print(f"{ds.n_users} users, {ds.n_items} items, {ds.n_edges} interactions; "
          f"vocabularies written to {out}")
    return 0


def cmd_synth(cfg: dict, args) -> int:
    out = Path(args.out or "data/synthetic")
    out.mkdir(parents=True, exist_ok=True)
    ds, fv, ft = synth_dataset(
        args.users, args.items, args.edges_per_user, args.dv, args.dt,
        args.seed if args.seed is not None else 1,
    )
    save_interactions(out / "interactions.tsv", ds)
    save_feature_matrix(out / "features_visual.sgfm", fv)
    save_feature_matrix(out / "features_textual.sgfm", ft)
    save_vocab(out / "user_vocab.tsv", ds.user_vocab)
    save_vocab(out / "item_vocab.tsv", ds.item_vocab)
    print(f"wrote synthetic dataset ({ds.n_users} users, {ds.n_items} items, "
          f"{ds.n_edges} interactions) to {out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synergraph")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=True):
        p.add_argument("--config", default=None)
        if dataset:
            p.add_argument("--dataset", default="synthetic",
                           help="baby|sports|clothing|synthetic|PATH")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--top-k", dest="top_k", type=int, default=None)
        p.add_argument("--modalities", default=None, help="comma list, e.g. v,t")
        p.add_argument("--out", default=None)
        p.add_argument("--name", default=None)
        p.add_argument("--lr", type=float, default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=None)

    p = sub.add_parser("train", help="fit the model, checkpoint, and report")
    common(p)
    p.add_argument("--ablation", choices=ABLATIONS, default=None)

    p = sub.add_parser("evaluate", help="evaluate a finished run's checkpoint")
    p.add_argument("--run", required=True)
    p.add_argument("--split", choices=("val", "test"), default="test")
    p.add_argument("--k", type=int, default=20)

    p = sub.add_parser("ablate", help="train the module-ablation grid")
    common(p)

    p = sub.add_parser("modality-ablate", help="train visual-only/textual-only/both")
    common(p)

    p = sub.add_parser("sweep-topk", help="retrain per top-K value")
    common(p)
    p.add_argument("--values", required=True, help="comma list, e.g. 5,10,15")

    p = sub.add_parser("baseline", help="train/evaluate a baseline model")
    common(p)
    p.add_argument("--model", required=True, choices=("itemknn", "bprmf", "lightgcn"))
    p.add_argument("--k-neighbors", dest="k_neighbors", type=int, default=20)
    p.add_argument("--layers", type=int, default=2)

    p = sub.add_parser("compare", help="paired bootstrap p-value between two runs")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--split", choices=("val", "test"), default="test")
    p.add_argument("--n-boot", dest="n_boot", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("vocab", help="export user/item vocabularies from an interactions file")
    p.add_argument("interactions")
    p.add_argument("--out", default=None)

    p = sub.add_parser("synth", help="write a synthetic dataset directory")
    p.add_argument("--users", type=int, default=100)
    p.add_argument("--items", type=int, default=80)
    p.add_argument("--edges-per-user", dest="edges_per_user", type=int, default=10)
    p.add_argument("--dv", type=int, default=16)
    p.add_argument("--dt", type=int, default=24)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None)
    return parser


def _limit_threads() -> None:
    n = os.environ.get("SYNERGRAPH_THREADS")
    if not n:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(int(n))
    except ImportError:
        pass


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "modality-ablate": cmd_modality_ablate,
    "sweep-topk": cmd_sweep_topk,
    "baseline": cmd_baseline,
    "compare": cmd_compare,
    "gradcheck": cmd_gradcheck,
    "vocab": cmd_vocab,
    "synth": cmd_synth,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    _limit_threads()
    try:
        cfg = load_config(getattr(args, "config", None))
        apply_flag_overrides(cfg, args)
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
