"""Command-line surface for the full pipeline.

Subcommands mirror the stages: synth-gen, train, embed, hash, index-build,
index-query, mask-plan, eval-reid, eval-classify, bench, serve. Exit codes:
0 success, 1 usage/config error, 2 data error. All randomness flows from one
seed (config "seed", overridable with --seed).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import formats, index as index_mod, service
from .bench import bench_retrieval, format_bench_report
from .classify import KnnConfig, classify, classify_code, explain
from .config import load_config
from .errors import ConfigError, PolypdexError
from .hashing import code_to_hex, hex_to_code, quantize
from .losses import LossConfig
from .masking import MaskingConfig, classify_patches, plan_mask, plan_to_dict
from .pipeline import classify_cv, embed_samples, reid_eval
from .records import RecordStore
from .synth import SynthSpec, generate, load_samples, save_samples
from .training import TrainConfig, train


def _write_or_print(payload: str, out: str | None) -> None:
    if out:
        Path(out).write_text(payload + ("" if payload.endswith("\n") else "\n"))
    else:
        print(payload)


def _config_for(args) -> dict:
    overrides: dict = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return load_config(getattr(args, "config", None), overrides)


def _synth_spec(cfg: dict) -> SynthSpec:
    s = cfg["synth"]
    return SynthSpec(
        image_size=s["image_size"],
        patch_size=s["patch_size"],
        num_instances=s["num_instances"],
        num_classes=s["num_classes"],
        views_per_instance=s["views_per_instance"],
        seed=cfg["seed"],
        min_mask_fraction=s["min_mask_fraction"],
        max_mask_fraction=s["max_mask_fraction"],
    )


def _train_config(cfg: dict) -> TrainConfig:
    t, l, m = cfg["train"], cfg["loss"], cfg["masking"]
    return TrainConfig(
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        learning_rate=t["learning_rate"],
        momentum=t["momentum"],
        seed=cfg["seed"],
        patch_size=cfg["synth"]["patch_size"],
        hidden_dim=t["hidden_dim"],
        embed_dim=t["embed_dim"],
        loss=LossConfig(
            temperature=l["temperature"],
            entropy_weight=l["entropy_weight"],
            recon_weight=l["recon_weight"],
            entropy_floor=l["entropy_floor"],
            entropy_over_all_views=l["entropy_over_all_views"],
        ),
        masking=MaskingConfig(
            ratio=m["ratio"],
            fg_threshold=m["fg_threshold"],
            fg_slope=m["fg_slope"],
            fg_floor=m["fg_floor"],
        ),
    )


def _store_from_endf(path: str) -> RecordStore:
    from .hashing import quantize_many

    ids, labels, vectors = formats.read_embeddings(path)
    vec64 = vectors.astype(np.float64)
    return RecordStore(
        ids=ids,
        labels=labels,
        codes=quantize_many(vec64),
        nbits=vectors.shape[1],
        raws=vec64,
    )


def _cmd_synth_gen(args) -> int:
    cfg = _config_for(args)
    if args.instances is not None:
        cfg["synth"]["num_instances"] = args.instances
    if args.classes is not None:
        cfg["synth"]["num_classes"] = args.classes
    if args.image_size is not None:
        cfg["synth"]["image_size"] = args.image_size
    samples = generate(_synth_spec(cfg))
    save_samples(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _config_for(args)
    if args.epochs is not None:
        cfg["train"]["epochs"] = args.epochs
    samples = load_samples(args.data)
    params, log = train(samples, _train_config(cfg))
    formats.write_params(args.out, params, cfg["synth"]["patch_size"])
    if args.log:
        Path(args.log).write_text(json.dumps(log, indent=2) + "\n")
    final = log[-1] if log else {}
    print(f"trained {cfg['train']['epochs']} epochs; final loss "
          f"{final.get('loss', float('nan')):.6f}; params -> {args.out}")
    return 0


def _cmd_embed(args) -> int:
    params, patch_size = formats.read_params(args.params)
    samples = load_samples(args.data)
    vectors = embed_samples(params, samples, patch_size)
    formats.write_embeddings(
        args.out,
        [s.instance_id for s in samples],
        [s.class_label for s in samples],
        vectors,
    )
    print(f"embedded {len(samples)} images ({vectors.shape[1]}d) -> {args.out}")
    return 0


def _cmd_hash(args) -> int:
    ids, labels, vectors = formats.read_embeddings(args.embeddings)
    rows = [
        {"id": rid, "label": int(label), "hash_hex": code_to_hex(quantize(vec))}
        for rid, label, vec in zip(ids, labels, vectors.astype(np.float64))
    ]
    payload = json.dumps({"bits": vectors.shape[1], "count": len(rows), "records": rows}, indent=2)
    _write_or_print(payload, args.out)
    return 0


def _cmd_index_build(args) -> int:
    cfg = _config_for(args)
    if args.leaf_capacity is not None:
        cfg["hash"]["leaf_capacity"] = args.leaf_capacity
    store = _store_from_endf(args.embeddings)
    tree = index_mod.build(
        store,
        leaf_capacity=cfg["hash"]["leaf_capacity"],
        pole_sample=cfg["hash"]["pole_sample"],
        seed=cfg["seed"],
    )
    index_mod.save(tree, args.out)
    print(f"indexed {len(store)} records ({store.nbits}-bit codes) -> {args.out}")
    return 0


def _cmd_index_query(args) -> int:
    tree = index_mod.load(args.index)
    cfg = KnnConfig(k=args.k, metric="hamming")
    if (args.hash_hex is None) == (args.embedding_json is None):
        print("provide exactly one of --hash-hex or --embedding-json", file=sys.stderr)
        return 1
    if args.hash_hex is not None:
        result = classify_code(tree, hex_to_code(args.hash_hex, tree.nbits), cfg)
    else:
        vec = np.asarray(json.loads(Path(args.embedding_json).read_text()), dtype=np.float64)
        result = classify(tree, vec, cfg)
    _write_or_print(json.dumps(explain(result, tree), indent=2), args.out)
    return 0


def _cmd_mask_plan(args) -> int:
    cfg = _config_for(args)
    samples = load_samples(args.data)
    by_id = {s.instance_id: s for s in samples}
    if args.id not in by_id:
        print(f"unknown instance id {args.id!r}", file=sys.stderr)
        return 2
    sample = by_id[args.id]
    m = cfg["masking"]
    mask_cfg = MaskingConfig(
        ratio=m["ratio"], fg_threshold=m["fg_threshold"],
        fg_slope=m["fg_slope"], fg_floor=m["fg_floor"],
    )
    fg = classify_patches(sample.mask, cfg["synth"]["patch_size"], mask_cfg.fg_threshold)
    plan = plan_mask(fg, mask_cfg, cfg["seed"])
    doc = plan_to_dict(plan)
    if not args.dump:
        doc.pop("masked")
        doc.pop("fg_patch")
    _write_or_print(json.dumps(doc, indent=2), args.out)
    return 0


def _format_reid_table(report: dict) -> str:
    header = f"{'variant':<10}{'uAP':>8}{'Acc@1':>8}{'R@90%':>8}{'time(s)':>10}{'FPS':>10}"
    lines = [header, "-" * len(header)]
    for name, row in report["variants"].items():
        lines.append(
            f"{name:<10}{row['uAP']:>8.3f}{row['Acc@1']:>8.3f}{row['Recall@90%']:>8.3f}"
            f"{row['time_s']:>10.5f}{row['fps']:>10.2f}"
        )
    return "\n".join(lines)


def _cmd_eval_reid(args) -> int:
    cfg = _config_for(args)
    params, patch_size = formats.read_params(args.params)
    samples = load_samples(args.data)
    report = reid_eval(params, samples, patch_size, seed=cfg["seed"])
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    print(_format_reid_table(report))
    return 0


def _format_classify_table(report: dict) -> str:
    header = f"{'variant':<10}{'ACC':>8}{'SEN':>8}{'SPE':>8}{'F1':>8}"
    lines = [header, "-" * len(header)]

    def fmt(v):
        return f"{v:>8.3f}" if v is not None else f"{'-':>8}"

    for name, row in report["variants"].items():
        avg = row["fold_average"]
        lines.append(f"{name:<10}{fmt(avg['ACC'])}{fmt(avg['SEN'])}{fmt(avg['SPE'])}{fmt(avg['F1'])}")
    return "\n".join(lines)


def _cmd_eval_classify(args) -> int:
    cfg = _config_for(args)
    if args.folds is not None:
        cfg["eval"]["folds"] = args.folds
    if args.k is not None:
        cfg["knn"]["k"] = args.k
    params, patch_size = formats.read_params(args.params)
    samples = load_samples(args.data)
    report = classify_cv(
        params, samples, patch_size,
        n_folds=cfg["eval"]["folds"],
        knn_k=cfg["knn"]["k"],
        positive_class=cfg["knn"]["positive_class"],
        seed=cfg["seed"],
        leaf_capacity=cfg["hash"]["leaf_capacity"],
    )
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    print(_format_classify_table(report))
    return 0


def _cmd_bench(args) -> int:
    cfg = _config_for(args)
    report = bench_retrieval(
        corpus_size=args.records,
        dim=args.dim,
        n_queries=args.queries,
        k=args.k,
        leaf_capacity=args.leaf_capacity or cfg["hash"]["leaf_capacity"],
        seed=cfg["seed"],
    )
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    print(format_bench_report(report))
    return 0


def _cmd_serve(args) -> int:
    cfg = _config_for(args)
    tree = index_mod.load(args.index)
    if args.params:
        formats.read_params(args.params)  # fail fast on a bad artifact
    host = args.host or cfg["serve"]["host"]
    port = args.port if args.port is not None else cfg["serve"]["port"]
    service.serve_forever(tree, host, port, default_k=cfg["knn"]["k"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polypdex",
        description="Lesion image retrieval: embeddings, hash codes, Hamming search, KNN voting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file merged over defaults")
        p.add_argument("--seed", type=int, help="master seed override")

    p = sub.add_parser("synth-gen", help="generate a synthetic labeled corpus")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--instances", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--image-size", type=int)
    p.set_defaults(func=_cmd_synth_gen)

    p = sub.add_parser("train", help="train the encoder on a corpus")
    common(p)
    p.add_argument("--data", required=True, help="corpus directory")
    p.add_argument("--out", required=True, help="output .endp params file")
    p.add_argument("--epochs", type=int)
    p.add_argument("--log", help="write per-epoch loss log JSON here")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("embed", help="embed corpus images into a .endf file")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("hash", help="quantize a .endf file to hash codes (JSON)")
    common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_hash)

    p = sub.add_parser("index-build", help="build a .endx ball-tree index from embeddings")
    common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--leaf-capacity", type=int)
    p.set_defaults(func=_cmd_index_build)

    p = sub.add_parser("index-query", help="query a .endx index")
    common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--hash-hex")
    p.add_argument("--embedding-json", help="file holding a JSON array embedding")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_index_query)

    p = sub.add_parser("mask-plan", help="inspect the adaptive mask plan for one sample")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--dump", action="store_true", help="include per-patch arrays")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_mask_plan)

    p = sub.add_parser("eval-reid", help="twin re-identification evaluation")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=_cmd_eval_reid)

    p = sub.add_parser("eval-classify", help="k-fold retrieval classification evaluation")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--folds", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval_classify)

    p = sub.add_parser("bench", help="hash-vs-raw retrieval latency benchmark")
    common(p)
    p.add_argument("--records", type=int, default=100_000)
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--queries", type=int, default=1_000)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--leaf-capacity", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("serve", help="serve /v1/query over a .endx index")
    common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--params", help="optional .endp checked at startup")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (PolypdexError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
