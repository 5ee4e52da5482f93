"""Command line interface.

Exit codes: 0 success, 1 input error, 2 numerical or training error.
"""

import argparse
import json
import sys
from dataclasses import MISSING, fields
from pathlib import Path

from .anchor_graph import build_anchor_graph, export_anchor_graph
from .autoencoder import encode, load_checkpoint, save_checkpoint
from .data import SyntheticSpec, generate_synthetic, load_dataset, read_labels, save_dataset
from .errors import InputError, NumericalError
from .metrics import evaluate
from .pipeline import (PipelineConfig, derive_seed, prepare_views, pretrain, run_pipeline,
                       sweep, write_run, write_sweep)

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_config_flags(parser):
    group = parser.add_argument_group("pipeline configuration")
    group.add_argument("--config", type=Path, help="JSON file with PipelineConfig keys")
    for f in fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type is bool:
            group.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        elif f.name == "hidden_dims":
            group.add_argument(flag, dest=f.name, type=_int_list, default=None,
                               help="comma-separated hidden widths, e.g. 500,500,2000")
        else:
            kind = int if f.type is int else float
            default = f.default if f.default is not MISSING else None
            group.add_argument(flag, dest=f.name, type=kind, default=None,
                               help=f"default {default}")


def _config_from_args(args):
    values = {}
    if args.config is not None:
        values.update(PipelineConfig.load(args.config).to_dict())
    for f in fields(PipelineConfig):
        given = getattr(args, f.name, None)
        if given is not None:
            values[f.name] = given
    return PipelineConfig.from_dict(values)


def _load_models(directory, n_views):
    directory = Path(directory)
    return [load_checkpoint(directory / f"view{v}.npz") for v in range(n_views)]


def cmd_synth(args):
    spec = SyntheticSpec(n=args.n, k=args.k, n_views=len(args.dims), view_dims=tuple(args.dims),
                         separation=args.separation, noise=args.noise, seed=args.seed,
                         latent_dim=args.latent_dim, name=args.name)
    path = save_dataset(generate_synthetic(spec), args.out)
    print(path)


def cmd_pretrain(args):
    dataset = load_dataset(args.data)
    config = _config_from_args(args)
    models, trace = pretrain(dataset, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for v, model in enumerate(models):
        save_checkpoint(model, out / f"view{v}.npz")
    with open(out / "pretrain_trace.csv", "w") as fh:
        fh.write("view,epoch,L_r\n")
        for row in trace:
            fh.write(f"{row['view']},{row['epoch']},{row['L_r']!r}\n")
    config.save(out / "config.lock.json")
    print(out)


def cmd_run(args):
    dataset = load_dataset(args.data)
    config = _config_from_args(args)
    models = _load_models(args.init_from, dataset.n_views) if args.init_from else None
    result = run_pipeline(dataset, config, models=models)
    write_run(result, args.out)
    print(json.dumps(result.metrics, sort_keys=True))


def cmd_eval(args):
    report = evaluate(read_labels(args.pred), read_labels(args.truth))
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


def cmd_sweep(args):
    dataset = load_dataset(args.data)
    config = _config_from_args(args)
    grid = {"m": args.m_grid or [config.m], "gamma": args.gamma_grid or [config.gamma]}
    rows = sweep(dataset, config, grid)
    write_sweep(rows, args.out)
    failed = sum(1 for r in rows if r["error"])
    print(f"{len(rows)} cells, {failed} failed -> {args.out}")


def cmd_export_graph(args):
    dataset = load_dataset(args.data)
    config = _config_from_args(args)
    views = prepare_views(dataset, config)
    if args.checkpoints:
        zs = [encode(model, x) for model, x in zip(_load_models(args.checkpoints, dataset.n_views), views)]
    else:
        zs = views
    for v, z in enumerate(zs):
        graph = build_anchor_graph(z, config.m, config.gamma,
                                   seed=derive_seed(config.seed, "anchors", v, 0),
                                   n_init=config.kmeans_n_init)
        export_anchor_graph(graph, args.out, prefix=f"view{v}")
    print(args.out)


def build_parser():
    parser = argparse.ArgumentParser(prog="dmcag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic multi-view Gaussian-blob dataset")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--dims", type=_int_list, default=[20, 20], help="per-view widths, e.g. 20,20")
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--latent-dim", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="blobs")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pretrain", help="pretrain per-view autoencoders and save checkpoints")
    p.add_argument("--data", required=True, type=Path, help="dataset manifest JSON")
    p.add_argument("--out", required=True, type=Path)
    _add_config_flags(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("run", help="full clustering pipeline")
    p.add_argument("--data", required=True, type=Path, help="dataset manifest JSON")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--init-from", type=Path, help="directory of view{v}.npz checkpoints; skips pretraining")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="ACC/NMI/ARI of a labels file against ground truth")
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--truth", required=True, type=Path)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid over anchor count and gamma")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="CSV output path")
    p.add_argument("--m-grid", type=_int_list)
    p.add_argument("--gamma-grid", type=_float_list)
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-graph", help="write anchor graphs as CSV with JSON sidecars")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--checkpoints", type=Path, help="encode with these checkpoints first")
    _add_config_flags(p)
    p.set_defaults(func=cmd_export_graph)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
