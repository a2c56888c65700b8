"""Command-line entry point: dataset generation through serving the studio."""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import dataset as datasetmod
from . import training as trainingmod
from .dataset import (
    Dataset,
    SamplerConfig,
    StatsReport,
    dataset_stats,
    generate_dataset,
    save_trajectories_jsonl,
    split_dataset,
)
from .designops import TargetSpec, hybrid_step, inverse_optimize, validate
from .errors import MorphsimError
from .grid import GridDesign, build_graph
from .model import load_model, save_model
from .oracle import OracleConfig, simulate_oracle
from .training import Hyperparams, evaluate, grid_search, train


def _read_design(path: str) -> GridDesign:
    with open(path) as f:
        return GridDesign.from_dict(json.load(f))


def _say(msg: str) -> None:
    print(msg, flush=True)


def cmd_gen(args) -> int:
    sampler = SamplerConfig(spacing=args.spacing, jitter=args.jitter, seed=args.seed)
    data = generate_dataset(
        n=args.n,
        seed=args.seed,
        sampler=sampler,
        oracle=OracleConfig(),
        workers=args.workers,
        log=_say,
    )
    data.save(args.out)
    stats = dataset_stats(data)
    stats.save(args.out + ".stats.json")
    _say(f"wrote {args.n} trajectories to {args.out}")
    _say(json.dumps(stats.to_dict(), indent=2))
    return 0


def cmd_train(args) -> int:
    data = Dataset.load(args.data)
    hp = Hyperparams(
        a=args.penalty,
        gamma=args.gamma,
        dataset_size=args.size,
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        latent=args.latent,
        hidden=tuple(int(w) for w in args.hidden.split(",")),
        cutoff=args.cutoff,
    )
    model, history = train(data, hp, log=_say)
    model.meta["dataset_stats"] = dataset_stats(data).to_dict()
    save_model(model, args.out)
    with open(args.out + ".history.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["stage", "epoch", "train_loss", "val_loss"])
        writer.writeheader()
        for row in history:
            writer.writerow({k: row.get(k) for k in writer.fieldnames})
    _say(f"checkpoint written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.ckpt)
    data = Dataset.load(args.data)
    report = evaluate(model, data)
    if args.report:
        with open(args.report, "w") as f:
            json.dump(report.to_dict(), f, indent=2)
    _say(
        f"mean vertex error: {report.mean_vertex_error_mm:.3f} mm "
        f"({100 * report.mean_relative_error:.2f}% of grid dimension)"
    )
    _say(
        f"97th percentile: {report.p97_vertex_error_mm:.3f} mm "
        f"({100 * report.p97_relative_error:.2f}%)"
    )
    _say(f"mean dislocation: {report.mean_dislocation_mm:.3f} mm")
    return 0


def cmd_gridsearch(args) -> int:
    data = Dataset.load(args.data)
    hp = Hyperparams(epochs=args.epochs, seed=args.seed)
    rows = grid_search(
        data,
        a_values=[float(v) for v in args.penalty.split(",")],
        gamma_values=[float(v) for v in args.gamma.split(",")],
        sizes=[int(v) for v in args.sizes.split(",")] if args.sizes else None,
        base_hp=hp,
        log=_say,
    )
    with open(args.out, "w") as f:
        json.dump(rows, f, indent=2)
    best = [r for r in rows if r.get("best")]
    if best:
        _say(f"best cell: {json.dumps(best[0])}")
    return 0


def cmd_simulate(args) -> int:
    design = _read_design(args.design)
    model = load_model(args.ckpt)
    stats = StatsReport.load(args.stats) if args.stats else None
    report = validate(design, stats)
    if not report.ok:
        _say(json.dumps(report.to_dict(), indent=2))
        raise MorphsimError("design has validation errors; simulation blocked")
    trajectory = model.rollout(build_graph(design), design)
    with open(args.out, "w") as f:
        json.dump(datasetmod.trajectory_to_dict(trajectory), f)
    _say(f"wrote 12-frame surrogate trajectory to {args.out}")
    return 0


def cmd_oracle_sim(args) -> int:
    design = _read_design(args.design)
    trajectory = simulate_oracle(design, OracleConfig())
    with open(args.out, "w") as f:
        json.dump(datasetmod.trajectory_to_dict(trajectory), f)
    _say(f"wrote 12-frame oracle trajectory to {args.out}")
    return 0


def cmd_validate(args) -> int:
    design = _read_design(args.design)
    stats = StatsReport.load(args.stats) if args.stats else None
    report = validate(design, stats)
    _say(json.dumps(report.to_dict(), indent=2))
    return 0 if report.ok else 1


def cmd_optimize(args) -> int:
    design = _read_design(args.design)
    with open(args.targets) as f:
        targets = TargetSpec.from_list(json.load(f))
    model = load_model(args.ckpt)
    stats = StatsReport.load(args.stats) if args.stats else None
    if args.hybrid:
        ranking = hybrid_step(
            model, design, targets, k=args.topk, joint_step=args.step, stats=stats
        )
        _say(json.dumps([r.to_dict() for r in ranking.ranked], indent=2))
        return 0
    best, history = inverse_optimize(
        model, design, targets, epochs=args.epochs, joint_step=args.step, stats=stats, log=_say
    )
    with open(args.out, "w") as f:
        f.write(best.to_json())
    _say(f"final score {history[-1]['score']:.3f}; optimized design written to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.ckpt, stats=args.stats, workspace_root=args.workspace)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphsim",
        description="Learned surrogate simulation and design tools for 2x2 morphing grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an oracle trajectory dataset")
    p.add_argument("--n", type=int, required=True, help="number of trajectories")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output dataset file (binary)")
    p.add_argument("--spacing", type=float, default=52.0, help="base lattice spacing, mm")
    p.add_argument("--jitter", type=float, default=24.0, help="per-joint jitter radius, mm")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the surrogate on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--gamma", type=float, default=0.1, help="noise strength")
    p.add_argument("--penalty", type=float, default=1.0, help="dislocation penalty strength")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--latent", type=int, default=32)
    p.add_argument("--hidden", default="128,64,32,16,8")
    p.add_argument("--cutoff", type=float, default=0.98)
    p.add_argument("--size", type=int, default=None, help="cap on training trajectories")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", default=None, help="write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gridsearch", help="hyperparameter grid search")
    p.add_argument("--data", required=True)
    p.add_argument("--gamma", default="0,0.05,0.1,0.2")
    p.add_argument("--penalty", default="0,0.5,1,2")
    p.add_argument("--sizes", default=None)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("simulate", help="surrogate rollout of one design")
    p.add_argument("--design", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle-sim", help="reference physics rollout of one design")
    p.add_argument("--design", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle_sim)

    p = sub.add_parser("validate", help="validate a design file")
    p.add_argument("--design", required=True)
    p.add_argument("--stats", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("optimize", help="inverse or hybrid design optimization")
    p.add_argument("--design", required=True)
    p.add_argument("--targets", required=True, help="JSON list of {joint, x, y, z}")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--epochs", type=int, default=22)
    p.add_argument("--step", type=float, default=2.0, help="joint move distance, mm")
    p.add_argument("--hybrid", action="store_true", help="print top-k instead of auto-run")
    p.add_argument("--topk", type=int, default=5)
    p.add_argument("--out", default="optimized.json")
    p.add_argument("--stats", default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("serve", help="serve the HTTP API and design studio")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--stats", default=None)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--workspace", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MorphsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
