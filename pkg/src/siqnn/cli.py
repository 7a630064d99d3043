"""Command-line entry point: validate, build-dataset, train, benchmark,
shot-study, plot.

Every subcommand is deterministic given its arguments: all randomness flows
from explicit integer seeds (defaults are fixed constants, never wall-clock),
and every output file embeds the resolved-config hash, the seed, and the
package version. A TOML file passed with --config supplies per-subcommand
defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .ansatz import build_observable_basis, build_siqnn
from .bench import (
    ALL_MODELS,
    BenchConfig,
    SamplingPlan,
    aggregate_boxplot,
    aggregate_ranking,
    hamiltonian_measurement_mse,
    load_records_csv,
    records_to_csv,
    records_to_json,
    run_matrix,
    sample_training_set,
    shot_eval_mse,
    train_with_shots,
)
from .fermions import build_qubit_hamiltonian
from .integrals import Bundle, validate_bundle
from .model import HybridModel
from .plotting import svg_boxplot, svg_overlay, svg_ranking
from .spectra import Dataset, ScanSpectra, diagonalize
from .training import StopPolicy, pretrain_siqnn, train_end_to_end, write_training_log


def _config_hash(args: argparse.Namespace) -> str:
    # Identify the computation, not its destination or parallelism.
    skip = {"func", "config", "out", "workers"}
    doc = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _meta(args: argparse.Namespace) -> dict:
    meta = {"config_hash": _config_hash(args), "version": __version__}
    if hasattr(args, "seed"):
        meta["seed"] = args.seed
    return meta


def _write_json(path: Path, payload: dict, args: argparse.Namespace) -> None:
    payload = {"meta": _meta(args), **payload}
    path.write_text(json.dumps(payload, indent=1, default=str))


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    problems = validate_bundle(args.bundle, tol=args.tol)
    if problems:
        for p in problems:
            print(f"VIOLATION: {p}")
        return 1
    bundle = Bundle.load(args.bundle)
    print(f"{args.bundle}: schema and invariants OK "
          f"({len(bundle.records)} records, n_orb={bundle.n_orb})")
    if args.check_energies:
        n_checked = 0
        worst = 0.0
        for rec in bundle.records:
            if rec.reference_energy is None:
                continue
            h = build_qubit_hamiltonian(rec)
            sp = diagonalize(h, rec.n_elec, 0.0, r=rec.r)
            dev = abs(sp.energies[0] - rec.reference_energy)
            worst = max(worst, dev)
            n_checked += 1
            if dev > args.energy_tol:
                print(f"VIOLATION: R={rec.r:.4f} ground energy deviates "
                      f"{dev:.3e} Ha from reference")
                return 1
        if n_checked:
            print(f"reference energies: {n_checked} checked, max deviation {worst:.3e} Ha")
        else:
            print("reference energies: none present, skipped")
    return 0


# ---------------------------------------------------------------------------
# build-dataset


def cmd_build_dataset(args) -> int:
    bundle = Bundle.load(args.bundle)
    scan = ScanSpectra(bundle)
    if args.list:
        print(f"anchor geometry: R={scan.tracked.grid[scan.anchor]:.4f}")
        for kind, label in scan.available_targets():
            print(f"available: {kind}:{label}")
        for label, j in sorted(scan.labels.items()):
            flags = scan.tracked.flags.get(j)
            if flags:
                print(f"flagged:   {label} at steps {flags}")
        return 0
    dataset = scan.dataset(args.kind, args.label, allow_flagged=args.allow_flagged)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.save(out)
    sidecar = out.with_suffix(".build.json")
    _write_json(sidecar, {
        "molecule": dataset.molecule, "kind": args.kind, "label": args.label,
        "m": dataset.m, "scaling": dataset.scaling.to_dict(),
        "anchor_r": float(scan.tracked.grid[scan.anchor]),
    }, args)
    print(f"wrote {out} ({dataset.m} points, {dataset.n_qubits} qubits)")
    return 0


# ---------------------------------------------------------------------------
# train


def _policies(args) -> tuple[StopPolicy, StopPolicy]:
    pre = StopPolicy(target_loss=args.target_loss, patience=args.patience,
                     max_iters=args.pretrain_iters)
    e2e = StopPolicy(target_loss=args.target_loss, patience=args.patience,
                     max_iters=args.train_iters)
    return pre, e2e


def cmd_train(args) -> int:
    dataset = Dataset.load(args.dataset)
    n_orb = dataset.n_qubits // 2
    template = build_siqnn(n_orb, stop_at=args.stop_at)
    basis = build_observable_basis(template)
    if args.train_indices:
        train_idx = np.asarray(sorted(int(i) for i in args.train_indices.split(",")))
    else:
        plan = SamplingPlan(size=args.size, strategy=args.strategy, seed=args.seed)
        train_idx = sample_training_set(dataset, plan, args.replicate)
    test_idx = np.setdiff1d(np.arange(dataset.m), train_idx)
    pre_policy, e2e_policy = _policies(args)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    pre_model, pre_res = pretrain_siqnn(template, basis, dataset, train_idx,
                                        policy=pre_policy, lr=args.pretrain_lr,
                                        seed=args.seed)
    model, res = train_end_to_end(pre_model, dataset, train_idx, policy=e2e_policy,
                                  lr=args.lr, seed=args.seed + 1)
    wall = time.perf_counter() - t0

    pre_model.save(out / "checkpoint_pretrained.json")
    model.save(out / "checkpoint.json")
    write_training_log(out / "log_pretrain.csv", pre_res)
    write_training_log(out / "log_end_to_end.csv", res)
    half2 = dataset.scaling.y_half_range**2

    def test_mse(m):
        pred = m.forward(dataset.states[test_idx], dataset.r_scaled[test_idx])
        return float(np.mean((pred - dataset.y_scaled[test_idx]) ** 2)) * half2

    summary = {
        "dataset": str(args.dataset), "target": f"{dataset.kind}:{dataset.label}",
        "train_indices": [int(i) for i in train_idx],
        "pretrain": {"loss_physical": pre_res.best_loss_physical,
                     "stop": pre_res.stop_reason, "iters": pre_res.n_iters,
                     "test_mse": test_mse(pre_model)},
        "end_to_end": {"loss_physical": res.best_loss_physical,
                       "stop": res.stop_reason, "iters": res.n_iters,
                       "test_mse": test_mse(model)},
        "wall_time_s": wall,
    }
    _write_json(out / "summary.json", summary, args)
    print(f"pretrain: {pre_res.best_loss_physical:.3e} ({pre_res.stop_reason}); "
          f"end-to-end: {res.best_loss_physical:.3e} ({res.stop_reason}); "
          f"test MSE {summary['end_to_end']['test_mse']:.3e}")
    return 0


# ---------------------------------------------------------------------------
# benchmark


def cmd_benchmark(args) -> int:
    datasets = [Dataset.load(p) for p in args.dataset]
    n_orb = datasets[0].n_qubits // 2
    if any(d.n_qubits != 2 * n_orb for d in datasets):
        print("error: datasets disagree on register size", file=sys.stderr)
        return 1
    template = build_siqnn(n_orb, stop_at=args.stop_at)
    basis = build_observable_basis(template)
    pre_policy, e2e_policy = _policies(args)
    config = BenchConfig(
        sizes=tuple(int(s) for s in args.sizes.split(",")),
        replicates=args.replicates, strategy=args.strategy, master_seed=args.seed,
        pretrain_policy=pre_policy, e2e_policy=e2e_policy,
        nn_policy=StopPolicy(target_loss=args.target_loss, patience=args.patience,
                             max_iters=args.nn_iters),
        pretrain_lr=args.pretrain_lr, e2e_lr=args.lr,
    )
    models = args.models.split(",")
    unknown = set(models) - set(ALL_MODELS)
    if unknown:
        print(f"error: unknown models {sorted(unknown)}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(done, total):
        if done % max(1, total // 20) == 0 or done == total:
            print(f"  {done}/{total} cells", flush=True)

    records = run_matrix(datasets, template, basis, models, config,
                         n_workers=args.workers, progress=progress)
    meta = _meta(args)
    records_to_csv(records, out / "records.csv", meta)
    records_to_json(records, out / "records.json", meta)
    box_rows = aggregate_boxplot(records)
    rank_rows = aggregate_ranking(records)
    _write_json(out / "boxplot.json", {"rows": box_rows}, args)
    _write_json(out / "ranking.json", {"rows": rank_rows}, args)
    for row in rank_rows:
        print(f"rank size={row['size']} {row['model']}: "
              f"{row['mean_rank']:.3f} +- {row['sem']:.3f}")
    print(f"wrote {out / 'records.csv'}")
    return 0


# ---------------------------------------------------------------------------
# shot-study


def cmd_shot_study(args) -> int:
    dataset = Dataset.load(args.dataset)
    model = HybridModel.load(args.checkpoint)
    shots_grid = [int(float(s)) for s in args.shots.split(",")]
    rng_seeds = list(range(args.seeds))
    train_idx = np.asarray([int(i) for i in args.train_indices.split(",")]) \
        if args.train_indices else None
    test_idx = (np.setdiff1d(np.arange(dataset.m), train_idx)
                if train_idx is not None else np.arange(dataset.m))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [("curve", "shots", "seed", "mse")]

    noiseless = shot_eval_mse(model, dataset, test_idx, None, seed=0)
    rows.append(("exact-eval", 0, 0, repr(noiseless)))

    for shots in shots_grid:
        for seed in rng_seeds:
            mse = shot_eval_mse(model, dataset, test_idx, shots, seed=args.seed + seed)
            rows.append(("eval", shots, seed, repr(mse)))

    if args.train_curves:
        if train_idx is None:
            print("error: --train-curves requires --train-indices", file=sys.stderr)
            return 1
        template = model.template
        basis = model.basis
        pre_policy, e2e_policy = _policies(args)
        for shots in shots_grid:
            for seed in rng_seeds:
                noisy = train_with_shots(template, basis, dataset, train_idx, shots,
                                         args.seed + seed, pre_policy, e2e_policy,
                                         pretrain_lr=args.pretrain_lr, e2e_lr=args.lr)
                mse_same = shot_eval_mse(noisy, dataset, test_idx, shots,
                                         seed=args.seed + 1000 + seed)
                mse_big = shot_eval_mse(noisy, dataset, test_idx, args.eval_big,
                                        seed=args.seed + 2000 + seed)
                rows.append(("train-eval-same", shots, seed, repr(mse_same)))
                rows.append(("train-eval-100k", shots, seed, repr(mse_big)))

    if args.bundle:
        bundle = Bundle.load(args.bundle)
        keep = [i for i, rec in enumerate(bundle.records)
                if any(abs(rec.r - dataset.r[t]) < 1e-9 for t in test_idx)]
        hams = {i: build_qubit_hamiltonian(bundle.records[i]) for i in keep[:args.h_geoms]}
        states = np.stack([dataset.states[int(np.argmin(np.abs(dataset.r -
                                                               bundle.records[i].r)))]
                           for i in hams])
        for shots in shots_grid:
            for seed in rng_seeds:
                for mode, name in (("per-term", "h-upper-bound"), ("qwc", "h-qwc")):
                    mse = float(np.mean([
                        hamiltonian_measurement_mse(states[k:k + 1], h, shots,
                                                    args.seed + 31 * seed + k, mode)
                        for k, h in enumerate(hams.values())
                    ]))
                    rows.append((name, shots, seed, repr(mse)))

    path = out / "shot_curves.csv"
    with open(path, "w") as fh:
        for key, value in _meta(args).items():
            fh.write(f"# {key}: {value}\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# plot


def cmd_plot(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wrote = []
    if args.records:
        records = load_records_csv(args.records)
        if not records:
            print("error: no records to plot", file=sys.stderr)
            return 1
        targets = sorted({(r.molecule, r.target) for r in records})
        box_rows = aggregate_boxplot(records)
        for molecule, target in targets:
            rows = [r for r in box_rows if r["molecule"] == molecule and r["target"] == target]
            name = f"box_{molecule}_{target.replace(':', '_')}.svg"
            svg_boxplot(rows, out / name, title=f"{molecule} {target}")
            wrote.append(name)
        rank_rows = aggregate_ranking(records)
        svg_ranking(rank_rows, out / "ranking.svg")
        wrote.append("ranking.svg")
    if args.dataset and args.checkpoint:
        dataset = Dataset.load(args.dataset)
        predictions = {}
        for spec in args.checkpoint:
            name, _, path = spec.partition("=")
            model = HybridModel.load(path if path else name)
            pred_scaled = model.forward(dataset.states, dataset.r_scaled)
            predictions[name if path else "siqnn-nn"] = \
                dataset.scaling.unscale_y(pred_scaled)
        train_idx = (np.asarray([int(i) for i in args.train_indices.split(",")])
                     if args.train_indices else np.array([], dtype=int))
        name = f"overlay_{dataset.molecule}_{dataset.kind}_{dataset.label}.svg"
        svg_overlay(dataset.r, dataset.y, predictions, dataset.r[train_idx],
                    dataset.y[train_idx], out / name,
                    title=f"{dataset.molecule} {dataset.kind}:{dataset.label}",
                    ylabel=("Hartree" if dataset.kind == "transition_energy" else "e*a0"))
        wrote.append(name)
    if not wrote:
        print("error: nothing to plot (need --records and/or --dataset+--checkpoint)",
              file=sys.stderr)
        return 1
    for name in wrote:
        print(f"wrote {out / name}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--target-loss", type=float, default=1e-6,
                   help="stop threshold in physical units squared")
    p.add_argument("--patience", type=int, default=200)
    p.add_argument("--pretrain-iters", type=int, default=1000)
    p.add_argument("--train-iters", type=int, default=2000, dest="train_iters")
    p.add_argument("--pretrain-lr", type=float, default=0.5)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--stop-at", type=int, default=2,
                   help="qubits per spin sector left when pooling stops")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="siqnn",
        description="Excited-state property regression from molecular ground states",
    )
    parser.add_argument("--config", type=str, default=None,
                        help="TOML file with per-subcommand default tables")
    parser.add_argument("--version", action="version", version=f"siqnn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a bundle file's schema and invariants")
    p.add_argument("bundle")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--check-energies", action="store_true",
                   help="diagonalize and compare embedded reference energies")
    p.add_argument("--energy-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build-dataset", help="diagonalize a bundle into a dataset cache")
    p.add_argument("--bundle", required=True)
    p.add_argument("--kind", choices=["transition_energy", "tdm_norm"],
                   default="transition_energy")
    p.add_argument("--label", default="T1")
    p.add_argument("--out", default="dataset.json")
    p.add_argument("--allow-flagged", action="store_true")
    p.add_argument("--list", action="store_true", help="list available targets and exit")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="two-stage training on one sampled training set")
    p.add_argument("--dataset", required=True)
    p.add_argument("--size", type=int, default=6)
    p.add_argument("--strategy", choices=["bo", "equal", "random"], default="equal")
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--train-indices", default=None,
                   help="comma-separated explicit grid indices (overrides sampling)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default="train_out")
    _add_policy_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("benchmark", help="replicated model comparison matrix")
    p.add_argument("--dataset", action="append", required=True,
                   help="dataset cache path(s); repeat for multiple targets")
    p.add_argument("--models", default=",".join(ALL_MODELS))
    p.add_argument("--sizes", default="4,5,6,7,8")
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--strategy", choices=["bo", "equal", "random"], default="bo")
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--nn-iters", type=int, default=1000)
    p.add_argument("--out", default="bench_out")
    _add_policy_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("shot-study", help="shot-noise curves for a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--bundle", default=None,
                   help="bundle for Hamiltonian-measurement comparison curves")
    p.add_argument("--shots", default="1e3,3e3,1e4,3e4,1e5")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--seed", type=int, default=11)
    p.add_argument("--train-indices", default=None)
    p.add_argument("--train-curves", action="store_true",
                   help="also retrain with sampled evaluations at each shot count")
    p.add_argument("--eval-big", type=int, default=100000)
    p.add_argument("--h-geoms", type=int, default=4,
                   help="number of geometries for Hamiltonian-measurement curves")
    p.add_argument("--out", default="shot_out")
    _add_policy_flags(p)
    p.set_defaults(func=cmd_shot_study)

    p = sub.add_parser("plot", help="render SVG figures from result files")
    p.add_argument("--records", default=None, help="records.csv from benchmark")
    p.add_argument("--dataset", default=None)
    p.add_argument("--checkpoint", action="append", default=None,
                   help="checkpoint path or name=path; repeatable")
    p.add_argument("--train-indices", default=None)
    p.add_argument("--out", default="plots")
    p.set_defaults(func=cmd_plot)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Install TOML table values as subparser defaults; flags still win."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    sub_actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    for name, table in doc.items():
        if not isinstance(table, dict):
            continue
        for action in sub_actions:
            if name in action.choices:
                action.choices[name].set_defaults(
                    **{k.replace("-", "_"): v for k, v in table.items()}
                )
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    argv = _apply_config_file(parser, argv)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
