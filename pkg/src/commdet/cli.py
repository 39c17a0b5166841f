"""Command-line interface.

Configuration can come from a TOML file with sections [model], [data],
[train] and [sweep]; every key there is also a CLI flag, and explicit flags
win. All randomness hangs off the top-level --seed.
"""

from __future__ import annotations

import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import click

from .generators import (GbmConfig, MixtureConfig, SbmConfig, sample_gbm,
                         sample_sbm, sample_sbm_mixture, save_dataset,
                         load_dataset)
from .gnn import GnnConfig, GnnModel
from .experiments import EXPERIMENT_NAMES, SweepSpec, run_experiment, sweep
from .train import train, evaluate


def _load_config(ctx, param, value):
    """Map config-file sections onto per-command click defaults."""
    if value is None:
        return None
    with open(value, "rb") as fh:
        conf = tomllib.load(fh)
    model = conf.get("model", {})
    data = conf.get("data", {})
    train_sec = conf.get("train", {})
    sweep_sec = conf.get("sweep", {})
    ctx.default_map = {
        "gen": {**data},
        "train": {**model, **data, **train_sec},
        "eval": {},
        "sweep": {**data, **sweep_sec},
        "experiment": {},
        "snap-build": {},
    }
    return value


@click.group()
@click.option("--config", type=click.Path(exists=True), callback=_load_config,
              expose_value=False, is_eager=True,
              help="TOML config file with [model]/[data]/[train]/[sweep].")
def main():
    """Community detection: generators, detectors, training, experiments."""


@main.command()
@click.option("--kind", type=click.Choice(["sbm", "mixture", "gbm"]),
              default="sbm", show_default=True)
@click.option("--n", default=1000, show_default=True)
@click.option("--k", default=2, show_default=True)
@click.option("--a", default=8.0, show_default=True, help="SBM within rate.")
@click.option("--b", default=2.0, show_default=True, help="SBM cross rate.")
@click.option("--d-avg", default=3.0, show_default=True,
              help="Mixture average degree.")
@click.option("--two-sided", is_flag=True,
              help="Mirror mixture draws to the disassociative side.")
@click.option("--s", "separation", default=1.0, show_default=True,
              help="GBM mean separation S.")
@click.option("--t", "radius", default=7.0710678, show_default=True,
              help="GBM radius scale T.")
@click.option("--dim", default=2, show_default=True, help="GBM dimension.")
@click.option("--count", default=10, show_default=True)
@click.option("--split", default="train", show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
def gen(kind, n, k, a, b, d_avg, two_sided, separation, radius, dim, count,
        split, out, seed):
    """Sample a dataset to disk (edge lists + labels + manifest.csv)."""
    if kind == "sbm":
        samples = (sample_sbm(SbmConfig(n, k, a, b), seed=(seed, i))
                   for i in range(count))
    elif kind == "mixture":
        samples = sample_sbm_mixture(
            MixtureConfig(n=n, k=k, d_avg=d_avg, count=count,
                          two_sided=two_sided), seed=seed)
    else:
        samples = (sample_gbm(GbmConfig(n=n, k=k, d=dim, S=separation,
                                        T=radius), seed=(seed, i))
                   for i in range(count))
    manifest = save_dataset(samples, out, split=split)
    click.echo(f"wrote {count} samples; manifest: {manifest}")


@main.command(name="train")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True),
              help="Dataset directory written by `gen`.")
@click.option("--val-data", type=click.Path(exists=True))
@click.option("--depth", default=20, show_default=True)
@click.option("--width", default=10, show_default=True)
@click.option("--j", "j_scales", default=3, show_default=True)
@click.option("--classes", default=2, show_default=True)
@click.option("--variant", type=click.Choice(["node_only", "line_graph"]),
              default="node_only", show_default=True)
@click.option("--epochs", default=1, show_default=True)
@click.option("--lr", default=0.001, show_default=True)
@click.option("--out", required=True, type=click.Path(),
              help="Checkpoint path.")
@click.option("--seed", default=0, show_default=True)
def train_cmd(data_dir, val_data, depth, width, j_scales, classes, variant,
              epochs, lr, out, seed):
    """Train a model on a stored dataset."""
    dataset = load_dataset(data_dir, split="train")
    val = load_dataset(val_data) if val_data else None
    cfg = GnnConfig(depth=depth, width=width, J=j_scales, classes=classes,
                    variant=variant)
    model = GnnModel.init(cfg, seed=seed)
    run = train(model, dataset, epochs=epochs, lr=lr, seed=seed, val_data=val,
                checkpoint_path=out, log_every=50, progress=click.echo)
    model.save(out)
    click.echo(f"final epoch loss {run.epoch_losses[-1]:.4f}; saved {out}")


@main.command(name="eval")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--split", default=None)
def eval_cmd(model_path, data_dir, split):
    """Mean overlap of a trained model on a stored dataset."""
    model = GnnModel.load(model_path)
    dataset = load_dataset(data_dir, split=split)
    click.echo(f"mean overlap {evaluate(model, dataset):.4f} "
               f"over {len(dataset)} graphs")


@main.command(name="sweep")
@click.option("--detectors", default="bh_assoc,laplacian_sym",
              show_default=True, help="Comma-separated detector names.")
@click.option("--snr-grid", default="0.5,1,1.5,2,3", show_default=True)
@click.option("--graphs-per-point", default=10, show_default=True)
@click.option("--n", default=1000, show_default=True)
@click.option("--k", default=2, show_default=True)
@click.option("--d-avg", default=4.0, show_default=True)
@click.option("--assoc/--disassoc", default=True, show_default=True)
@click.option("--pm-layers", default=30, show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True),
              help="Checkpoint for the 'gnn' detector.")
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
def sweep_cmd(detectors, snr_grid, graphs_per_point, n, k, d_avg, assoc,
              pm_layers, model_path, out, seed):
    """Overlap-vs-SNR sweep over a detector list; writes one CSV."""
    spec = SweepSpec(
        detectors=[d.strip() for d in detectors.split(",") if d.strip()],
        snr_grid=[float(x) for x in snr_grid.split(",")],
        graphs_per_point=graphs_per_point, n=n, k=k, d_avg=d_avg,
        assoc=assoc, pm_layers=pm_layers, gnn_model=model_path, seed=seed,
        output=out)
    rows = sweep(spec)
    click.echo(f"wrote {len(rows)} rows to {out}")


@main.command()
@click.argument("name", type=click.Choice(EXPERIMENT_NAMES))
@click.option("--out-dir", default="results", show_default=True,
              type=click.Path())
@click.option("--full", is_flag=True, help="Original scales (hours).")
@click.option("--snap-edges", type=click.Path())
@click.option("--snap-communities", type=click.Path())
@click.option("--seed", default=0, show_default=True)
def experiment(name, out_dir, full, snap_edges, snap_communities, seed):
    """Run a named benchmark experiment; emits CSV plus summary.txt."""
    run_experiment(name, out_dir, seed=seed, full=full,
                   snap_edge_file=snap_edges,
                   snap_community_file=snap_communities,
                   progress=click.echo)
    click.echo(f"results under {out_dir}")


@main.command(name="snap-build")
@click.option("--edges", required=True, type=click.Path(exists=True))
@click.option("--communities", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--max-community", default=800, show_default=True)
@click.option("--test-fraction", default=0.1, show_default=True)
@click.option("--seed", default=0, show_default=True)
def snap_build_cmd(edges, communities, out, max_community, test_fraction,
                   seed):
    """Extract the 3-class subgraph dataset from SNAP files."""
    from .snap import snap_build
    dataset = snap_build(edges, communities, max_community=max_community,
                         test_fraction=test_fraction, seed=seed)
    if not dataset:
        click.echo("no subgraphs extracted", err=True)
        sys.exit(1)
    manifest = save_dataset(dataset, out, split="train")
    n_test = sum(1 for s in dataset if s.meta["split"] == "test")
    click.echo(f"wrote {len(dataset)} subgraphs "
               f"({len(dataset) - n_test} train / {n_test} test) to {out}")


if __name__ == "__main__":
    main()
