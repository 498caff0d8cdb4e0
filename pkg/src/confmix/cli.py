"""Command-line surface wiring the pipeline end to end."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from confmix import align as align_mod
from confmix import cluster as cluster_mod
from confmix import datasets as ds
from confmix import graph as graph_mod
from confmix.core import (
    AlignmentInputError,
    FormatError,
    load_configuration_set,
    save_configuration_set,
)

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

log = logging.getLogger("confmix.cli")


def _setup_logging():
    level = os.environ.get("CONFMIX_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_prefix: Path, command: str, parameters: dict,
                    inputs: list[Path], outputs: list[Path], started: float) -> None:
    manifest = {
        "command": command,
        "parameters": parameters,
        "input_hashes": {str(p): _sha256(p) for p in inputs if p.exists()},
        "outputs": [str(p) for p in outputs],
        "wall_ms": round((time.monotonic() - started) * 1000.0, 3),
    }
    path = Path(str(out_prefix) + ".manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _dump_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_features(path: Path, label_column: int | None):
    return ds.load_csv(path, has_header=False, label_column=label_column,
                       name=path.stem)


@click.group()
def cli():
    """Multi-resolution clustering configurations: extract, align, export."""
    _setup_logging()


@cli.command("synth")
@click.argument("kind", type=click.Choice(["moons", "blobs", "circles"]))
@click.option("--n", type=int, default=1000, show_default=True)
@click.option("--noise", type=float, default=0.05, show_default=True)
@click.option("--factor", type=float, default=0.5, show_default=True,
              help="Inner-circle radius for 'circles'.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
def cmd_synth(kind, n, noise, factor, seed, out):
    """Generate a synthetic dataset CSV (features, label column last)."""
    started = time.monotonic()
    if kind == "moons":
        data = ds.make_moons(n, noise=noise, seed=seed)
    elif kind == "blobs":
        data = ds.make_blobs(n, seed=seed)
    else:
        data = ds.make_circles(n, noise=noise, factor=factor, seed=seed)
    csv_path = Path(str(out) + ".csv")
    ds.save_csv(data, csv_path)
    _write_manifest(out, "synth",
                    {"kind": kind, "n": n, "noise": noise, "factor": factor, "seed": seed},
                    [], [csv_path], started)
    click.echo(f"wrote {csv_path} ({data.features.n_samples}x{data.features.n_features})")


@cli.command("graph")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--k", default="auto", show_default=True,
              help="Neighbor count, or 'auto' for max(3, ceil(log10 N)).")
@click.option("--lambda", "lam", type=float, default=15.0, show_default=True)
@click.option("--no-reweight", is_flag=True, help="Keep column-stochastic raw distances.")
@click.option("--label-column", type=int, default=None,
              help="Column index holding ground-truth labels to strip (e.g. -1).")
@click.option("--out", required=True, type=click.Path(path_type=Path))
def cmd_graph(input_path, k, lam, no_reweight, label_column, out):
    """Build the kNN affinity graph and persist it (Matrix Market + JSON header)."""
    started = time.monotonic()
    data = _load_features(input_path, label_column)
    k_val = None if k == "auto" else int(k)
    g = graph_mod.knn_build(data.features, k_val)
    click.echo(f"k={g.k}")
    if g.k is not None and lam >= g.k:
        click.echo(f"warning: lambda={lam:g} clamped to k-1={g.k - 1} per vertex degree")
    if no_reweight:
        g = graph_mod.column_stochastic(g)
    else:
        g = graph_mod.sgtsne_reweight(g, graph_mod.ReweightParams(lam=lam))
    mm_path = Path(str(out) + ".mtx")
    hdr_path = Path(str(out) + ".graph.json")
    graph_mod.save_graph(g, mm_path, hdr_path, lam=lam)
    _write_manifest(out, "graph",
                    {"input": str(input_path), "k": k, "lambda": lam,
                     "no_reweight": no_reweight, "label_column": label_column},
                    [input_path], [mm_path, hdr_path], started)
    click.echo(f"wrote {mm_path}")


@cli.command("front")
@click.option("--graph", "graph_prefix", required=True, type=click.Path(path_type=Path),
              help="Prefix of the .mtx/.graph.json pair written by 'graph'.")
@click.option("--mode", type=click.Choice(["cpm", "rb"]), default="cpm", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--union-support", is_flag=True,
              help="Symmetrize by max(w_ij, w_ji) instead of the arithmetic mean.")
@click.option("--out", required=True, type=click.Path(path_type=Path))
def cmd_front(graph_prefix, mode, seed, union_support, out):
    """Extract the BlueRed front: configuration CSV, front JSON, DOT lineage."""
    started = time.monotonic()
    mm_path = Path(str(graph_prefix) + ".mtx")
    hdr_path = Path(str(graph_prefix) + ".graph.json")
    g = graph_mod.load_graph(mm_path, hdr_path)
    if g.directed:
        if union_support:
            adj = g.adjacency.maximum(g.adjacency.T).tocsr()
            g = graph_mod.AffinityGraph(adj, directed=False, symmetrized=True,
                                        reweighted=g.reweighted, k=g.k)
        else:
            g = graph_mod.symmetrize(g)
    front = cluster_mod.descending_triangulation(g, mode=mode, seed=seed)
    cfgs = cluster_mod.front_configuration_set(front)
    csv_path = Path(str(out) + ".cfgs.csv")
    json_path = Path(str(out) + ".front.json")
    dot_path = Path(str(out) + ".lineage.dot")
    save_configuration_set(cfgs, csv_path)
    _dump_json(cluster_mod.front_to_json(front), json_path)
    with open(dot_path, "w", encoding="utf-8") as fh:
        fh.write(cluster_mod.lineage_dot(cfgs))
    _write_manifest(out, "front",
                    {"graph": str(graph_prefix), "mode": mode, "seed": seed,
                     "union_support": union_support},
                    [mm_path, hdr_path], [csv_path, json_path, dot_path], started)
    click.echo(f"front: {cfgs.n_configurations} nontrivial configurations, "
               f"gamma_max={front.gamma_max:g}")


@cli.command("align")
@click.option("--train", "train_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--anchors", "anchors_path", type=click.Path(path_type=Path), default=None,
              help="JSON anchors file; generated from --anchor-fraction when absent.")
@click.option("--anchor-fraction", type=float, default=0.001, show_default=True)
@click.option("--theta", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
def cmd_align(train_path, test_path, anchors_path, anchor_fraction, theta, seed, out):
    """RMS-align a test configuration set onto a train one."""
    started = time.monotonic()
    train = load_configuration_set(train_path)
    test = load_configuration_set(test_path)
    inputs = [train_path, test_path]
    if anchors_path is not None:
        with open(anchors_path, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
        anchors = align_mod.AnchorSet(np.asarray(spec["indices"], dtype=np.int64),
                                      spec.get("fraction", anchor_fraction))
        inputs.append(anchors_path)
    else:
        n = min(train.n_samples, test.n_samples)
        anchors = align_mod.select_anchors(n, anchor_fraction, seed)
        anchors_out = Path(str(out) + ".anchors.json")
        _dump_json({"seed": seed, "fraction": anchor_fraction,
                    "indices": anchors.indices.tolist()}, anchors_out)
    aligned, report = align_mod.rms_align(train, test, anchors, theta)
    csv_path = Path(str(out) + ".aligned.csv")
    map_path = Path(str(out) + ".mapping.json")
    save_configuration_set(aligned, csv_path)
    _dump_json(report.to_json(), map_path)
    _write_manifest(out, "align",
                    {"train": str(train_path), "test": str(test_path),
                     "theta": theta, "anchor_fraction": anchor_fraction, "seed": seed},
                    inputs, [csv_path, map_path], started)
    click.echo(f"aligned {len(report.pairs)} configuration pairs "
               f"({len(report.surplus_test_columns)} surplus)")


@cli.command("bench")
@click.option("--kinds", default="moons,blobs,circles", show_default=True)
@click.option("--seeds", default="0", show_default=True, help="Comma-separated seed list.")
@click.option("--n", type=int, default=1000, show_default=True)
@click.option("--mode", type=click.Choice(["cpm", "rb"]), default="cpm", show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
def cmd_bench(kinds, seeds, n, mode, out):
    """Best-configuration ARI vs ground truth per (dataset, seed), CSV + text table."""
    from confmix.core import ari

    started = time.monotonic()
    kind_list = [k.strip() for k in kinds.split(",") if k.strip()]
    seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    rows = []
    for kind in kind_list:
        for seed in seed_list:
            if kind == "moons":
                data = ds.make_moons(n, noise=0.05, seed=seed)
            elif kind == "blobs":
                data = ds.make_blobs(n, seed=seed)
            elif kind == "circles":
                data = ds.make_circles(n, noise=0.02, factor=0.5, seed=seed)
            else:
                raise click.UsageError(f"unknown dataset kind {kind!r}")
            t0 = time.monotonic()
            cfgs = cluster_mod.extract_configurations(data.features, mode=mode, seed=seed)
            elapsed = time.monotonic() - t0
            best = max(ari(c, data.labels) for c in cfgs.configurations)
            rows.append((kind, seed, best, cfgs.n_configurations, elapsed))
    csv_path = Path(str(out) + ".bench.csv")
    txt_path = Path(str(out) + ".bench.txt")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("dataset,seed,best_ari,front_size,seconds\n")
        for kind, seed, best, m, elapsed in rows:
            fh.write(f"{kind},{seed},{best:.6f},{m},{elapsed:.3f}\n")
    with open(txt_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{'dataset':<10}{'seed':>6}{'best ARI':>12}{'m':>4}{'sec':>8}\n")
        for kind, seed, best, m, elapsed in rows:
            fh.write(f"{kind:<10}{seed:>6}{best:>12.4f}{m:>4}{elapsed:>8.2f}\n")
    _write_manifest(out, "bench",
                    {"kinds": kinds, "seeds": seeds, "n": n, "mode": mode},
                    [], [csv_path, txt_path], started)
    click.echo(open(txt_path).read().rstrip())


@cli.command("tokens")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, path_type=Path),
              help="Configuration-set CSV.")
@click.option("--out", required=True, type=click.Path(path_type=Path))
def cmd_tokens(input_path, out):
    """Export a configuration set as tokens: CSV copy plus a schema JSON."""
    started = time.monotonic()
    cfgs = load_configuration_set(input_path)
    csv_path = Path(str(out) + ".tokens.csv")
    schema_path = Path(str(out) + ".schema.json")
    save_configuration_set(cfgs, csv_path)
    schema = {
        "m": cfgs.n_configurations,
        "cardinalities": [c.n_clusters for c in cfgs.configurations],
        "gammas": list(cfgs.gammas),
    }
    _dump_json(schema, schema_path)
    _write_manifest(out, "tokens", {"input": str(input_path)},
                    [input_path], [csv_path, schema_path], started)
    click.echo(f"wrote {csv_path} and {schema_path}")


def main():
    try:
        cli.main(standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(EXIT_USAGE)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(EXIT_USAGE)
    except (FormatError, AlignmentInputError, FileNotFoundError) as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    except ValueError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    sys.exit(0)


if __name__ == "__main__":
    main()
