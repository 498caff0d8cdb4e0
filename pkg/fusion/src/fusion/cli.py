"""Command-line entry point: train one mode and emit the run artifacts."""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .io import FormatError, load_schema, load_tokens, write_attention_csv, write_metrics
from .train import FusionMode, train


def _load_table(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


@click.command("fusion")
@click.option("--features", "features_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="CSV of raw features, one row per sample (no header).")
@click.option("--targets", "targets_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="CSV of targets, one value per sample.")
@click.option("--mode", type=click.Choice([m.value for m in FusionMode]),
              default="BASELINE", show_default=True)
@click.option("--tokens", "tokens_path", type=click.Path(exists=True, path_type=Path),
              help="Token / aligned configuration CSV (GC and GMC modes).")
@click.option("--schema", "schema_path", type=click.Path(exists=True, path_type=Path),
              help="Schema JSON next to the token CSV (GC and GMC modes).")
@click.option("--task", type=click.Choice(["classification", "regression"]),
              default="classification", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path),
              help="Output prefix; writes <out>.metrics.json and, for GMC, "
                   "<out>.attention.csv.")
def cli(features_path, targets_path, mode, tokens_path, schema_path, task,
        seed, epochs, out):
    """Train the predictor in one mode and write metrics (plus attention maps)."""
    mode = FusionMode(mode)
    features = _load_table(features_path)
    targets = np.loadtxt(targets_path, delimiter=",")
    labels = schema = None
    if mode is not FusionMode.BASELINE:
        if tokens_path is None or schema_path is None:
            raise click.UsageError(f"{mode.value} mode requires --tokens and --schema")
        labels, _ = load_tokens(tokens_path)
        schema = load_schema(schema_path)
    result = train(features, targets, mode, config_labels=labels, schema=schema,
                   task=task, seed=seed, max_epochs=epochs)
    metrics_path = Path(str(out) + ".metrics.json")
    write_metrics(metrics_path, mode=result.mode, seed=result.seed,
                  loss=result.loss, metric=result.metric, epochs=result.epochs)
    wrote = [str(metrics_path)]
    if result.attention is not None:
        attn_path = Path(str(out) + ".attention.csv")
        write_attention_csv(attn_path, result.attention, schema.gammas)
        wrote.append(str(attn_path))
    click.echo(f"{result.mode} seed={result.seed} loss={result.loss:.6f} "
               f"metric={result.metric:.6f} epochs={result.epochs}")
    click.echo("wrote " + " ".join(wrote))


def main():
    try:
        cli.main(standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(2)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except (FormatError, ValueError, RuntimeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    sys.exit(0)


if __name__ == "__main__":
    main()
