"""Experiment command line.

Subcommands
-----------
``table2``    score the built-in six-state example against its known values.
``oracle``    exhaustively verify the two distinguished assignments are optimal.
``two-layer`` train and score the full model grid on image patches.
``stack``     fit higher layers on a finished two-layer run and correlate scores.

Exit codes: 0 success, 1 validation failure, 2 data error. The data
directory can also be supplied through the ``LODEM_DATA_DIR`` environment
variable.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .errors import DomainError, IdxFormatError
from .experiments import ExperimentConfig, run_stacking, run_two_layer
from .ingestion import PatchSpec, default_patch_locations
from .reference import (
    BEST_LOD_ASSIGNMENT,
    BEST_MI_ASSIGNMENT,
    assignment_partition,
    reference_scores,
    search_assignments,
    six_state_pdata,
)

EXIT_VALIDATION = 1
EXIT_DATA = 2

_GOLDENS = {
    "lod_p1": (0.0137, 5e-4),
    "lod_p2": (0.129, 1e-3),
    "mi_p1": (0.983, 1e-3),
    "mi_p2": (1.0986, 1e-3),
}


@click.group()
def main():
    """Two-layer generative model experiments with LOD diagnostics."""


@main.command("table2")
def cmd_table2():
    """Check the six-state example scores against their known values."""
    scores = reference_scores()
    ok = True
    for name in ("lod_p1", "lod_p2", "mi_p1", "mi_p2"):
        expected, tolerance = _GOLDENS[name]
        value = scores[name]
        passed = abs(value - expected) <= tolerance
        ok &= passed
        click.echo(
            f"{name} = {value:.6f}  expected {expected} +/- {tolerance:g}  "
            f"{'PASS' if passed else 'FAIL'}"
        )
    sys.exit(0 if ok else EXIT_VALIDATION)


def _blocks(partition) -> str:
    return " ".join("{" + ",".join(f"x{i + 1}" for i in block) + "}" for block in partition)


@main.command("oracle")
def cmd_oracle():
    """Exhaustively search the 729 deterministic assignments."""
    result = search_assignments(six_state_pdata(), 3)
    expected_lod = assignment_partition(BEST_LOD_ASSIGNMENT)
    expected_mi = assignment_partition(BEST_MI_ASSIGNMENT)
    lod_match = result.best_lod_partition == expected_lod
    mi_match = result.best_mi_partition == expected_mi
    lod_value_ok = abs(result.best_lod - _GOLDENS["lod_p1"][0]) <= _GOLDENS["lod_p1"][1]
    mi_value_ok = abs(result.best_mi - _GOLDENS["mi_p2"][0]) <= _GOLDENS["mi_p2"][1]
    click.echo(f"assignments evaluated: {result.n_assignments}")
    click.echo(
        f"min-LOD grouping: {_blocks(result.best_lod_partition)}  "
        f"lod={result.best_lod:.6f}  unique={'yes' if result.best_lod_unique else 'no'}  "
        f"matches-expected={'yes' if lod_match else 'no'}"
    )
    click.echo(
        f"max-MI grouping: {_blocks(result.best_mi_partition)}  "
        f"mi={result.best_mi:.6f}  unique={'yes' if result.best_mi_unique else 'no'}  "
        f"matches-expected={'yes' if mi_match else 'no'}"
    )
    ok = (
        lod_match
        and mi_match
        and result.best_lod_unique
        and result.best_mi_unique
        and lod_value_ok
        and mi_value_ok
    )
    sys.exit(0 if ok else EXIT_VALIDATION)


def _parse_patches(spec: str | None) -> tuple[PatchSpec, ...]:
    if spec is None:
        return default_patch_locations()
    patches = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        pieces = [int(v) for v in part.split(",")]
        if len(pieces) != 2:
            raise DomainError(f"patch {part!r} must be 'row,col'")
        patches.append(PatchSpec(row=pieces[0], col=pieces[1]))
    if not patches:
        raise DomainError("no patches given")
    return tuple(patches)


@main.command("two-layer")
@click.option("--data", type=click.Choice(["mnist", "synthetic"]), default="synthetic",
              show_default=True, help="Data source.")
@click.option("--mnist-dir", type=click.Path(), default=None,
              envvar="LODEM_DATA_DIR",
              help="Directory holding the IDX training images (or set LODEM_DATA_DIR).")
@click.option("--models", "models_", default="sl,il,ci,ici", show_default=True,
              help="Comma-separated model kinds to train.")
@click.option("--ny", default=6, show_default=True,
              help="Largest latent size index (sizes 1..ny).")
@click.option("--restarts", default=20, show_default=True)
@click.option("--max-iters", default=1000, show_default=True)
@click.option("--tol", default=1e-8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--patches", default=None,
              help="Override patch locations, e.g. '12,10;12,12' (row,col pairs).")
@click.option("--out", default="two_layer_out", show_default=True,
              type=click.Path(), help="Output directory.")
def cmd_two_layer(data, mnist_dir, models_, ny, restarts, max_iters, tol, seed, patches, out):
    """Train and score the two-layer model grid; write CSVs and models."""
    try:
        config = ExperimentConfig(
            data=data,
            mnist_dir=mnist_dir,
            seed=seed,
            restarts=restarts,
            max_iters=max_iters,
            tol=tol,
            kinds=tuple(k.strip() for k in models_.split(",") if k.strip()),
            ny_max=ny,
            patches=_parse_patches(patches),
        )
    except DomainError as exc:
        click.echo(f"invalid configuration: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    try:
        rows, _ = run_two_layer(config, out)
    except (FileNotFoundError, IdxFormatError, OSError) as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    click.echo(f"wrote {len(rows)} rows under {out}")
    sys.exit(0)


@main.command("stack")
@click.option("--from", "from_dir", required=True, type=click.Path(),
              help="Output directory of a finished two-layer run.")
@click.option("--out", default="stack_out", show_default=True, type=click.Path())
def cmd_stack(from_dir, out):
    """Fit higher layers on persisted lower models; correlate the scores."""
    if not Path(from_dir).exists():
        click.echo(f"data error: {from_dir} does not exist", err=True)
        sys.exit(EXIT_DATA)
    try:
        rows, correlations = run_stacking(from_dir, out)
    except FileNotFoundError as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(EXIT_DATA)
    except DomainError as exc:
        click.echo(f"invalid configuration: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    click.echo(f"wrote {len(rows)} stack rows and {len(correlations)} correlations under {out}")
    sys.exit(0)


if __name__ == "__main__":
    main()
