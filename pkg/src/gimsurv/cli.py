"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 degenerate data or
simulation configuration, 5 optimizer did not converge.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import __version__, kernels
from .engine import (
    FUNCTIONALS,
    MonteCarloConfig,
    axis_values,
    curve_from_dict,
    default_psi_grid,
    fresh_seed,
    marginal_plausibility,
    plausibility_contour,
    plausibility_region,
)
from .exceptions import (
    DataFormatError,
    DegenerateConfigurationError,
    DegenerateDataError,
    DomainError,
)
from .harness import PRESETS, ExperimentDesign, preset, run_design
from .io import dumps_json, parse_dataset, write_atomic
from .km import kaplan_meier, reversed_kaplan_meier
from .models import Family, fit_mle

EXIT_DATA, EXIT_DEGENERATE, EXIT_NOT_CONVERGED = 3, 4, 5

log = logging.getLogger("gimsurv")


class NotConverged(Exception):
    pass


def _handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (DataFormatError, DomainError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except (DegenerateDataError, DegenerateConfigurationError) as exc:
            click.echo(f"error: degenerate: {exc}", err=True)
            sys.exit(EXIT_DEGENERATE)
        except NotConverged as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_NOT_CONVERGED)

    return wrapper


def _emit(text: str, output: str | None) -> None:
    if output:
        write_atomic(output, text)
    else:
        click.echo(text, nl=False)


def _parse_axis(spec: str, name: str) -> dict:
    parts = spec.split(":")
    if len(parts) not in (3, 4, 5):
        raise click.BadParameter(f"grid axis {spec!r} must be LOWER:UPPER:SIZE[:log|lin[:ANCHOR]]")
    try:
        lower, upper, size = float(parts[0]), float(parts[1]), int(parts[2])
        anchor = float(parts[4]) if len(parts) == 5 else None
    except ValueError:
        raise click.BadParameter(f"grid axis {spec!r} has non-numeric fields") from None
    scale = parts[3] if len(parts) >= 4 else "lin"
    if scale not in ("log", "lin"):
        raise click.BadParameter(f"grid axis scale must be 'log' or 'lin', got {scale!r}")
    if size < 1 or lower > upper or (scale == "log" and lower <= 0):
        raise click.BadParameter(f"invalid grid axis {spec!r}")
    out = {"name": name, "lower": lower, "upper": upper, "size": size, "log": scale == "log"}
    if anchor is not None:
        out["anchor"] = anchor
    return out


def _grid_spec(model: Family, axes: tuple[str, ...]):
    if not axes:
        return None
    if len(axes) != model.dim:
        raise click.BadParameter(f"{model.value} needs {model.dim} --grid axes, got {len(axes)}")
    return [_parse_axis(a, n) for a, n in zip(axes, model.param_names)]


def _config(M: int, seed: int | None, workers: int) -> MonteCarloConfig:
    if seed is None:
        seed = fresh_seed()
        click.echo(f"seed: {seed}", err=True)
    return MonteCarloConfig(M=M, seed=seed, parallel_workers=workers)


input_option = click.option(
    "--input", "input_path", required=True, type=click.Path(dir_okay=False), help="CSV with time,status columns."
)
model_option = click.option(
    "--model", type=click.Choice([f.value for f in Family]), required=True, help="Lifetime family."
)
side_option = click.option(
    "--censoring", "side", type=click.Choice(["right", "left"]), default="right", show_default=True
)
output_option = click.option("--output", "-o", type=click.Path(dir_okay=False), help="Write here instead of stdout.")


def mc_options(func):
    func = click.option("--grid", "axes", multiple=True, help="Axis LOWER:UPPER:SIZE[:log|lin[:ANCHOR]], one per parameter.")(func)
    func = click.option("-M", "--mc-samples", "M", type=click.IntRange(min=1), default=500, show_default=True)(func)
    func = click.option("--seed", type=int, default=None, help="Master seed (generated and reported if omitted).")(func)
    func = click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)(func)
    func = click.option(
        "--backend", type=click.Choice(sorted(kernels.BACKENDS)), default=None, help="Kernel backend."
    )(func)
    return func


@click.group()
@click.version_option(__version__, prog_name="gimsurv")
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    """Plausibility inference for censored lifetime data."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@input_option
@model_option
@side_option
@output_option
@_handle_errors
def fit(input_path, model, side, output):
    """Maximum likelihood fit."""
    data = parse_dataset(input_path, side)
    family = Family(model)
    mle = fit_mle(family, data)
    payload = {
        "version": __version__,
        "model": family.value,
        "censoring": data.side.value,
        "n": data.n,
        "events": data.n_events,
        **mle.to_dict(family),
    }
    if not mle.converged:
        raise NotConverged(f"optimizer stopped after {mle.iterations} iterations without converging")
    _emit(dumps_json(payload), output)


@main.command()
@input_option
@side_option
@click.option("--reversed", "reverse", is_flag=True, help="Estimate the censoring distribution (labels swapped).")
@output_option
@_handle_errors
def km(input_path, side, reverse, output):
    """Product-limit estimate as JSON."""
    data = parse_dataset(input_path, side)
    dist = reversed_kaplan_meier(data) if reverse else kaplan_meier(data)
    payload = {"version": __version__, "censoring": data.side.value, "reversed": reverse, **dist.to_dict()}
    _emit(dumps_json(payload), output)


def _contour(input_path, model, side, axes, M, seed, workers, backend):
    data = parse_dataset(input_path, side)
    family = Family(model)
    spec = _grid_spec(family, axes)
    config = _config(M, seed, workers)
    return plausibility_contour(family, data, spec, config, backend=backend)


@main.command()
@input_option
@model_option
@side_option
@mc_options
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@output_option
@_handle_errors
def plaus(input_path, model, side, axes, M, seed, workers, backend, fmt, output):
    """Plausibility contour on a grid."""
    curve = _contour(input_path, model, side, axes, M, seed, workers, backend)
    _emit(curve.to_csv() if fmt == "csv" else dumps_json(curve.to_dict()), output)


@main.command()
@click.option("--input", "input_path", type=click.Path(dir_okay=False), help="CSV with time,status columns.")
@click.option("--model", type=click.Choice([f.value for f in Family]))
@side_option
@mc_options
@click.option("--curve", "curve_path", type=click.Path(exists=True, dir_okay=False), help="Reuse a `plaus` JSON.")
@click.option("--alpha", type=float, default=0.05, show_default=True)
@output_option
@_handle_errors
def region(input_path, model, side, axes, M, seed, workers, backend, curve_path, alpha, output):
    """Plausibility region {theta : p(theta) > alpha}."""
    if not 0 < alpha < 1:
        raise click.BadParameter("alpha must lie in (0, 1)")
    if curve_path:
        curve = curve_from_dict(json.loads(Path(curve_path).read_text()))
    else:
        if not input_path or not model:
            raise click.UsageError("give --curve, or --input with --model")
        curve = _contour(input_path, model, side, axes, M, seed, workers, backend)
    reg = plausibility_region(curve, alpha)
    payload = {
        "version": __version__,
        "model": curve.model.value,
        **reg.to_dict(),
        "seed": curve.config.seed,
        "M": curve.config.M,
        "grid_spec": curve.grid_spec,
    }
    _emit(dumps_json(payload), output)


@main.command()
@input_option
@click.option("--model", type=click.Choice([f.value for f in Family]), default=None)
@side_option
@mc_options
@click.option("--functional", type=click.Choice(sorted(FUNCTIONALS)), required=True)
@click.option("--psi-grid", default=None, help="LOWER:UPPER:SIZE[:log|lin] for the functional's axis.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@output_option
@_handle_errors
def marginal(input_path, model, side, axes, M, seed, workers, backend, functional, psi_grid, fmt, output):
    """Marginal plausibility of a named functional of the parameters."""
    family, psi = FUNCTIONALS[functional]
    if model and Family(model) is not family:
        raise click.BadParameter(f"{functional} requires --model {family.value}")
    curve = _contour(input_path, family.value, side, axes, M, seed, workers, backend)
    if psi_grid:
        a = _parse_axis(psi_grid, "psi")
        grid = axis_values(a["lower"], a["upper"], a["size"], a["log"])
    else:
        grid = default_psi_grid(curve, psi)
    out = marginal_plausibility(curve, psi, grid, functional)
    _emit(out.to_csv() if fmt == "csv" else dumps_json(out.to_dict()), output)


@main.command()
@click.option("--design", required=True, help=f"Preset name ({', '.join(sorted(PRESETS))}) or JSON design file.")
@click.option("--replications", type=click.IntRange(min=1), default=None)
@click.option("--theta", type=float, multiple=True, help="Override the true parameter (repeat per coordinate).")
@click.option("-M", "--mc-samples", "M", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--full-scale", is_flag=True, help="10,000 replications and M=500.")
@click.option("--backend", type=click.Choice(sorted(kernels.BACKENDS)), default=None)
@click.option("--records", "records_path", type=click.Path(dir_okay=False), help="Long-form per-replication CSV.")
@output_option
@_handle_errors
def simulate(design, replications, theta, M, seed, workers, full_scale, backend, records_path, output):
    """Coverage or validity simulation study."""
    if seed is None:
        seed = fresh_seed()
        click.echo(f"seed: {seed}", err=True)
    overrides = {}
    if replications:
        overrides["replications"] = replications
    if theta:
        overrides["true_theta"] = tuple(theta)
    if design in PRESETS:
        if M:
            overrides["M"] = M
        try:
            exp = preset(design, seed=seed, full_scale=full_scale, workers=workers, **overrides)
        except ValueError as exc:
            raise click.BadParameter(str(exc)) from None
    else:
        path = Path(design)
        if not path.is_file():
            raise click.BadParameter(f"{design!r} is neither a preset nor a design file")
        try:
            payload = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{design}: invalid JSON: {exc}") from None
        payload.update(seed=seed, workers=workers)
        if M:
            payload["M"] = M
        if replications:
            payload["replications"] = replications
        if theta:
            payload["true_theta"] = list(theta)
        try:
            exp = ExperimentDesign.from_dict(payload)
        except (KeyError, ValueError) as exc:
            raise DataFormatError(f"{design}: invalid design: {exc}") from None
    report = run_design(exp, backend=backend)
    text = dumps_json(report.to_dict(include_records=False))
    if records_path:
        write_atomic(records_path, report.records_csv())
    _emit(text, output)


if __name__ == "__main__":
    main()
