## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import sys
import functools
from dataclasses import replace

import click

from . import config
from .types import Status, Scheme, SweepAxis, InterferenceMode, RoddError
from .session import Session
from .geometry import NetworkParams, mean_neighbor_count
from .phy import RoddParams
from .baselines import RaParams, aloha_error_lower_bound, csma_error_lower_bound
from .harness import SweepConfig, run_sweep, emit_csv, HEADER, ResultRow


def _print_journal(session: Session):
    for record in session.records:
        print(
            " ", "\033[92m✓\033[0m" if record.status == Status.SUCCESS else "\033[91m𐄂\033[0m",
            record.step.value,
            dict(record.context),
            file=sys.stderr,
        )


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except RoddError as exc:
            raise click.ClickException(f"{exc} {exc.context}" if exc.context else str(exc)) from exc
    return wrapper


def _print_rows(rows, out):
    if out is not None:
        emit_csv(rows, out)
        return
    print(",".join(HEADER))
    for row in rows:
        print(",".join(str(v) for v in row))


def _published_config(scheme: Scheme, frame_length, budget, threshold, trials, seed, workers, mode, receivers):
    network = NetworkParams.published()
    q = 1.0 / (mean_neighbor_count(network) + 1.0)
    rodd = RoddParams(frame_length=frame_length, on_probability=q)
    access = RaParams(network=network, threshold=threshold, budget=budget)
    value = frame_length if scheme is Scheme.RODD else budget
    return SweepConfig(
        network=network, rodd=rodd, access=access, axis=SweepAxis.FRAME_LENGTH, grid=(float(value),),
        schemes=(scheme,), experiment=f"sim-{scheme.value}", trials=trials, seed=seed, workers=workers,
        mode=InterferenceMode(mode), receivers=receivers,
    )


common = [
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--trials", type=int, default=1, show_default=True),
    click.option("--workers", type=int, default=config.WORKERS, show_default=True),
    click.option("--mode", type=click.Choice([m.value for m in InterferenceMode]), default="gaussian"),
    click.option("--out", type=click.Path(dir_okay=False), default=None),
    click.option("--verbose", is_flag=True, default=False),
]


def with_common(fn):
    for option in reversed(common):
        fn = option(fn)
    return fn


@click.group()
def main():
    pass


@main.group()
def sim():
    """Monte Carlo simulation of one scheme on the published network."""


@sim.command()
@click.option("--frame-length", type=int, default=280, show_default=True)
@click.option("--receivers", type=int, default=None)
@with_common
@_handle_errors
def rodd(frame_length, receivers, seed, trials, workers, mode, out, verbose):
    cfg = _published_config(Scheme.RODD, frame_length, 0, config.SIMULATED_THRESHOLD,
                            trials, seed, workers, mode, receivers)
    _run_and_print(cfg, out, verbose)


@sim.command()
@click.option("--budget", type=int, default=2000, show_default=True)
@click.option("--threshold", type=float, default=config.SIMULATED_THRESHOLD, show_default=True)
@with_common
@_handle_errors
def aloha(budget, threshold, seed, trials, workers, mode, out, verbose):
    cfg = _published_config(Scheme.ALOHA_MC, 280, budget, threshold, trials, seed, workers, mode, None)
    _run_and_print(cfg, out, verbose)


@sim.command()
@click.option("--budget", type=int, default=2000, show_default=True)
@click.option("--threshold", type=float, default=config.SIMULATED_THRESHOLD, show_default=True)
@with_common
@_handle_errors
def csma(budget, threshold, seed, trials, workers, mode, out, verbose):
    cfg = _published_config(Scheme.CSMA_MC, 280, budget, threshold, trials, seed, workers, mode, None)
    _run_and_print(cfg, out, verbose)


def _run_and_print(cfg, out, verbose):
    session = Session()
    rows = run_sweep(cfg, session=session, progress=verbose)
    if verbose:
        _print_journal(session)
    _print_rows(rows, out)


@main.group()
def bound():
    """Analytic lower bounds on the miss probability of random access."""


def _bound_rows(scheme: Scheme, fn, budgets, threshold, snr_db):
    network = NetworkParams.published(snr=config.parse_quantity(snr_db))
    ra = RaParams(network=network, threshold=threshold)
    rows = []
    for budget in budgets:
        value = fn(ra.with_budget(budget))
        rows.append(ResultRow(scheme.value, SweepAxis.FRAME_LENGTH.value, float(budget), value, 0.0, 1, 0.0))
    return rows


@bound.command(name="aloha")
@click.argument("budgets", type=int, nargs=-1, required=True)
@click.option("--threshold", type=float, default=config.BOUND_THRESHOLD, show_default=True)
@click.option("--snr", type=str, default=f"{config.SNR_DB} dB", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_handle_errors
def bound_aloha(budgets, threshold, snr, out):
    _print_rows(_bound_rows(Scheme.ALOHA_BOUND, aloha_error_lower_bound, budgets, threshold, snr), out)


@bound.command(name="csma")
@click.argument("budgets", type=int, nargs=-1, required=True)
@click.option("--threshold", type=float, default=config.BOUND_THRESHOLD, show_default=True)
@click.option("--snr", type=str, default=f"{config.SNR_DB} dB", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@_handle_errors
def bound_csma(budgets, threshold, snr, out):
    _print_rows(_bound_rows(Scheme.CSMA_BOUND, csma_error_lower_bound, budgets, threshold, snr), out)


@main.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@with_common
@_handle_errors
def sweep(config_file, seed, trials, workers, mode, out, verbose):
    """Run an experiment described by a JSON configuration."""
    session = Session()
    cfg = SweepConfig.load(config_file, session=session)
    ctx = click.get_current_context()
    overrides = {
        name: value for name, value in dict(seed=seed, trials=trials, workers=workers, mode=InterferenceMode(mode)).items()
        if ctx.get_parameter_source(name) is not click.core.ParameterSource.DEFAULT
    }
    cfg = replace(cfg, **overrides)

    rows = run_sweep(cfg, session=session, progress=verbose)
    if verbose:
        _print_journal(session)
    _print_rows(rows, out or cfg.output)


if __name__ == "__main__":
    main()
