## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import csv
import math
import time
import functools
import collections
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import config
from .types import Scheme, SweepAxis, InterferenceMode, SnrWiring, ParameterError, OutputError
from .steps import Steps as S
from .session import Session, ensure_session
from .utils import Stream, derive_rng, derive_seed, parallel_map
from .geometry import NetworkParams, NetworkRealization, generate_network, mean_neighbor_count
from .phy import RoddParams, CodebookStore, draw_messages, frame_waveforms, simulate_frame
from .denoiser import build_prior
from .decoder import DecoderOptions, decode
from .baselines import RaParams, run_aloha, run_csma, aloha_error_lower_bound, csma_error_lower_bound


__all__ = [
    "SweepConfig",
    "ResultRow",
    "TrialResult",
    "HEADER",
    "point_params",
    "run_rodd",
    "run_trial",
    "run_sweep",
    "emit_csv",
]


HEADER = ["scheme", "axis", "value", "miss_prob", "stderr", "trials", "wall_ms"]

ResultRow = collections.namedtuple("ResultRow", HEADER)

BOUNDS = (Scheme.ALOHA_BOUND, Scheme.CSMA_BOUND)


@dataclass(frozen=True)
class SweepConfig:
    """
    One experiment: a grid over frame length, SINR threshold or SNR in dB,
    the schemes to evaluate, and the base parameters of every component.
    """

    network: NetworkParams
    rodd: RoddParams
    access: RaParams
    axis: SweepAxis = SweepAxis.FRAME_LENGTH
    grid: tuple = (280,)
    schemes: tuple = (Scheme.RODD,)
    experiment: str = "sweep"
    trials: int = config.TRIALS
    seed: int = 0
    workers: int = config.WORKERS
    mode: InterferenceMode = InterferenceMode.GAUSSIAN
    output: Optional[str] = None
    interior_margin: Optional[float] = None
    receivers: Optional[int] = None
    timing: bool = False
    bound_threshold: float = config.BOUND_THRESHOLD
    decoder: DecoderOptions = field(default_factory=DecoderOptions)

    def __post_init__(self):
        if len(self.grid) == 0:
            raise ParameterError("sweep grid must not be empty", experiment=self.experiment)
        if self.trials < 1:
            raise ParameterError("at least one trial is required", trials=self.trials)

    @classmethod
    def from_dict(cls, data: dict):
        net = dict(data.get("network", {}))
        side = float(net.get("side", config.REGION_SIDE))
        nodes = net.get("nodes", config.NODE_COUNT)
        intensity = net.get("intensity")
        if intensity is None:
            intensity = (nodes if nodes is not None else config.NODE_COUNT) / side ** 2
        network = NetworkParams(
            intensity=float(intensity),
            side=side,
            node_count=None if nodes is None else int(nodes),
            path_loss=float(net.get("path_loss", config.PATH_LOSS)),
            threshold=config.parse_quantity(net.get("threshold", config.GAIN_THRESHOLD)),
            snr=config.parse_quantity(net.get("snr", f"{config.SNR_DB} dB")),
        )
        c = mean_neighbor_count(network)

        rd = dict(data.get("rodd", {}))
        q = rd.get("on_probability")
        rodd = RoddParams(
            message_bits=int(rd.get("message_bits", config.MESSAGE_BITS)),
            frame_length=int(rd.get("frame_length", 280)),
            on_probability=float(q) if q is not None else 1.0 / (c + 1.0),
        )

        ac = dict(data.get("access", {}))
        access = RaParams(
            network=network,
            message_bits=rodd.message_bits,
            sender_bits=ac.get("sender_bits"),
            threshold=config.parse_quantity(ac.get("threshold", config.SIMULATED_THRESHOLD)),
            transmit_probability=ac.get("transmit_probability"),
            budget=int(ac.get("budget", 0)),
        )

        dc = dict(data.get("decoder", {}))
        try:
            wiring = SnrWiring(dc.get("snr_wiring", SnrWiring.EFFECTIVE.value))
            axis = SweepAxis(data.get("axis", SweepAxis.FRAME_LENGTH.value))
            schemes = tuple(Scheme(s) for s in data.get("schemes", [Scheme.RODD.value]))
            mode = InterferenceMode(data.get("mode", InterferenceMode.GAUSSIAN.value))
        except ValueError as exc:
            raise ParameterError(str(exc)) from exc

        decoder = DecoderOptions(
            iterations=int(dc.get("iterations", config.ITERATIONS)),
            tolerance=float(dc.get("tolerance", config.TOLERANCE)),
            exact_denoiser=bool(dc.get("exact_denoiser", False)),
            snr_wiring=wiring,
        )

        return cls(
            network=network,
            rodd=rodd,
            access=access,
            axis=axis,
            grid=tuple(float(v) for v in data.get("grid", [])),
            schemes=schemes,
            experiment=str(data.get("experiment", "sweep")),
            trials=int(data.get("trials", config.TRIALS)),
            seed=int(data.get("seed", 0)),
            workers=int(data.get("workers", config.WORKERS)),
            mode=mode,
            output=data.get("output"),
            interior_margin=data.get("interior_margin"),
            receivers=data.get("receivers"),
            timing=bool(data.get("timing", False)),
            bound_threshold=config.parse_quantity(ac.get("bound_threshold", config.BOUND_THRESHOLD)),
            decoder=decoder,
        )

    @classmethod
    def load(cls, path: str, session=None):
        session = ensure_session(session)
        with session.setup_log() as report:
            try:
                data = config.load_config(path)
            except (OSError, ValueError) as exc:
                report(S.LoadConfig, failure=True, path=path, exception=str(exc))
                raise ParameterError("cannot read sweep configuration", path=path) from exc
            report(S.LoadConfig, success=True, path=path, experiment=data.get("experiment"))
        return cls.from_dict(data)


def point_params(cfg: SweepConfig, value: float) -> tuple:
    """Network, frame and access parameters at one point of the grid."""
    network, rodd, access = cfg.network, cfg.rodd, cfg.access
    if cfg.axis is SweepAxis.FRAME_LENGTH:
        rodd = replace(rodd, frame_length=int(value))
        access = access.with_budget(int(value))
    elif cfg.axis is SweepAxis.THRESHOLD:
        access = replace(access, threshold=float(value))
    else:
        network = replace(network, snr=10.0 ** (float(value) / 10.0))
        access = replace(access, network=network)
    return network, rodd, access


def _receiver_mask(net: NetworkRealization, cfg: SweepConfig, seed: int) -> np.ndarray:
    mask = net.interior(cfg.interior_margin)
    if cfg.receivers is not None and cfg.receivers < mask.sum():
        rng = derive_rng(seed, Stream.RECEIVERS)
        chosen = rng.choice(np.flatnonzero(mask), size=int(cfg.receivers), replace=False)
        mask = np.zeros(net.size, dtype=bool)
        mask[chosen] = True
    return mask


def run_rodd(net: NetworkRealization, rodd: RoddParams, cfg: SweepConfig, seed: int,
             receivers: np.ndarray, session=None) -> tuple:
    """
    One RODD frame for the whole network, decoded at every selected
    receiver.  Returns (missed pairs, pairs); an aborted decode misses all.
    """
    session = ensure_session(session)
    params = net.params
    prior = build_prior(params.threshold, params.path_loss, rodd.message_bits, cfg.decoder.grid, session=session)
    messages = draw_messages(net.size, rodd, derive_rng(seed, Stream.MESSAGES))
    waveforms = frame_waveforms(net, rodd, messages, seed)
    store = CodebookStore(rodd, seed, session=session)

    misses, pairs = 0, 0
    for receiver in np.flatnonzero(receivers):
        instance = simulate_frame(net, rodd, messages, int(receiver), mode=cfg.mode, seed=seed,
                                  waveforms=waveforms, store=store, session=session)
        if instance.neighbor_count == 0:
            continue
        result = decode(instance, prior, rodd=rodd, options=cfg.decoder, session=session)
        pairs += instance.neighbor_count
        if result.failed:
            misses += instance.neighbor_count
        else:
            misses += int(np.count_nonzero(result.messages != instance.messages))
    return misses, pairs


@dataclass
class TrialResult:
    trial: int
    counts: dict
    elapsed: dict
    records: list


def run_trial(cfg: SweepConfig, trial: int) -> TrialResult:
    """
    Every Monte Carlo scheme at every grid point for one trial seed.  All
    schemes see the same network realization.
    """
    session = Session()
    seed = derive_seed(cfg.seed, trial)
    counts, elapsed = {}, {}
    access_cache = {}

    with session.setup_log() as report:
        for value in cfg.grid:
            network, rodd, access = point_params(cfg, value)
            net = generate_network(network, seed, session=session)
            receivers = _receiver_mask(net, cfg, seed)

            for scheme in cfg.schemes:
                if scheme in BOUNDS:
                    continue
                start = time.perf_counter()
                if scheme is Scheme.RODD:
                    counts[scheme, value] = run_rodd(net, rodd, cfg, seed, receivers, session=session)
                else:
                    run = run_aloha if scheme is Scheme.ALOHA_MC else run_csma
                    # Budgets along the frame-length axis share one simulation.
                    if cfg.axis is SweepAxis.FRAME_LENGTH:
                        if scheme not in access_cache:
                            longest = max(point_params(cfg, v)[2].frame_count for v in cfg.grid)
                            access_cache[scheme] = run(net, access, longest, seed, receivers, session=session)
                        outcome = access_cache[scheme]
                    else:
                        outcome = run(net, access, None, seed, receivers, session=session)
                    counts[scheme, value] = (outcome.misses(access.frame_count), outcome.pairs)
                elapsed[scheme, value] = (time.perf_counter() - start) * 1000.0

        report(S.RunTrial, success=True, trial=trial, seed=seed)

    return TrialResult(trial, counts, elapsed, session.records)


def _bound_rows(cfg: SweepConfig, session) -> list:
    rows = []
    for value in cfg.grid:
        _, _, access = point_params(cfg, value)
        if cfg.axis is not SweepAxis.THRESHOLD:
            access = replace(access, threshold=cfg.bound_threshold)
        for scheme in cfg.schemes:
            if scheme not in BOUNDS:
                continue
            start = time.perf_counter()
            if scheme is Scheme.ALOHA_BOUND:
                bound = aloha_error_lower_bound(access, session=session)
            else:
                bound = csma_error_lower_bound(access)
            wall = (time.perf_counter() - start) * 1000.0 if cfg.timing else 0.0
            rows.append(ResultRow(scheme.value, cfg.axis.value, value, bound, 0.0, 1, wall))
    return rows


def _aggregate(cfg: SweepConfig, results: list) -> list:
    rows = []
    for value in cfg.grid:
        for scheme in cfg.schemes:
            if scheme in BOUNDS:
                continue
            counts = np.array([r.counts[scheme, value] for r in results], dtype=float)
            misses, pairs = counts[:, 0], counts[:, 1]
            total = pairs.sum()
            miss = misses.sum() / total if total > 0 else 0.0
            if len(results) > 1:
                rates = misses[pairs > 0] / pairs[pairs > 0]
                stderr = float(rates.std(ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else 0.0
            else:
                stderr = math.sqrt(miss * (1.0 - miss) / total) if total > 0 else 0.0
            wall = sum(r.elapsed[scheme, value] for r in results) if cfg.timing else 0.0
            rows.append(ResultRow(scheme.value, cfg.axis.value, value, float(miss), stderr, len(results), wall))
    return rows


def run_sweep(cfg: SweepConfig, session=None, progress: bool = False) -> list:
    """
    All rows of an experiment, sorted by scheme and axis value.  Trials run in
    parallel when `workers` is above one and their journals are merged back
    in trial order.
    """
    session = ensure_session(session)
    rows = _bound_rows(cfg, session)

    if any(s not in BOUNDS for s in cfg.schemes):
        results = parallel_map(functools.partial(run_trial, cfg), range(cfg.trials),
                               workers=cfg.workers, progress=progress, desc=cfg.experiment)
        for result in results:
            session.extend(result.records)
        rows.extend(_aggregate(cfg, results))

    with session.setup_log() as report:
        report(S.AggregateRows, success=True, rows=len(rows), trials=cfg.trials)
    return sorted(rows, key=lambda r: (r.scheme, r.value))


def _format(value) -> str:
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)


def emit_csv(rows: list, path: str, session=None):
    """Write rows under the fixed header, UTF-8 with LF line endings."""
    session = ensure_session(session)
    with session.setup_log() as report:
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(HEADER)
                for row in sorted(rows, key=lambda r: (r.scheme, r.value)):
                    writer.writerow([_format(v) for v in row])
        except OSError as exc:
            report(S.WriteResults, failure=True, path=str(path), exception=str(exc))
            raise OutputError("cannot write results", path=str(path)) from exc
        report(S.WriteResults, success=True, path=str(path), rows=len(rows))
