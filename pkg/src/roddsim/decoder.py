## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import csv
import math
import collections
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import config
from .types import Status, SnrWiring, DegenerateInstanceError, OutputError
from .steps import Steps as S
from .session import ensure_session
from .phy import ObservationInstance, RoddParams
from .denoiser import GridSpec, PriorModel, conditional_mean_var, build_interp_tables


__all__ = [
    "DecoderOptions",
    "DecoderState",
    "DecodeResult",
    "TraceRow",
    "MessagePassingDecoder",
    "decide_messages",
    "decode",
    "write_trace",
]


TraceRow = collections.namedtuple("TraceRow", ["t", "tau_real", "tau_imag", "residual_mse"])


@dataclass(frozen=True)
class DecoderOptions:
    """
    Knobs of the message-passing decoder.  The default path evaluates the
    denoiser through interpolation tables at the expected symbol degree;
    `exact_denoiser` integrates the posterior for every edge instead.
    """

    iterations: int = config.ITERATIONS
    tolerance: float = config.TOLERANCE
    tau_init: float = config.TAU_INIT
    tau_stability: float = config.TAU_STABILITY
    exact_denoiser: bool = False
    table_levels: int = config.TABLE_LEVELS
    snr_wiring: SnrWiring = SnrWiring.EFFECTIVE
    strict: bool = False
    grid: GridSpec = field(default_factory=GridSpec)


@dataclass
class DecoderState:
    """
    Edge messages of both real systems, row 0 for the real part and row 1
    for the imaginary part, with the shared residual variance τ of each.
    """

    z: np.ndarray
    m: np.ndarray
    v: np.ndarray
    tau: np.ndarray
    t: int = 0
    tables: list = field(default_factory=list)


@dataclass
class DecodeResult:
    messages: np.ndarray
    magnitudes: np.ndarray
    estimates: np.ndarray
    iterations: int
    converged: bool
    status: Status = Status.SUCCESS
    history: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.status is not Status.SUCCESS


def _segment_sum(index: np.ndarray, values: np.ndarray, size: int) -> np.ndarray:
    return np.stack([np.bincount(index, weights=row, minlength=size) for row in values])


def _snap(tau: float, levels: int) -> float:
    if levels <= 0:
        return float(tau)
    return 2.0 ** (round(math.log2(tau) * levels) / levels)


class MessagePassingDecoder:
    """
    Gaussian-approximated belief propagation on the bipartite graph of the
    nonzero entries of S, run separately on the real and imaginary parts of
    Y = gain·S·X + W.  Edges are kept in (measurement, symbol) order.
    """

    def __init__(self, instance: ObservationInstance, prior: PriorModel,
                 options: DecoderOptions = None, rodd: RoddParams = None, session=None):
        self.instance = instance
        self.prior = prior
        self.options = options or DecoderOptions()
        self.rodd = rodd or instance.rodd
        self.session = ensure_session(session)

        wiring = SnrWiring(self.options.snr_wiring)
        y = instance.observation
        if wiring is SnrWiring.EFFECTIVE:
            snr = instance.effective_snr
        else:
            snr = self.rodd.effective_snr(instance.snr, 0.0)
            if instance.noise_variance > 0.0:
                y = y * math.sqrt(instance.noise_variance)
        self.gain = math.sqrt(snr)
        self.noise_term = self.rodd.slot_variance / (2.0 * snr) if snr > 0.0 else 0.0
        self.y = np.stack([y.real, y.imag])

        sensing = instance.sensing
        self.rows, self.cols = np.nonzero(sensing)
        self.s = sensing[self.rows, self.cols]
        self.row_degree = np.bincount(self.rows, minlength=instance.measurement_count)
        self.col_degree = np.bincount(self.cols, minlength=instance.unknowns)
        self.edge_degree = self.col_degree[self.cols]
        # Table path: |∂k| replaced by its expectation, at least one.
        self.table_degree = max(self.rodd.slot_variance - 1.0, 1.0)
        self.state = None

        with self.session.setup_log() as report:
            report(S.PrepareFactorGraph, success=True, edges=len(self.s),
                   measurements=instance.measurement_count, unknowns=instance.unknowns, wiring=wiring.value)

    @property
    def edge_count(self) -> int:
        return len(self.s)

    def start(self) -> DecoderState:
        z = self.y[:, self.rows] / (self.gain * self.s)
        shape = (2, self.edge_count)
        self.state = DecoderState(
            z=z,
            m=np.zeros(shape),
            v=np.zeros(shape),
            tau=np.full(2, float(self.options.tau_init)),
        )
        self._previous = self.state
        return self.state

    def _denoise_edges(self, inputs: np.ndarray, tau: float, part: int) -> tuple:
        mean = np.full(self.edge_count, self.prior.mean)
        var = np.full(self.edge_count, self.prior.variance)
        # Symbols seen once carry no extrinsic information.
        active = self.edge_degree > 1
        if not np.any(active):
            return mean, var

        if self.options.exact_denoiser:
            noise = tau / (self.edge_degree[active] - 1.0)
            mean[active], var[active] = conditional_mean_var(inputs[active], noise, self.prior)
        else:
            tables = self.state.tables[part]
            mean[active], var[active] = tables(inputs[active])
        return mean, var

    def step(self) -> DecoderState:
        """One iteration: symbol-to-measurement means, then residuals and τ."""
        state = self.state
        N, M = self.instance.unknowns, self.instance.measurement_count

        if not self.options.exact_denoiser:
            state.tables = [
                build_interp_tables(self.prior, _snap(state.tau[i], self.options.table_levels), self.table_degree,
                                    self.options.grid, session=self.session)
                for i in range(2)
            ]

        colsum = _segment_sum(self.cols, state.z, N)
        extrinsic = np.maximum(self.edge_degree - 1, 1)
        inputs = (colsum[:, self.cols] - state.z) / extrinsic

        m = np.empty_like(state.m)
        v = np.empty_like(state.v)
        for i in range(2):
            m[i], v[i] = self._denoise_edges(inputs[i], state.tau[i], i)

        rowsum = _segment_sum(self.rows, self.s * m, M)
        z = (self.y[:, self.rows] - self.gain * (rowsum[:, self.rows] - self.s * m)) / (self.gain * self.s)

        rowvar = _segment_sum(self.rows, v, M)
        weight = max(int(self.row_degree.sum()), 1)
        tau = (rowvar @ self.row_degree) / weight + self.noise_term
        if np.any(~np.isfinite(tau) | (tau <= 0.0)):
            with self.session.setup_log() as report:
                report(S.ClampVariance, failure=True, tau=tau.tolist(), t=state.t + 1)
            tau = np.where(np.isfinite(tau) & (tau > 0.0), tau, np.finfo(float).eps)

        self.state = DecoderState(z=z, m=m, v=v, tau=tau, t=state.t + 1, tables=state.tables)
        self._previous = state
        return self.state

    def converged(self) -> bool:
        previous, state = self._previous, self.state
        change = np.max(np.abs(state.m - previous.m), initial=0.0)
        stable = np.abs(state.tau - previous.tau) <= self.options.tau_stability * previous.tau
        return bool(change < self.options.tolerance and np.all(stable))

    def residual_mse(self) -> float:
        rowsum = _segment_sum(self.rows, self.s * self.state.m, self.instance.measurement_count)
        return float(np.mean((self.y - self.gain * rowsum) ** 2))

    def finish(self) -> tuple:
        """
        Posterior means of every entry of X from all incoming residuals, and
        the magnitude of the combined complex estimate.
        """
        state = self.state
        N = self.instance.unknowns
        colsum = _segment_sum(self.cols, state.z, N)
        seen = self.col_degree > 0
        degree = np.where(seen, self.col_degree, 1)

        means = np.full((2, N), self.prior.mean)
        for i in range(2):
            if not np.any(seen):
                break
            inputs = colsum[i, seen] / degree[seen]
            if self.options.exact_denoiser:
                means[i, seen], _ = conditional_mean_var(inputs, state.tau[i] / degree[seen], self.prior)
            else:
                tables = build_interp_tables(self.prior, _snap(state.tau[i], self.options.table_levels),
                                             max(self.rodd.slot_variance, 1.0),
                                             self.options.grid, session=self.session)
                means[i, seen], _ = tables(inputs)

        estimates = means[0] + 1j * means[1]
        return estimates, np.abs(estimates)


def decide_messages(magnitudes: np.ndarray) -> np.ndarray:
    """Index of the largest magnitude in each sub-block, lowest index on ties."""
    return np.argmax(magnitudes, axis=1)


def decode(instance: ObservationInstance, prior: PriorModel, rodd: RoddParams = None,
           iterations: Optional[int] = None, options: DecoderOptions = None, session=None) -> DecodeResult:
    """
    Recover the message index of every neighbor in `instance`.  Iterations
    stop early once the edge means and both τ have settled.  Instances
    without off-slots produce an aborted result, or raise when `strict`.
    """
    session = ensure_session(session)
    options = options or DecoderOptions()
    rodd = rodd or instance.rodd
    iterations = options.iterations if iterations is None else iterations
    K, size = instance.neighbor_count, rodd.codebook_size

    if instance.degenerate:
        with session.setup_log() as report:
            report(S.PrepareFactorGraph, failure=True, receiver=instance.receiver, reason="no off-slots")
        if options.strict:
            raise DegenerateInstanceError("no off-slots to observe", receiver=instance.receiver)
        return DecodeResult(
            messages=np.full(K, -1),
            magnitudes=np.zeros((K, size)),
            estimates=np.zeros(K * size, dtype=complex),
            iterations=0,
            converged=False,
            status=Status.ABORT,
        )

    if K == 0:
        return DecodeResult(np.zeros(0, dtype=int), np.zeros((0, size)), np.zeros(0, dtype=complex), 0, True)

    decoder = MessagePassingDecoder(instance, prior, options, rodd=rodd, session=session)
    decoder.start()
    history, converged = [], False

    with session.setup_log() as report:
        for _ in range(max(iterations - 1, 0)):
            state = decoder.step()
            history.append(TraceRow(state.t, float(state.tau[0]), float(state.tau[1]), decoder.residual_mse()))
            if decoder.converged():
                converged = True
                report(S.RunIterations, succeed=True, iterations=state.t, converged=True)
        report(S.RunIterations, success=True, iterations=decoder.state.t, converged=False)

    estimates, magnitudes = decoder.finish()
    blocks = magnitudes.reshape(K, size)
    messages = decide_messages(blocks)

    with session.setup_log() as report:
        report(S.DecideMessages, success=True, receiver=instance.receiver, neighbors=K)

    return DecodeResult(
        messages=messages,
        magnitudes=blocks,
        estimates=estimates,
        iterations=decoder.state.t,
        converged=converged,
        history=history,
    )


def write_trace(history: list, path: str):
    """Per-iteration CSV trace for convergence debugging."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TraceRow._fields)
            for row in history:
                writer.writerow([row.t, repr(row.tau_real), repr(row.tau_imag), repr(row.residual_mse)])
    except OSError as exc:
        raise OutputError("cannot write decoder trace", path=str(path)) from exc
