## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad, IntegrationWarning
from scipy.special import gamma as gamma_fn

from . import config
from .types import ParameterError, QuadratureError, NumericalConsistencyError, Scheme
from .steps import Steps as S
from .session import ensure_session
from .utils import Stream, derive_rng
from .geometry import NetworkParams, NetworkRealization, mean_neighbor_count, sample_marked_field, \
    sample_neighbor_coefficients


__all__ = [
    "RaParams",
    "InterferenceLaw",
    "AccessOutcome",
    "aloha_inverse_moment",
    "aloha_success_probability",
    "aloha_error_lower_bound",
    "csma_success_probability",
    "csma_error_lower_bound",
    "csma_capture_probability",
    "required_budget",
    "aloha_transmitters",
    "csma_transmitters",
    "run_aloha",
    "run_csma",
    "simulate_aloha",
    "simulate_csma",
    "sample_inverse_interference_moment",
    "sample_capture_probability",
    "sample_csma_success",
]


@dataclass(frozen=True)
class RaParams:
    """
    Random-access setup: packets of L = message bits + sender bits, an SINR
    threshold δ, ALOHA transmit probability p and a budget in symbols.  A
    packet needs L/log₂(1+δ) symbols, so the budget buys n of them.
    """

    network: NetworkParams
    message_bits: int = config.MESSAGE_BITS
    sender_bits: Optional[int] = None
    threshold: float = config.SIMULATED_THRESHOLD
    transmit_probability: Optional[float] = None
    budget: int = 0

    def __post_init__(self):
        if not self.threshold > 0.0:
            raise ParameterError("SINR threshold must be positive", threshold=self.threshold)
        if self.transmit_probability is not None and not 0.0 <= self.transmit_probability <= 1.0:
            raise ParameterError("transmit probability must lie in [0, 1]", p=self.transmit_probability)
        if self.budget < 0:
            raise ParameterError("symbol budget must be non-negative", budget=self.budget)
        if self.sender_bits is not None and self.sender_bits < 0:
            raise ParameterError("sender bits must be non-negative", sender_bits=self.sender_bits)

    @property
    def mean_neighbors(self) -> float:
        return mean_neighbor_count(self.network)

    @property
    def packet_bits(self) -> int:
        if self.sender_bits is not None:
            return self.message_bits + self.sender_bits
        return self.message_bits + int(math.ceil(math.log2(max(self.mean_neighbors, 2.0))))

    @property
    def probability(self) -> float:
        if self.transmit_probability is not None:
            return self.transmit_probability
        return 1.0 / (self.mean_neighbors + 1.0)

    @property
    def exponent(self) -> float:
        return self.network.exponent

    @property
    def min_frame_symbols(self) -> float:
        return self.packet_bits / math.log2(1.0 + self.threshold)

    @property
    def frames(self) -> float:
        """Real-valued frame count n = M log₂(1+δ)/L used by the bounds."""
        return self.budget / self.min_frame_symbols

    @property
    def frame_count(self) -> int:
        return int(math.floor(self.frames + 1e-9))

    def with_budget(self, budget: int):
        return RaParams(self.network, self.message_bits, self.sender_bits, self.threshold,
                        self.transmit_probability, int(budget))


class InterferenceLaw:
    """
    Shot noise of a Poisson field of transmitters with unit-mean exponential
    fading: its Laplace transform is exp(-C s^b) with C = λp b π²/sin(bπ).
    """

    def __init__(self, intensity: float, path_loss: float):
        if not path_loss > 2.0:
            raise ParameterError("path-loss exponent must exceed 2", path_loss=path_loss)
        self.intensity = intensity
        self.path_loss = path_loss
        self.exponent = 2.0 / path_loss
        b = self.exponent
        self.constant = intensity * b * math.pi ** 2 / math.sin(b * math.pi)

    def laplace(self, s):
        return np.exp(-self.constant * np.asarray(s, dtype=float) ** self.exponent)

    def fourier(self, omega):
        """E[exp(-iωI)] with the principal branch of (iω)^b."""
        omega = np.asarray(omega, dtype=float)
        power = np.abs(omega) ** self.exponent * np.exp(1j * np.sign(omega) * self.exponent * math.pi / 2.0)
        return np.exp(-self.constant * power)


def _integrate_half(law: InterferenceLaw, snr: float, sign: float) -> complex:
    # With t = ω^b, the |ω|^(b-1) singularity disappears and the envelope is
    # exp(-C cos(bπ/2) t).
    b = law.exponent
    rotation = np.exp(1j * sign * b * math.pi / 2.0)
    decay = law.constant * math.cos(b * math.pi / 2.0)
    t_max = -math.log(config.ENVELOPE_CUTOFF) / decay
    phase = law.constant * math.sin(b * math.pi / 2.0) * t_max + t_max ** (1.0 / b) / snr
    segments = max(64, 4 * int(math.ceil(phase / (2.0 * math.pi))))

    def integrand(t):
        return np.exp(-law.constant * t * rotation - sign * 1j * t ** (1.0 / b) / snr)

    edges = np.linspace(0.0, t_max, segments + 1)
    real, imag = 0.0, 0.0
    for a, z in zip(edges[:-1], edges[1:]):
        real += quad(lambda t: integrand(t).real, a, z, limit=200)[0]
        imag += quad(lambda t: integrand(t).imag, a, z, limit=200)[0]
    return complex(real, imag) / b


def aloha_inverse_moment(ra: RaParams, session=None) -> float:
    """
    E[(I + 1/γ)^(-b)] for the interference I of an ALOHA field of intensity
    λp, computed from its characteristic function by a convolution integral
    over the real line.
    """
    session = ensure_session(session)
    params = ra.network
    law = InterferenceLaw(params.intensity * ra.probability, params.path_loss)
    b = law.exponent
    if law.constant == 0.0:
        return params.snr ** b

    with session.setup_log() as report:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", IntegrationWarning)
            integral = _integrate_half(law, params.snr, +1.0) + _integrate_half(law, params.snr, -1.0)

        trouble = [w for w in caught if issubclass(w.category, IntegrationWarning)]
        if trouble:
            report(S.IntegrateCharacteristic, failure=True, warning=str(trouble[0].message))
            raise QuadratureError("quadrature did not converge", warning=str(trouble[0].message))
        report(S.IntegrateCharacteristic, success=True, value=integral.real)

        if abs(integral.imag) > config.IMAGINARY_TOLERANCE * abs(integral.real):
            report(S.CheckImaginaryResidue, failure=True, real=integral.real, imag=integral.imag)
            raise NumericalConsistencyError("integral has an imaginary residue", real=integral.real, imag=integral.imag)
        report(S.CheckImaginaryResidue, success=True, imag=integral.imag)

    return math.sin(b * math.pi / 2.0) * gamma_fn(1.0 - b) * integral.real / math.pi


def aloha_success_probability(ra: RaParams, session=None) -> float:
    p = ra.probability
    b = ra.exponent
    return p * (1.0 - p) * (ra.network.threshold / ra.threshold) ** b * aloha_inverse_moment(ra, session=session)


def aloha_error_lower_bound(ra: RaParams, session=None) -> float:
    """Probability that a neighbor is still unheard after the ALOHA budget."""
    if ra.frames == 0.0:
        return 1.0
    success = aloha_success_probability(ra, session=session)
    return max(0.0, 1.0 - success) ** ra.frames


def csma_success_probability(ra: RaParams) -> float:
    c = ra.mean_neighbors
    if not c > 0.0:
        raise ParameterError("mean neighbor count must be positive", c=c)
    params = ra.network
    gain = (params.threshold * params.snr / ra.threshold) ** ra.exponent
    return gain * (math.exp(-c) + c - 1.0) / c ** 2


def csma_error_lower_bound(ra: RaParams) -> float:
    if ra.frames == 0.0:
        return 1.0
    return max(0.0, 1.0 - csma_success_probability(ra)) ** ra.frames


def csma_capture_probability(c: float) -> float:
    """Chance that a typical node holds the smallest timer of its neighborhood."""
    if c < 0.0:
        raise ParameterError("mean neighbor count must be non-negative", c=c)
    if c == 0.0:
        return 1.0
    return -math.expm1(-c) / c


def required_budget(ra: RaParams, scheme, target: float = 0.01, session=None) -> float:
    """
    Smallest symbol budget at which the lower bound of `scheme` drops to
    `target`, or infinity when a frame never succeeds.
    """
    scheme = Scheme(scheme)
    if scheme is Scheme.ALOHA_BOUND:
        success = aloha_success_probability(ra, session=session)
    elif scheme is Scheme.CSMA_BOUND:
        success = csma_success_probability(ra)
    else:
        raise ParameterError("budget is only defined for the analytic bounds", scheme=scheme.value)

    if success <= 0.0:
        return math.inf
    if success >= 1.0:
        return 1
    frames = math.log(target) / math.log(1.0 - success)
    return int(math.ceil(frames * ra.min_frame_symbols - 1e-9))


def aloha_transmitters(size: int, p: float, rng: np.random.Generator) -> np.ndarray:
    return rng.random(size) < p


def csma_transmitters(adjacency: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Uniform timers; a node captures the channel when its timer beats those of
    all its neighbors, so isolated nodes always transmit.
    """
    timers = rng.random(adjacency.shape[0])
    rivals = np.where(adjacency, timers[None, :], np.inf).min(axis=1, initial=np.inf)
    return timers < rivals


@dataclass(frozen=True)
class AccessOutcome:
    """
    First frame in which each directed neighbor pair (receiver, sender)
    succeeded, infinity when it never did within `frames`.
    """

    receivers: np.ndarray
    senders: np.ndarray
    first_success: np.ndarray
    frames: int

    @property
    def pairs(self) -> int:
        return len(self.receivers)

    def misses(self, frames: int) -> int:
        return int(np.count_nonzero(self.first_success >= frames))

    def miss_probability(self, frames: int) -> float:
        if self.pairs == 0:
            return 0.0
        return self.misses(frames) / self.pairs


def _run_access(net: NetworkRealization, ra: RaParams, frames: Optional[int], seed: int,
                receivers: Optional[np.ndarray], scheme: Scheme, session) -> AccessOutcome:
    session = ensure_session(session)
    frames = ra.frame_count if frames is None else int(frames)
    rx, tx = net.directed_pairs(receivers)
    first = np.full(len(rx), np.inf)

    rng = derive_rng(seed, Stream.ACCESS, 0 if scheme is Scheme.ALOHA_MC else 1)
    power = net.params.snr * net.channel_gains
    wanted = power[rx, tx]

    for frame in range(frames):
        if scheme is Scheme.ALOHA_MC:
            active = aloha_transmitters(net.size, ra.probability, rng)
        else:
            active = csma_transmitters(net.adjacency, rng)
        total = power @ active
        # SINR ≥ δ against every concurrent transmitter and unit noise.
        ok = active[tx] & ~active[rx] & (wanted >= ra.threshold * (total[rx] - wanted + 1.0))
        first = np.where(ok & np.isinf(first), frame, first)

    with session.setup_log() as report:
        report(S.SimulateAccess, success=True, scheme=scheme.value, frames=frames, pairs=len(rx))
    return AccessOutcome(rx, tx, first, frames)


def run_aloha(net: NetworkRealization, ra: RaParams, frames: Optional[int] = None, seed: int = 0,
              receivers: Optional[np.ndarray] = None, session=None) -> AccessOutcome:
    return _run_access(net, ra, frames, seed, receivers, Scheme.ALOHA_MC, session)


def run_csma(net: NetworkRealization, ra: RaParams, frames: Optional[int] = None, seed: int = 0,
             receivers: Optional[np.ndarray] = None, session=None) -> AccessOutcome:
    return _run_access(net, ra, frames, seed, receivers, Scheme.CSMA_MC, session)


def simulate_aloha(net: NetworkRealization, ra: RaParams, frames: Optional[int] = None, seed: int = 0,
                   receivers: Optional[np.ndarray] = None, session=None) -> float:
    """Fraction of directed neighbor pairs never served within the budget."""
    outcome = run_aloha(net, ra, frames, seed, receivers, session=session)
    return outcome.miss_probability(outcome.frames)


def simulate_csma(net: NetworkRealization, ra: RaParams, frames: Optional[int] = None, seed: int = 0,
                  receivers: Optional[np.ndarray] = None, session=None) -> float:
    outcome = run_csma(net, ra, frames, seed, receivers, session=session)
    return outcome.miss_probability(outcome.frames)


def _mean_and_error(samples: np.ndarray) -> tuple:
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(len(samples)))


def sample_inverse_interference_moment(ra: RaParams, fields: int, rng: np.random.Generator,
                                       radius: float = 200.0) -> tuple:
    """
    Monte Carlo estimate and standard error of E[(I + 1/γ)^(-b)], sampling
    the ALOHA field in a disc and adding the mean interference from beyond.
    """
    params = ra.network
    intensity = params.intensity * ra.probability
    owner, distance, gain = sample_marked_field(intensity, radius, rng, fields=fields)
    shot = np.bincount(owner, weights=gain * distance ** -params.path_loss, minlength=fields)
    shot += 2.0 * math.pi * intensity * radius ** (2.0 - params.path_loss) / (params.path_loss - 2.0)
    return _mean_and_error((shot + 1.0 / params.snr) ** -params.exponent)


def sample_capture_probability(c: float, trials: int, rng: np.random.Generator) -> tuple:
    """Timer contention of a typical node against Poisson(c) neighbors."""
    count = rng.poisson(c, size=trials)
    own = rng.random(trials)
    with np.errstate(divide="ignore"):
        # Minimum of k uniforms by inversion, infinite when there are none.
        rival = np.where(count > 0, 1.0 - rng.random(trials) ** (1.0 / np.maximum(count, 1)), np.inf)
    return _mean_and_error((own < rival).astype(float))


def sample_csma_success(ra: RaParams, trials: int, rng: np.random.Generator) -> tuple:
    """
    Per-frame success of a typical neighbor pair under timer contention:
    the receiver's timer expires later, the sender beats its other Poisson
    neighbors, and the noise-only SNR clears δ.
    """
    params = ra.network
    c = ra.mean_neighbors
    sender, receiver = rng.random(trials), rng.random(trials)
    count = rng.poisson(c, size=trials)
    rival = np.where(count > 0, 1.0 - rng.random(trials) ** (1.0 / np.maximum(count, 1)), np.inf)
    amplitude = np.abs(sample_neighbor_coefficients(params.threshold, params.path_loss, trials, rng))
    heard = params.snr * amplitude ** 2 >= ra.threshold
    success = (receiver > sender) & (sender < rival) & heard
    return _mean_and_error(success.astype(float))
