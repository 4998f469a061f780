## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gamma as gamma_fn

from . import config
from .types import ParameterError, OutputError
from .steps import Steps as S
from .session import ensure_session
from .utils import Stream, derive_rng


__all__ = [
    "NetworkParams",
    "NetworkRealization",
    "generate_network",
    "mean_neighbor_count",
    "neighbor_gain_ccdf",
    "neighbor_gain_pdf",
    "nonneighbor_interference_variance",
    "sample_marked_field",
    "sample_neighbor_coefficients",
    "write_realization",
]


@dataclass(frozen=True)
class NetworkParams:
    """
    Parameters of a marked Poisson network: intensity λ in nodes per square
    meter, the side of the square region in meters, an optional fixed node
    count (uniform placement conditioned on the population), path-loss
    exponent α, neighbor gain threshold θ and nominal SNR γ as a linear ratio.
    """

    intensity: float
    side: float = config.REGION_SIDE
    node_count: Optional[int] = None
    path_loss: float = config.PATH_LOSS
    threshold: float = config.GAIN_THRESHOLD
    snr: float = 10.0 ** (config.SNR_DB / 10.0)

    def __post_init__(self):
        # Interference integrals diverge for α ≤ 2.
        if not self.path_loss > 2.0:
            raise ParameterError("path-loss exponent must exceed 2", path_loss=self.path_loss)
        if not self.threshold > 0.0:
            raise ParameterError("neighbor threshold must be positive", threshold=self.threshold)
        if not self.snr > 0.0:
            raise ParameterError("nominal SNR must be positive", snr=self.snr)
        if not self.intensity >= 0.0 or not self.side > 0.0:
            raise ParameterError("intensity and region must be non-negative", intensity=self.intensity, side=self.side)
        if self.node_count is not None and self.node_count < 0:
            raise ParameterError("node count must be non-negative", node_count=self.node_count)

    @property
    def area(self) -> float:
        return self.side ** 2

    @property
    def exponent(self) -> float:
        """The ratio b = 2/α that appears in every closed form."""
        return 2.0 / self.path_loss

    @classmethod
    def published(cls, **overrides):
        """
        The setup of the published comparison: 1000 nodes in a 500 m square,
        so that λ = 0.004.
        """
        values = dict(
            intensity=config.NODE_COUNT / config.REGION_SIDE ** 2,
            side=config.REGION_SIDE,
            node_count=config.NODE_COUNT,
        )
        values.update(overrides)
        return cls(**values)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class NetworkRealization:
    """
    One frame of the network: positions, symmetric fading power gains and
    distances, complex channel coefficients with |U_ij|² = G_ij R_ij^-α, and
    the symmetric neighbor adjacency.  Arrays are read-only.
    """

    params: NetworkParams
    positions: np.ndarray
    distances: np.ndarray
    gains: np.ndarray
    coefficients: np.ndarray
    adjacency: np.ndarray
    seed: int = 0

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def channel_gains(self) -> np.ndarray:
        return np.abs(self.coefficients) ** 2

    def neighbors(self, node: int) -> np.ndarray:
        """Sorted ids of the neighbors of `node`."""
        return np.flatnonzero(self.adjacency[node])

    def neighbor_sets(self) -> list:
        return [frozenset(self.neighbors(i).tolist()) for i in range(self.size)]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def interior(self, margin: Optional[float] = None) -> np.ndarray:
        """
        Mask of the nodes inside the centered sub-square that keeps `margin`
        meters from every edge; all nodes when no margin is given.
        """
        if margin is None or margin <= 0.0:
            return np.ones(self.size, dtype=bool)
        low, high = margin, self.params.side - margin
        inside = (self.positions >= low) & (self.positions <= high)
        return inside.all(axis=1)

    def directed_pairs(self, receivers: Optional[np.ndarray] = None) -> tuple:
        """
        Arrays (receiver, sender) of every directed neighbor pair whose
        receiver is selected by the boolean mask.
        """
        adjacency = self.adjacency
        if receivers is not None:
            adjacency = adjacency & receivers[:, None]
        rx, tx = np.nonzero(adjacency)
        return rx, tx


def generate_network(params: NetworkParams, seed: int, session=None) -> NetworkRealization:
    """
    Draw one network realization: node count Poisson(λ·area) or fixed, uniform
    positions, i.i.d. unit-mean exponential power gains and uniform phases
    shared by both directions of a link.
    """
    session = ensure_session(session)
    rng = derive_rng(seed, Stream.NETWORK)

    with session.setup_log() as report:
        report(S.ValidateNetworkParams, success=True, path_loss=params.path_loss, threshold=params.threshold)
        if params.node_count is not None:
            count = int(params.node_count)
        else:
            count = int(rng.poisson(params.intensity * params.area))
        positions = rng.uniform(0.0, params.side, size=(count, 2))
        report(S.PlaceNodes, success=True, nodes=count, fixed=params.node_count is not None)

        delta = positions[:, None, :] - positions[None, :, :]
        distances = np.hypot(delta[..., 0], delta[..., 1])
        np.fill_diagonal(distances, np.inf)

        upper = np.triu_indices(count, k=1)
        gains = np.zeros((count, count))
        phases = np.zeros((count, count))
        gains[upper] = rng.exponential(1.0, size=len(upper[0]))
        phases[upper] = rng.uniform(0.0, 2.0 * np.pi, size=len(upper[0]))
        gains = gains + gains.T
        phases = phases + phases.T
        report(S.DrawFading, success=True, pairs=len(upper[0]))

        with np.errstate(divide="ignore"):
            power = gains * distances ** -params.path_loss
        np.fill_diagonal(power, 0.0)
        coefficients = np.sqrt(power) * np.exp(1j * phases)

        adjacency = power >= params.threshold
        np.fill_diagonal(adjacency, False)
        report(S.FindNeighbors, success=True, mean_degree=float(adjacency.sum(axis=1).mean()) if count else 0.0)

    return NetworkRealization(
        params=params,
        positions=_frozen(positions),
        distances=_frozen(distances),
        gains=_frozen(gains),
        coefficients=_frozen(coefficients),
        adjacency=_frozen(adjacency),
        seed=seed,
    )


def mean_neighbor_count(params: NetworkParams) -> float:
    """
    Average number of neighbors of a typical node in the infinite plane,
    c = (2/α) π λ θ^(-2/α) Γ(2/α).
    """
    b = params.exponent
    return b * math.pi * params.intensity * params.threshold ** -b * gamma_fn(b)


def neighbor_gain_ccdf(u, params: NetworkParams):
    """
    Complementary CDF of the coefficient amplitude |U| of a neighbor, equal to
    θ^(2/α)/u^(4/α) above √θ and to 1 below it.
    """
    u = np.asarray(u, dtype=float)
    b = params.exponent
    with np.errstate(divide="ignore"):
        tail = params.threshold ** b / u ** (2.0 * b)
    result = np.where(u < math.sqrt(params.threshold), 1.0, tail)
    return float(result) if result.ndim == 0 else result


def neighbor_gain_pdf(u, params: NetworkParams):
    u = np.asarray(u, dtype=float)
    b = params.exponent
    with np.errstate(divide="ignore"):
        density = 2.0 * b * params.threshold ** b * u ** -(2.0 * b + 1.0)
    result = np.where(u < math.sqrt(params.threshold), 0.0, density)
    return float(result) if result.ndim == 0 else result


def nonneighbor_interference_variance(params: NetworkParams, q: float) -> float:
    """
    Variance σ² of the noise seen by a receiver when transmitting
    non-neighbors, each active with probability q, are folded into the
    thermal noise of unit variance.
    """
    if not 0.0 <= q <= 1.0:
        raise ParameterError("on-probability must lie in [0, 1]", q=q)
    a, b = params.path_loss, params.exponent
    interference = (4.0 / (a * (a - 2.0))) * math.pi * params.intensity * q * params.snr \
        * params.threshold ** (1.0 - b) * gamma_fn(b)
    return interference + 1.0


def sample_marked_field(intensity: float, radius: float, rng: np.random.Generator, fields: int = 1) -> tuple:
    """
    Marked Poisson fields around a typical receiver at the origin.  Returns the
    flat arrays (field, distance, gain) of all points of `fields` independent
    fields in a disc of the given radius.
    """
    counts = rng.poisson(intensity * math.pi * radius ** 2, size=fields)
    total = int(counts.sum())
    owner = np.repeat(np.arange(fields), counts)
    distance = radius * np.sqrt(rng.random(total))
    gain = rng.exponential(1.0, size=total)
    return owner, distance, gain


def sample_neighbor_coefficients(threshold: float, path_loss: float, size: int,
                                 rng: np.random.Generator, tail_epsilon: float = 0.0) -> np.ndarray:
    """
    I.i.d. complex coefficients of neighbors: amplitude by inversion of the
    neighbor CCDF, optionally truncated at the (1-ε) quantile, and uniform
    phase.
    """
    uniform = rng.uniform(tail_epsilon, 1.0, size=size)
    # Inversion of P(|U| > u) = (√θ/u)^(4/α); uniform in (ε, 1] keeps the
    # amplitude below the (1-ε) quantile.
    uniform = np.where(uniform <= 0.0, np.finfo(float).tiny, uniform)
    amplitude = math.sqrt(threshold) * uniform ** (-path_loss / 4.0)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=size)
    return amplitude * np.exp(1j * phase)


def write_realization(net: NetworkRealization, path: str, session=None):
    """
    Columnar text dump of a realization for debugging: a `node x y` block,
    then an `i j gain distance` block for every pair with i < j.
    """
    session = ensure_session(session)
    upper = np.triu_indices(net.size, k=1)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"# nodes {net.size} seed {net.seed}\n")
            f.write("node x y\n")
            for i, (x, y) in enumerate(net.positions):
                f.write(f"{i} {x!r} {y!r}\n")
            f.write("i j gain distance\n")
            for i, j in zip(*upper):
                f.write(f"{i} {j} {net.gains[i, j]!r} {net.distances[i, j]!r}\n")
    except OSError as exc:
        with session.setup_log() as report:
            report(S.WriteRealization, fail=True, path=path, exception=str(exc))
        raise OutputError("cannot write realization", path=path) from exc

    with session.setup_log() as report:
        report(S.WriteRealization, success=True, path=path, pairs=len(upper[0]))
