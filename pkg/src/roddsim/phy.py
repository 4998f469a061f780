## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import math
import collections
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import config
from .types import CapacityError, ParameterError, OutputError, InterferenceMode
from .steps import Steps as S
from .session import ensure_session
from .utils import Stream, derive_rng
from .geometry import NetworkRealization, nonneighbor_interference_variance


__all__ = [
    "RoddParams",
    "Codebook",
    "CodebookStore",
    "ObservationInstance",
    "generate_codebook",
    "transmitted_signature",
    "draw_messages",
    "frame_waveforms",
    "simulate_frame",
    "system_load",
]


@dataclass(frozen=True)
class RoddParams:
    """
    Frame parameters of on-off division duplex: message bits l, frame length
    M_s in slots and on-probability q of every slot of a signature.
    """

    message_bits: int = config.MESSAGE_BITS
    frame_length: int = 280
    on_probability: float = 0.0824

    def __post_init__(self):
        if self.message_bits < 1:
            raise ParameterError("at least one message bit is required", message_bits=self.message_bits)
        if self.frame_length < 1:
            raise ParameterError("frame must have at least one slot", frame_length=self.frame_length)
        if not 0.0 <= self.on_probability <= 1.0:
            raise ParameterError("on-probability must lie in [0, 1]", q=self.on_probability)

    @property
    def codebook_size(self) -> int:
        return 2 ** self.message_bits

    @property
    def slot_variance(self) -> float:
        """Expected squared norm of a raw signature seen on off-slots, M_s q(1-q)."""
        q = self.on_probability
        return self.frame_length * q * (1.0 - q)

    @property
    def column_scale(self) -> float:
        # Degenerate q ∈ {0, 1} leaves signatures unscaled.
        return math.sqrt(self.slot_variance) if self.slot_variance > 0.0 else 1.0

    def effective_snr(self, snr: float, noise_variance: float) -> float:
        """γ_s = γ M_s q(1-q) / σ², with σ² = 0 meaning the noiseless case."""
        if noise_variance <= 0.0:
            return snr * self.slot_variance
        return snr * self.slot_variance / noise_variance


@dataclass(frozen=True)
class Codebook:
    owner: int
    signatures: np.ndarray
    seed: int

    @property
    def size(self) -> int:
        return self.signatures.shape[0]

    def __getitem__(self, index):
        return self.signatures[index]


def _codebook_rng(owner: int, seed: int) -> np.random.Generator:
    return derive_rng(int(seed) ^ int(owner), Stream.CODEBOOK)


def _ternary(uniform: np.ndarray, q: float) -> np.ndarray:
    values = np.zeros(uniform.shape, dtype=np.int8)
    values[uniform < q / 2.0] = 1
    values[(uniform >= q / 2.0) & (uniform < q)] = -1
    return values


def generate_codebook(node_id: int, rodd: RoddParams, seed: int, session=None) -> Codebook:
    """
    The 2^l ternary signatures of one node, each entry +1 or -1 with
    probability q/2 and 0 otherwise.  Any node can rebuild the codebook of
    another from its id and the run seed.
    """
    session = ensure_session(session)
    entries = rodd.codebook_size * rodd.frame_length

    with session.setup_log() as report:
        if entries > config.CODEBOOK_BUDGET:
            report(S.CheckCodebookBudget, failure=True, entries=entries, budget=config.CODEBOOK_BUDGET)
            raise CapacityError("codebook exceeds the memory budget", entries=entries, budget=config.CODEBOOK_BUDGET)

        rng = _codebook_rng(node_id, seed)
        uniform = rng.random((rodd.codebook_size, rodd.frame_length))
        signatures = _ternary(uniform, rodd.on_probability)
        signatures.setflags(write=False)
        report(S.GenerateCodebook, success=True, owner=int(node_id), entries=entries)

    return Codebook(owner=int(node_id), signatures=signatures, seed=int(seed))


def transmitted_signature(owner: int, index: int, rodd: RoddParams, seed: int) -> np.ndarray:
    """
    Row `index` of the codebook of `owner`, without building the others.
    Each double consumes one output of the generator, so the stream is
    advanced directly to the start of the row.
    """
    if not 0 <= index < rodd.codebook_size:
        raise ParameterError("message index out of range", index=int(index), size=rodd.codebook_size)
    rng = _codebook_rng(owner, seed)
    rng.bit_generator.advance(int(index) * rodd.frame_length)
    return _ternary(rng.random(rodd.frame_length), rodd.on_probability)


class CodebookStore:
    """
    Least-recently-used cache of full codebooks for one trial, bounded by a
    total number of entries.
    """

    def __init__(self, rodd: RoddParams, seed: int, budget: int = config.STORE_BUDGET, session=None):
        self.rodd = rodd
        self.seed = seed
        self.budget = budget
        self.session = ensure_session(session)
        self._cache = collections.OrderedDict()

    @property
    def capacity(self) -> int:
        per_codebook = self.rodd.codebook_size * self.rodd.frame_length
        return max(1, self.budget // per_codebook)

    def __len__(self):
        return len(self._cache)

    def __contains__(self, owner):
        return owner in self._cache

    def get(self, owner: int) -> Codebook:
        if owner in self._cache:
            self._cache.move_to_end(owner)
            return self._cache[owner]

        codebook = generate_codebook(owner, self.rodd, self.seed, session=self.session)
        self._cache[owner] = codebook
        while len(self._cache) > self.capacity:
            self._cache.popitem(last=False)
        return codebook


def draw_messages(n: int, rodd: RoddParams, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, rodd.codebook_size, size=n)


def frame_waveforms(net: NetworkRealization, rodd: RoddParams, messages: np.ndarray,
                    seed: int, silent: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Transmitted on-off signature of every node for one frame, as an (n, M_s)
    array of int8.  Silent nodes send nothing and listen in every slot.
    """
    messages = np.asarray(messages)
    if messages.shape != (net.size,):
        raise ParameterError("one message per node is required", nodes=net.size, messages=messages.shape)

    waveforms = np.zeros((net.size, rodd.frame_length), dtype=np.int8)
    for node in range(net.size):
        if silent is not None and silent[node]:
            continue
        waveforms[node] = transmitted_signature(node, int(messages[node]), rodd, seed)
    return waveforms


@dataclass(frozen=True)
class ObservationInstance:
    """
    Linear observation of one receiver over its off-slots, Y = √γ_s S X + W,
    together with the ground truth.  Block j of X has length 2^l and holds
    the coefficient of neighbor j at its message index.
    """

    receiver: int
    neighbors: np.ndarray
    messages: np.ndarray
    coefficients: np.ndarray
    off_slots: np.ndarray
    sensing: np.ndarray
    observation: np.ndarray
    hidden: np.ndarray
    noise_variance: float
    snr: float
    rodd: RoddParams

    @property
    def neighbor_count(self) -> int:
        return len(self.neighbors)

    @property
    def measurement_count(self) -> int:
        return len(self.off_slots)

    @property
    def unknowns(self) -> int:
        return self.sensing.shape[1]

    @property
    def degenerate(self) -> bool:
        return self.measurement_count == 0

    @property
    def effective_snr(self) -> float:
        return self.rodd.effective_snr(self.snr, self.noise_variance)

    def save(self, path: str):
        try:
            np.savez(
                path,
                receiver=self.receiver,
                neighbors=self.neighbors,
                messages=self.messages,
                coefficients=self.coefficients,
                off_slots=self.off_slots,
                sensing=self.sensing,
                observation=self.observation,
                hidden=self.hidden,
                noise_variance=self.noise_variance,
                snr=self.snr,
                rodd=np.array([self.rodd.message_bits, self.rodd.frame_length, self.rodd.on_probability]),
            )
        except OSError as exc:
            raise OutputError("cannot save observation instance", path=str(path)) from exc

    @classmethod
    def load(cls, path: str):
        with np.load(path) as data:
            bits, length, q = data["rodd"]
            return cls(
                receiver=int(data["receiver"]),
                neighbors=data["neighbors"],
                messages=data["messages"],
                coefficients=data["coefficients"],
                off_slots=data["off_slots"],
                sensing=data["sensing"],
                observation=data["observation"],
                hidden=data["hidden"],
                noise_variance=float(data["noise_variance"]),
                snr=float(data["snr"]),
                rodd=RoddParams(int(bits), int(length), float(q)),
            )


def simulate_frame(net: NetworkRealization, rodd: RoddParams, messages: np.ndarray, receiver: int,
                   mode=InterferenceMode.GAUSSIAN, seed: int = 0,
                   noise_variance: Optional[float] = None,
                   silent: Optional[np.ndarray] = None,
                   waveforms: Optional[np.ndarray] = None,
                   store: Optional[CodebookStore] = None,
                   session=None) -> ObservationInstance:
    """
    Superpose one frame at `receiver` and keep only the slots where it is
    silent.  In Gaussian mode the non-neighbors are replaced by circular noise
    of variance σ², in explicit mode their actual signals are added on top of
    unit thermal noise.  The observation is normalized by σ in both modes;
    `noise_variance=0` gives a noiseless observation.
    """
    session = ensure_session(session)
    mode = InterferenceMode(mode)
    messages = np.asarray(messages)
    if np.any(messages < 0) or np.any(messages >= rodd.codebook_size):
        raise ParameterError("message indices must lie in [0, 2^l)", size=rodd.codebook_size)

    if waveforms is None:
        waveforms = frame_waveforms(net, rodd, messages, seed, silent=silent)
    if store is None:
        store = CodebookStore(rodd, seed, session=session)

    params = net.params
    if noise_variance is None:
        noise_variance = nonneighbor_interference_variance(params, rodd.on_probability)
    noise_variance = float(noise_variance)
    noiseless = noise_variance <= 0.0
    sigma = 1.0 if noiseless else math.sqrt(noise_variance)

    with session.setup_log() as report:
        off_slots = np.flatnonzero(waveforms[receiver] == 0)
        report(S.SelectOffSlots, success=True, receiver=int(receiver), off_slots=len(off_slots))

        neighbors = net.neighbors(receiver)
        if silent is not None:
            neighbors = neighbors[~silent[neighbors]]
        size = rodd.codebook_size
        coefficients = net.coefficients[receiver, neighbors]
        truth = messages[neighbors]

        columns = [store.get(int(j)).signatures[:, off_slots].T for j in neighbors]
        if columns:
            sensing = np.concatenate(columns, axis=1).astype(float) / rodd.column_scale
        else:
            sensing = np.zeros((len(off_slots), 0))

        hidden = np.zeros(size * len(neighbors), dtype=complex)
        hidden[np.arange(len(neighbors)) * size + truth] = coefficients

        amplitude = math.sqrt(params.snr)
        signal = amplitude * (coefficients @ waveforms[neighbors][:, off_slots])

        rng = derive_rng(seed, Stream.FRAME, receiver)
        thermal = (rng.standard_normal(rodd.frame_length) + 1j * rng.standard_normal(rodd.frame_length)) / math.sqrt(2.0)
        thermal = thermal[off_slots]

        if noiseless:
            received = signal
        elif mode is InterferenceMode.GAUSSIAN:
            received = signal + sigma * thermal
        else:
            others = np.ones(net.size, dtype=bool)
            others[neighbors] = False
            others[receiver] = False
            if silent is not None:
                others &= ~silent
            interference = amplitude * (net.coefficients[receiver, others] @ waveforms[others][:, off_slots])
            received = signal + interference + thermal
        observation = received / sigma
        report(S.SuperposeSignals, success=True, neighbors=len(neighbors), mode=mode.value, noise_variance=noise_variance)

        if len(off_slots) == 0:
            report(S.ValidateInstance, failure=True, receiver=int(receiver), reason="no off-slots")

    return ObservationInstance(
        receiver=int(receiver),
        neighbors=neighbors,
        messages=truth,
        coefficients=coefficients,
        off_slots=off_slots,
        sensing=sensing,
        observation=observation,
        hidden=hidden,
        noise_variance=noise_variance,
        snr=params.snr,
        rodd=rodd,
    )


def system_load(rodd: RoddParams, c: float) -> float:
    """Average load β = 2^l c / (M_s (1-q)): unknowns per expected off-slot."""
    if rodd.on_probability >= 1.0:
        raise ParameterError("no off-slots when q = 1", q=rodd.on_probability)
    return rodd.codebook_size * c / (rodd.frame_length * (1.0 - rodd.on_probability))
