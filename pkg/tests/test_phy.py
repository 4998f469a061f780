## Copyright © 2023, Alex J. Champandard.  Licensed under MIT; see LICENSE! ⚘

import math

import numpy as np
import pytest

from roddsim.types import CapacityError, ParameterError, InterferenceMode
from roddsim.utils import Stream, derive_rng
from roddsim.phy import (
    RoddParams,
    CodebookStore,
    ObservationInstance,
    generate_codebook,
    transmitted_signature,
    draw_messages,
    frame_waveforms,
    simulate_frame,
    system_load,
)


def busiest(net):
    return int(np.argmax(net.degrees()))


def test_codebook_is_reproducible():
    rodd = RoddParams(message_bits=2, frame_length=10, on_probability=0.3)
    a, b = generate_codebook(7, rodd, seed=4), generate_codebook(7, rodd, seed=4)
    np.testing.assert_array_equal(a.signatures, b.signatures)
    assert a.signatures.shape == (4, 10)


def test_codebooks_differ_between_owners():
    rodd = RoddParams(message_bits=3, frame_length=64, on_probability=0.5)
    a, b = generate_codebook(1, rodd, seed=4), generate_codebook(2, rodd, seed=4)
    assert not np.array_equal(a.signatures, b.signatures)


def test_silent_codebook():
    rodd = RoddParams(message_bits=2, frame_length=10, on_probability=0.0)
    assert not generate_codebook(0, rodd, seed=1).signatures.any()


def test_codebook_zero_fraction(rodd5):
    signatures = generate_codebook(3, rodd5, seed=9).signatures
    q = rodd5.on_probability
    sigma = math.sqrt(q * (1 - q) / signatures.size)
    assert np.mean(signatures == 0) == pytest.approx(1 - q, abs=3 * sigma)
    assert set(np.unique(signatures)) <= {-1, 0, 1}


def test_codebook_capacity():
    with pytest.raises(CapacityError):
        generate_codebook(0, RoddParams(message_bits=20, frame_length=1000), seed=0)


@pytest.mark.parametrize("index", [0, 1, 17, 31])
def test_transmitted_signature_matches_codebook(rodd5, index):
    codebook = generate_codebook(12, rodd5, seed=5)
    np.testing.assert_array_equal(transmitted_signature(12, index, rodd5, seed=5), codebook[index])


def test_transmitted_signature_range(rodd5):
    with pytest.raises(ParameterError):
        transmitted_signature(0, rodd5.codebook_size, rodd5, seed=0)


def test_codebook_store_evicts_oldest(rodd5):
    store = CodebookStore(rodd5, seed=1, budget=2 * rodd5.codebook_size * rodd5.frame_length)
    first = store.get(0)
    store.get(1)
    assert store.get(0) is first
    store.get(2)
    assert len(store) == 2 and 1 not in store and 0 in store


def test_system_load(rodd5):
    assert system_load(RoddParams(5, 280, 0.0824), 11.1) == pytest.approx(1.38, abs=0.01)
    assert system_load(rodd5, 0.0) == 0.0
    double = RoddParams(5, 560, 0.0824)
    assert system_load(double, 11.1) == pytest.approx(system_load(rodd5, 11.1) / 2)


def test_effective_snr(rodd5):
    assert rodd5.effective_snr(1e6, 2.0) == pytest.approx(1e6 * rodd5.slot_variance / 2.0)
    assert rodd5.effective_snr(1e6, 0.0) == pytest.approx(1e6 * rodd5.slot_variance)


def test_draw_messages_range(rodd5):
    messages = draw_messages(1000, rodd5, np.random.default_rng(0))
    assert messages.min() >= 0 and messages.max() < rodd5.codebook_size


def test_hidden_vector_layout(hand_network):
    rodd = RoddParams(message_bits=2, frame_length=40, on_probability=0.3)
    u = np.array([0.002 + 0.001j, -0.003j, 0.0015])
    coefficients = np.zeros((4, 4), dtype=complex)
    coefficients[0, 1:] = coefficients[1:, 0] = u
    net = hand_network(coefficients)
    messages = np.array([0, 2, 1, 0])

    instance = simulate_frame(net, rodd, messages, receiver=0, seed=3)
    expected = np.zeros(12, dtype=complex)
    expected[[2, 5, 8]] = u
    np.testing.assert_array_equal(instance.hidden, expected)
    np.testing.assert_array_equal(instance.messages, [2, 1, 0])

    blocks = instance.hidden.reshape(3, 4)
    assert (np.count_nonzero(blocks, axis=1) == 1).all()


def test_sensing_matrix_columns(small_net, rodd5):
    messages = draw_messages(small_net.size, rodd5, derive_rng(2, Stream.MESSAGES))
    receiver = busiest(small_net)
    instance = simulate_frame(small_net, rodd5, messages, receiver, seed=2)

    own = transmitted_signature(receiver, int(messages[receiver]), rodd5, seed=2)
    np.testing.assert_array_equal(instance.off_slots, np.flatnonzero(own == 0))
    assert instance.sensing.shape == (instance.measurement_count, rodd5.codebook_size * instance.neighbor_count)

    first = generate_codebook(int(instance.neighbors[0]), rodd5, seed=2)
    scale = math.sqrt(rodd5.slot_variance)
    np.testing.assert_allclose(instance.sensing[:, :rodd5.codebook_size] * scale,
                               first.signatures[:, instance.off_slots].T)


def test_column_norms_average_one(rodd5):
    norms = []
    for owner in range(40):
        off = transmitted_signature(owner + 1000, 0, rodd5, seed=8) == 0
        columns = generate_codebook(owner, rodd5, seed=8).signatures[:, off]
        norms.append((columns.astype(float) ** 2).sum(axis=1) / rodd5.slot_variance)
    assert np.mean(norms) == pytest.approx(1.0, abs=0.05)


def test_noiseless_observation(small_net, rodd5):
    messages = draw_messages(small_net.size, rodd5, np.random.default_rng(1))
    instance = simulate_frame(small_net, rodd5, messages, busiest(small_net), seed=1, noise_variance=0.0)
    gain = math.sqrt(instance.effective_snr)
    assert instance.effective_snr == pytest.approx(small_net.params.snr * rodd5.slot_variance)
    np.testing.assert_allclose(instance.observation, gain * instance.sensing @ instance.hidden, rtol=1e-9, atol=1e-12)


def test_explicit_mode_matches_gaussian_without_interferers(small_net, rodd5):
    receiver = busiest(small_net)
    silent = np.ones(small_net.size, dtype=bool)
    silent[small_net.neighbors(receiver)] = False
    silent[receiver] = False
    messages = draw_messages(small_net.size, rodd5, np.random.default_rng(2))

    kwargs = dict(seed=4, noise_variance=1.0, silent=silent)
    gaussian = simulate_frame(small_net, rodd5, messages, receiver, mode=InterferenceMode.GAUSSIAN, **kwargs)
    explicit = simulate_frame(small_net, rodd5, messages, receiver, mode=InterferenceMode.EXPLICIT, **kwargs)
    np.testing.assert_allclose(explicit.observation, gaussian.observation, rtol=0.0, atol=1e-15)


def test_explicit_mode_adds_interference(small_net, rodd5):
    receiver = busiest(small_net)
    messages = draw_messages(small_net.size, rodd5, np.random.default_rng(2))
    gaussian = simulate_frame(small_net, rodd5, messages, receiver, mode="gaussian", seed=4, noise_variance=1.0)
    explicit = simulate_frame(small_net, rodd5, messages, receiver, mode="explicit", seed=4, noise_variance=1.0)
    assert not np.allclose(explicit.observation, gaussian.observation)


def test_isolated_receiver_hears_noise(hand_network, rodd5):
    net = hand_network(np.zeros((3, 3)))
    instance = simulate_frame(net, rodd5, np.zeros(3, dtype=int), receiver=0, seed=1, noise_variance=2.0)
    assert instance.neighbor_count == 0
    assert instance.sensing.shape == (instance.measurement_count, 0)
    # Normalized by σ, the noise has unit complex variance.
    assert np.mean(np.abs(instance.observation) ** 2) == pytest.approx(1.0, abs=0.35)


def test_receiver_without_off_slots(hand_network):
    rodd = RoddParams(message_bits=2, frame_length=16, on_probability=1.0)
    coefficients = np.zeros((2, 2), dtype=complex)
    coefficients[0, 1] = coefficients[1, 0] = 0.01
    instance = simulate_frame(hand_network(coefficients), rodd, np.array([0, 1]), receiver=0, seed=1)
    assert instance.degenerate and instance.measurement_count == 0


def test_transmit_events_have_probability_q(small_net, rodd5):
    messages = draw_messages(small_net.size, rodd5, np.random.default_rng(3))
    waveforms = frame_waveforms(small_net, rodd5, messages, seed=3)
    q = rodd5.on_probability
    sigma = math.sqrt(q * (1 - q) / waveforms.size)
    assert np.mean(waveforms != 0) == pytest.approx(q, abs=4 * sigma)


def test_message_range_is_checked(small_net, rodd5):
    messages = np.full(small_net.size, rodd5.codebook_size)
    with pytest.raises(ParameterError):
        simulate_frame(small_net, rodd5, messages, 0, seed=0)


def test_instance_save_and_load(small_net, rodd5, tmp_path):
    messages = draw_messages(small_net.size, rodd5, np.random.default_rng(4))
    instance = simulate_frame(small_net, rodd5, messages, busiest(small_net), seed=4)
    path = tmp_path / "instance.npz"
    instance.save(str(path))
    loaded = ObservationInstance.load(str(path))

    assert loaded.rodd == rodd5 and loaded.receiver == instance.receiver
    np.testing.assert_array_equal(loaded.sensing, instance.sensing)
    np.testing.assert_array_equal(loaded.observation, instance.observation)
    assert loaded.effective_snr == pytest.approx(instance.effective_snr)
