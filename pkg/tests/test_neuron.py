import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from snnsar.errors import DimensionError, DomainError, NumericError
from snnsar.neuron import (
    LifParams, NeuronState, SynapseMatrix, fire_and_inhibit, input_current, lif_step,
    quantize_weights, simulate_currents, simulate_layer,
)


def one_input_every_unit(T=100):
    f = np.ones((1, T + 1), dtype=bool)
    f[:, 0] = False
    return f


def test_hand_simulated_recurrence_with_refractory():
    # +8 in, -5 leak: +3 per unit, so threshold 80 is first reached at t = ceil(80/3) = 27.
    # After the reset the neuron is refractory for t = 28..47 and integrates again
    # from t = 48, needing another 27 units: second spike at 48 + 26 = 74.
    trace = simulate_layer(one_input_every_unit(), SynapseMatrix(np.array([[8.0]])), LifParams(sedsi_T=100))
    assert list(np.flatnonzero(trace.spikes[0])) == [27, 74]


def test_hand_simulated_recurrence_without_refractory():
    trace = simulate_layer(one_input_every_unit(), SynapseMatrix(np.array([[8.0]])),
                           LifParams(sedsi_T=100, t_ref=0))
    assert list(np.flatnonzero(trace.spikes[0])) == [27, 54, 81]


def test_leak_never_crosses_rest():
    p = LifParams()
    assert lif_step(NeuronState(3.0), 0.0, p).potential == 0.0
    assert lif_step(NeuronState(-3.0), 0.0, p).potential == 0.0
    assert lif_step(NeuronState(-30.0), 0.0, p).potential == -25.0
    assert lif_step(NeuronState(10.0), 2.0, p).potential == 7.0


def test_refractory_neuron_counts_down_without_integrating():
    s = lif_step(NeuronState(0.0, 2), 50.0, LifParams())
    assert s.potential == 0.0 and s.refractory_remaining == 1


def test_winner_is_highest_ties_to_lowest_index():
    p = LifParams()
    states = [NeuronState(90.0), NeuronState(100.0), NeuronState(100.0)]
    winner, out = fire_and_inhibit(states, p, t=4)
    assert winner == 1
    assert out[1].potential == p.p_reset and out[1].refractory_remaining == p.t_ref
    assert out[1].spike_history == [4]
    assert out[0].potential == -410.0 and out[2].potential == -400.0


def test_inhibition_floor():
    p = LifParams()
    _, out = fire_and_inhibit([NeuronState(100.0), NeuronState(-450.0), NeuronState(-700.0)], p, 0)
    assert out[1].potential == -500.0  # floored
    assert out[2].potential == -700.0  # already below the floor: unchanged


def test_no_spike_below_threshold():
    winner, _ = fire_and_inhibit([NeuronState(79.9), NeuronState(0.0)], LifParams(), 0)
    assert winner is None


def test_input_current():
    assert input_current([1.0, 2.0, 4.0], [True, False, True]) == 5.0
    with pytest.raises(DimensionError):
        input_current([1.0, 2.0], [True])


@given(st.integers(0, 2 ** 31), st.integers(1, 6), st.integers(0, 8))
@settings(max_examples=60, deadline=None)
def test_layer_invariants(seed, n, t_ref):
    rng = np.random.default_rng(seed)
    p = LifParams(t_ref=t_ref, sedsi_T=40)
    currents = rng.uniform(-20, 60, size=(41, n))
    tr = simulate_currents(currents, p)
    assert (tr.spikes.sum(axis=0) <= 1).all()
    for i, t in zip(*np.nonzero(tr.spikes)):
        assert tr.drive[i, t] >= p.p_th
        assert tr.potentials[i, t] == p.p_reset
        window = slice(t + 1, t + 1 + t_ref)
        assert not tr.spikes[i, window].any()
        assert (tr.potentials[i, window] == p.p_reset).all()
    assert (tr.potentials >= min(p.p_inhibit, currents.min() * 41)).all()


def test_synapse_matrix_validation():
    with pytest.raises(DimensionError):
        SynapseMatrix(np.zeros(3))
    with pytest.raises(NumericError):
        SynapseMatrix(np.array([[np.inf]]))
    with pytest.raises(DomainError):
        SynapseMatrix(np.array([[2.0]]), -1.0, 1.0)
    with pytest.raises(DomainError):
        SynapseMatrix(np.zeros((1, 1)), 1.0, 1.0)


def test_simulate_layer_dimension_mismatch():
    with pytest.raises(DimensionError):
        simulate_layer(np.zeros((3, 5), dtype=bool), SynapseMatrix(np.zeros((2, 1))), LifParams())


def test_lif_params_validation():
    with pytest.raises(DomainError):
        LifParams(p_th=0.0)
    with pytest.raises(DomainError):
        LifParams(leak_D=1.0)
    with pytest.raises(DomainError):
        LifParams(t_ref=-1)
    with pytest.raises(DomainError):
        LifParams(leak_mode="quadratic")


def test_exponential_leak_mode_relaxes_to_rest():
    p = LifParams(leak_mode="exponential", tau_m=10.0)
    assert lif_step(NeuronState(10.0), 0.0, p).potential == pytest.approx(9.0)


@given(st.lists(st.floats(-1.5, 1.5), min_size=1, max_size=20))
def test_quantized_weights_are_float32_and_in_bounds(ws):
    q = quantize_weights(ws, -1.2, 1.4)
    assert np.array_equal(q, q.astype(np.float32).astype(np.float64))
    assert q.min() >= -1.2 and q.max() <= 1.4
