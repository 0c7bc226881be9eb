"""Leaky integrate-and-fire dynamics with winner-takes-all lateral inhibition.

Within one time unit a layer integrates its input, leaks toward rest, and
then at most one neuron (the one with the highest supra-threshold
potential) fires.  Every other non-refractory neuron in the layer is pushed
down by the inhibitory potential.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, DomainError, NumericError

LEAK_MODES = ("constant", "exponential")


@dataclass(frozen=True)
class LifParams:
    p_rest: float = 0.0
    p_reset: float = 0.0
    p_th: float = 80.0
    leak_D: float = -5.0
    t_ref: int = 20
    p_inhibit: float = -500.0
    sedsi_T: int = 70
    leak_mode: str = "constant"
    tau_m: float = 10.0
    r_m: float = 1.0

    def __post_init__(self):
        if not self.p_th > self.p_rest:
            raise DomainError(f"p_th ({self.p_th}) must exceed p_rest ({self.p_rest})")
        if self.t_ref < 0 or int(self.t_ref) != self.t_ref:
            raise DomainError(f"t_ref must be a non-negative integer, got {self.t_ref}")
        if self.leak_D > 0:
            raise DomainError(f"leak_D must be <= 0, got {self.leak_D}")
        if self.p_inhibit > 0:
            raise DomainError(f"p_inhibit must be <= 0, got {self.p_inhibit}")
        if self.sedsi_T < 1 or int(self.sedsi_T) != self.sedsi_T:
            raise DomainError(f"sedsi_T must be a positive integer, got {self.sedsi_T}")
        if self.leak_mode not in LEAK_MODES:
            raise DomainError(f"leak_mode must be one of {LEAK_MODES}, got {self.leak_mode!r}")
        if self.leak_mode == "exponential" and not self.tau_m > 0:
            raise DomainError("tau_m must be positive in exponential mode")

    @property
    def inhibit_floor(self) -> float:
        return self.p_inhibit

    def with_(self, **changes) -> "LifParams":
        return replace(self, **changes)


@dataclass
class NeuronState:
    potential: float = 0.0
    refractory_remaining: int = 0
    spike_history: list[int] = field(default_factory=list)


@dataclass
class SynapseMatrix:
    """Dense pre x post weights kept inside ``[w_min, w_max]``."""

    weights: np.ndarray
    w_min: float = -np.inf
    w_max: float = np.inf

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise DimensionError(f"weights must be 2-D, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise NumericError("weights must be finite")
        if not self.w_min < self.w_max:
            raise DomainError(f"w_min ({self.w_min}) must be below w_max ({self.w_max})")
        if w.size and (w.min() < self.w_min or w.max() > self.w_max):
            raise DomainError(f"weights outside [{self.w_min}, {self.w_max}]")
        self.weights = w

    @property
    def pre_count(self) -> int:
        return self.weights.shape[0]

    @property
    def post_count(self) -> int:
        return self.weights.shape[1]

    def clamp(self) -> None:
        np.clip(self.weights, self.w_min, self.w_max, out=self.weights)

    def copy(self) -> "SynapseMatrix":
        return SynapseMatrix(self.weights.copy(), self.w_min, self.w_max)


def quantize_weights(weights, w_min: float = -np.inf, w_max: float = np.inf) -> np.ndarray:
    """Round to float32 precision without leaving ``[w_min, w_max]``.

    Checkpoints store 32-bit weights; holding the in-memory model at the same
    precision makes save/load exact.
    """
    q = np.asarray(weights, dtype=np.float64).astype(np.float32)
    lo, hi = np.float32(w_min), np.float32(w_max)
    if np.isfinite(w_min) and float(lo) < w_min:
        lo = np.nextafter(lo, np.float32(np.inf))
    if np.isfinite(w_max) and float(hi) > w_max:
        hi = np.nextafter(hi, np.float32(-np.inf))
    return np.clip(q, lo, hi).astype(np.float64)


@dataclass
class LayerTrace:
    """Stored potentials (after firing/inhibition) and output spikes.

    ``drive`` holds the potentials right before the threshold test, which
    is what exceeded the threshold whenever a spike was emitted.
    """

    potentials: np.ndarray
    spikes: np.ndarray
    drive: np.ndarray

    @property
    def fired_index(self) -> np.ndarray:
        """Index of the firing neuron per time unit, -1 when silent."""
        out = np.full(self.spikes.shape[1], -1)
        t_idx, n_idx = np.nonzero(self.spikes.T)
        out[t_idx] = n_idx
        return out

    def spike_counts(self) -> np.ndarray:
        return self.spikes.sum(axis=1)


def input_current(weights_row, pre_spikes_at_t) -> float:
    """Sum of weights over presynaptic neurons that fire at this time unit."""
    w = np.asarray(weights_row, dtype=np.float64)
    s = np.asarray(pre_spikes_at_t, dtype=bool)
    if w.shape != s.shape:
        raise DimensionError(f"weights length {w.shape} does not match spikes {s.shape}")
    return float(w[s].sum())


def _integrate(v, refr, current, params: LifParams) -> np.ndarray:
    """In-place integrate + leak; refractory neurons only count down.

    Returns the mask of neurons that integrated (were not refractory).
    """
    active = refr == 0
    refr[~active] -= 1
    if params.leak_mode == "constant":
        x = v[active] + current[active]
        leak = -params.leak_D
        above = x > params.p_rest
        x[above] = np.maximum(x[above] - leak, params.p_rest)
        x[~above] = np.minimum(x[~above] + leak, params.p_rest)
        v[active] = x
    else:
        x = v[active]
        v[active] = x + (-(x - params.p_rest) + params.r_m * current[active]) / params.tau_m
    return active


def _fire(v, refr, active, params: LifParams):
    """In-place threshold test and lateral inhibition; returns the winner or None."""
    eligible = active & (v >= params.p_th)
    if not eligible.any():
        return None
    winner = int(np.argmax(np.where(eligible, v, -np.inf)))
    others = active.copy()
    others[winner] = False
    if params.p_inhibit != 0:
        x = v[others]
        v[others] = np.maximum(x + params.p_inhibit, np.minimum(x, params.inhibit_floor))
    v[winner] = params.p_reset
    refr[winner] = params.t_ref
    return winner


def lif_step(state: NeuronState, current: float, params: LifParams) -> NeuronState:
    """One time unit of membrane dynamics for a single neuron (no firing)."""
    v = np.array([state.potential], dtype=np.float64)
    refr = np.array([state.refractory_remaining])
    _integrate(v, refr, np.array([float(current)]), params)
    return NeuronState(float(v[0]), int(refr[0]), list(state.spike_history))


def fire_and_inhibit(states: list[NeuronState], params: LifParams, t: int):
    """Threshold test with winner-takes-all over one layer at time ``t``.

    Returns ``(fired_index or None, new_states)``.
    """
    v = np.array([s.potential for s in states], dtype=np.float64)
    refr = np.array([s.refractory_remaining for s in states])
    winner = _fire(v, refr, refr == 0, params)
    out = []
    for i, s in enumerate(states):
        history = list(s.spike_history)
        if i == winner:
            history.append(t)
        out.append(NeuronState(float(v[i]), int(refr[i]), history))
    return winner, out


class LayerDynamics:
    """Mutable state of one layer, advanced one time unit per ``step``."""

    def __init__(self, size: int, params: LifParams):
        self.params = params
        self.v = np.full(size, params.p_rest, dtype=np.float64)
        self.refr = np.zeros(size, dtype=np.int64)

    def step(self, current):
        """Returns ``(winner or None, drive)`` where drive is the pre-fire potential."""
        active = _integrate(self.v, self.refr, current, self.params)
        drive = self.v.copy()
        return _fire(self.v, self.refr, active, self.params), drive


def simulate_layer(pre_spike_field, synapses: SynapseMatrix, params: LifParams) -> LayerTrace:
    """Forward simulation over time units ``0..T`` with fixed weights."""
    field_ = np.asarray(pre_spike_field, dtype=bool)
    if field_.ndim != 2 or field_.shape[0] != synapses.pre_count:
        raise DimensionError(
            f"spike field with {field_.shape[0] if field_.ndim == 2 else '?'} trains "
            f"does not match {synapses.pre_count} presynaptic neurons"
        )
    currents = field_.T.astype(np.float64) @ synapses.weights
    return _run(currents, synapses.post_count, params)


def _run(currents, n: int, params: LifParams) -> LayerTrace:
    steps = currents.shape[0]
    layer = LayerDynamics(n, params)
    potentials = np.empty((n, steps))
    drive = np.empty((n, steps))
    spikes = np.zeros((n, steps), dtype=bool)
    for t in range(steps):
        winner, d = layer.step(currents[t])
        drive[:, t] = d
        potentials[:, t] = layer.v
        if winner is not None:
            spikes[winner, t] = True
    return LayerTrace(potentials, spikes, drive)


def simulate_currents(currents, params: LifParams) -> LayerTrace:
    """Like :func:`simulate_layer` but from a precomputed ``(T+1, n)`` current matrix."""
    currents = np.asarray(currents, dtype=np.float64)
    return _run(currents, currents.shape[1], params)
