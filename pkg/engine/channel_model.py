import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

logger = logging.getLogger(__name__)


class ConfigValidationError(ValueError):
    """A SystemConfig invariant is violated. The message names the invariant."""


class Scheme(str, Enum):
    ORIGINAL_SLNR = "original_slnr"
    LAYER_SLNR = "layer_slnr"


class ReceiverType(str, Enum):
    MATCHED_FILTER = "matched_filter"
    MMSE = "mmse"


class LayerNoise(str, Enum):
    """
    Noise term of the layer objective.
    ANTENNA_SUM: M_kσ², the noise summed over the receive antennas.
    POST_COMBINING: L_kσ²‖u_kl‖², the noise left after the layer combiner at per-layer symbol power 1/L_k.
    """
    ANTENNA_SUM = "antenna_sum"
    POST_COMBINING = "post_combining"


@dataclass(frozen=True)
class SystemConfig:
    """
    Scenario parameters for one campaign.
    Lists are stored as tuples so the config is hashable and safe to ship to workers.
    """
    n_tx: int
    users: int
    rx_antennas: tuple
    layers: tuple
    noise_var: float
    scheme: Scheme = Scheme.LAYER_SLNR
    receiver: ReceiverType = ReceiverType.MATCHED_FILTER
    feedback_iters: int = 10
    drops: int = 10000
    seed: int = 0
    layer_noise: LayerNoise = LayerNoise.ANTENNA_SUM

    def __post_init__(self):
        object.__setattr__(self, "rx_antennas", tuple(int(m) for m in self.rx_antennas))
        object.__setattr__(self, "layers", tuple(int(l) for l in self.layers))
        object.__setattr__(self, "noise_var", float(self.noise_var))
        try:
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        except ValueError:
            raise ConfigValidationError(f"scheme must be one of {[s.value for s in Scheme]}, got {self.scheme!r}")
        try:
            object.__setattr__(self, "receiver", ReceiverType(self.receiver))
        except ValueError:
            raise ConfigValidationError(
                f"receiver must be one of {[r.value for r in ReceiverType]}, got {self.receiver!r}"
            )
        try:
            object.__setattr__(self, "layer_noise", LayerNoise(self.layer_noise))
        except ValueError:
            raise ConfigValidationError(
                f"layer_noise must be one of {[n.value for n in LayerNoise]}, got {self.layer_noise!r}"
            )
        self.validate()

    def validate(self):
        """
        Checks the scenario invariants:
        1. counts are positive (drops ≥ 1, feedback_iters ≥ 0)
        2. rx_antennas and layers have one entry per user
        3. 1 ≤ L_k ≤ min(M_k, N) for every user
        4. noise_var > 0
        5. seed fits in 64 unsigned bits
        Σ_k L_k > N only produces a warning.
        """
        if self.n_tx < 1:
            raise ConfigValidationError(f"n_tx must be >= 1, got {self.n_tx}")
        if self.users < 1:
            raise ConfigValidationError(f"users must be >= 1, got {self.users}")
        if len(self.rx_antennas) != self.users:
            raise ConfigValidationError(
                f"rx_antennas must have one entry per user ({self.users}), got {len(self.rx_antennas)}"
            )
        if len(self.layers) != self.users:
            raise ConfigValidationError(
                f"layers must have one entry per user ({self.users}), got {len(self.layers)}"
            )
        for k, (m_k, l_k) in enumerate(zip(self.rx_antennas, self.layers), start=1):
            if m_k < 1:
                raise ConfigValidationError(f"rx_antennas[{k}] must be >= 1, got {m_k}")
            if l_k < 1:
                raise ConfigValidationError(f"layers[{k}] must be >= 1, got {l_k}")
            if l_k > min(m_k, self.n_tx):
                raise ConfigValidationError(
                    f"layers[{k}] = {l_k} exceeds min(rx_antennas[{k}], n_tx) = {min(m_k, self.n_tx)}"
                )
        if not np.isfinite(self.noise_var) or self.noise_var <= 0:
            raise ConfigValidationError(f"noise_var must be > 0, got {self.noise_var}")
        if self.feedback_iters < 0:
            raise ConfigValidationError(f"feedback_iters must be >= 0, got {self.feedback_iters}")
        if self.drops < 1:
            raise ConfigValidationError(f"drops must be >= 1, got {self.drops}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.total_layers > self.n_tx:
            logger.warning(
                f"Total layers {self.total_layers} exceed n_tx {self.n_tx}; leakage cannot be fully suppressed."
            )

    @property
    def total_layers(self):
        return sum(self.layers)

    def noise_var_of(self, k):
        # single value shared by all users
        return self.noise_var


@dataclass(frozen=True)
class ChannelSet:
    matrices: tuple
    drop_id: int
    attempt: int = 0

    @property
    def users(self):
        return len(self.matrices)

    def __getitem__(self, k):
        return self.matrices[k]


def channel_stream(seed, drop_id, attempt, user):
    """
    Independent PCG64 stream keyed by (seed, drop_id, attempt, user).
    SeedSequence spawn keys keep streams for different keys statistically independent.
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(drop_id), int(attempt), int(user)))
    return np.random.default_rng(seq)


def rayleigh_matrix(rng, rows, cols):
    """
    i.i.d. CN(0, 1) entries: real and imaginary parts each N(0, 1/2).
    Normals come from numpy's ziggurat sampler.
    """
    parts = rng.standard_normal((2, rows, cols))
    return (parts[0] + 1j * parts[1]) * np.sqrt(0.5)


def generate_channels(config, drop_id, attempt=0):
    """
    Draws the K per-user M_k x N channel matrices for one drop.
    attempt > 0 selects the resampling sub-stream used after a degenerate drop.
    """
    matrices = tuple(
        rayleigh_matrix(channel_stream(config.seed, drop_id, attempt, k), m_k, config.n_tx)
        for k, m_k in enumerate(config.rx_antennas)
    )
    return ChannelSet(matrices=matrices, drop_id=drop_id, attempt=attempt)
