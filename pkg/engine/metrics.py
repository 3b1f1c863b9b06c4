import logging
from dataclasses import dataclass

import numpy as np

from linalg_utils.numerics import frobenius_norm, hermitian
from engine.precoders import build_effective_channels, layer_noise_power, leakage_denominator

logger = logging.getLogger(__name__)

PERCENTILE_LEVELS = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95)
# cumulative probabilities are i/n in floating point; p = i/n must still select the i-th value
PERCENTILE_SLACK = 1e-12


class EmptySamples(ValueError):
    """An empirical CDF was requested over no samples."""


@dataclass(frozen=True)
class SinrSample:
    drop_id: int
    user: int
    layer: int
    scheme: str
    receiver: str
    sinr_db: float

    def __post_init__(self):
        if not np.isfinite(self.sinr_db):
            raise ValueError(f"Non-finite SINR for drop {self.drop_id} user {self.user} layer {self.layer}")


@dataclass(frozen=True)
class EmpiricalCdf:
    values: np.ndarray
    probabilities: np.ndarray

    def __len__(self):
        return len(self.values)


def to_db(x):
    return 10.0 * np.log10(x)


# --- objectives --------------------------------------------------------------

def evaluate_user_slnr(h_k, h_tilde, v_k, m_k, noise_var):
    """
    Per-user SLNR in trace form:
    Tr(V_kᴴH_kᴴH_kV_k) / Tr(V_kᴴ(M_kσ²I + H̃_kᴴH̃_k)V_k)
    Invariant to scaling V_k.
    """
    num = np.real(np.trace(hermitian(v_k) @ hermitian(h_k) @ h_k @ v_k))
    den = np.real(np.trace(hermitian(v_k) @ leakage_denominator(h_tilde, m_k * noise_var) @ v_k))
    return float(num / den)


def evaluate_user_slnr_norm_form(h_k, others, v_k, m_k, noise_var):
    """
    Per-user SLNR in Frobenius-norm form:
    (1/L)‖H_kV_k‖² / (M_kσ² + Σ_{i≠k} (1/L)‖H_iV_k‖²)
    Matches the trace form when Tr(V_kᴴV_k) = L.
    """
    n_layers = v_k.shape[1]
    num = frobenius_norm(h_k @ v_k) ** 2 / n_layers
    leak = sum(frobenius_norm(h_i @ v_k) ** 2 for h_i in others) / n_layers
    return float(num / (m_k * noise_var + leak))


def evaluate_receiver_aware_user_slnr(channels, receivers, v_k, config, k):
    """
    Receiver-aware per-user SLNR, a diagnostic:
    (1/L_k)‖U_kH_kV_k‖² / (M_kσ² + Σ_{i≠k} (1/L_k)‖U_iH_iV_k‖²)
    The noise term carries Tr(V_kᴴV_k)/L_k, which is 1 under the power constraint.
    """
    n_layers = v_k.shape[1]
    power = np.real(np.trace(hermitian(v_k) @ v_k)) / n_layers
    num = frobenius_norm(receivers[k] @ channels[k] @ v_k) ** 2 / n_layers
    leak = sum(
        frobenius_norm(receivers[i] @ channels[i] @ v_k) ** 2
        for i in range(channels.users) if i != k
    ) / n_layers
    return float(num / (config.rx_antennas[k] * config.noise_var_of(k) * power + leak))


def evaluate_layer_slnr(channels, receivers, v_kl, config, k, l):
    """
    Layer SLNR of a candidate precoder column v for layer l of user k:

        |u_kl H_k v|² / (N_kl + Σ_{d≠l} |u_kd H_k v|² + Σ_{i≠k} ‖U_i H_i v‖²)

    N_kl is layer_noise_power (M_kσ² by default) times ‖v‖², so the value is scale
    invariant and coincides with the Ḡ-form Rayleigh quotient.
    """
    v = np.asarray(v_kl, dtype=np.complex128).reshape(-1)
    projected = receivers[k] @ (channels[k] @ v)
    signal = np.abs(projected[l]) ** 2
    intra = np.sum(np.abs(np.delete(projected, l)) ** 2)
    inter = sum(
        np.sum(np.abs(receivers[i] @ (channels[i] @ v)) ** 2)
        for i in range(channels.users) if i != k
    )
    noise = layer_noise_power(receivers, config, k, l) * np.real(np.vdot(v, v))
    return float(signal / (noise + intra + inter))


def layer_slnr_elementwise(channels, receivers, v_k, config, k, l):
    """
    Layer SLNR from the entries of U_kH_kV_k and U_iH_iV_k (column l):
    |[U_kH_kV_k]_{l,l}|² over the layer noise plus the rest of column l plus the
    column-l entries of every other user's projection.
    """
    own = receivers[k] @ channels[k] @ v_k
    signal = np.abs(own[l, l]) ** 2
    intra = sum(np.abs(own[d, l]) ** 2 for d in range(own.shape[0]) if d != l)
    inter = 0.0
    for i in range(channels.users):
        if i == k:
            continue
        cross = receivers[i] @ channels[i] @ v_k
        inter += sum(np.abs(cross[d, l]) ** 2 for d in range(cross.shape[0]))
    v = v_k[:, l]
    noise = layer_noise_power(receivers, config, k, l) * np.real(np.vdot(v, v))
    return float(signal / (noise + intra + inter))


def layer_slnr_quotient_form(channels, receivers, v_kl, config, k, l):
    """Tr(vᴴG_klᴴG_klv) / Tr(vᴴ(N_kl·I + Ḡ_klᴴḠ_kl)v)."""
    v = np.asarray(v_kl, dtype=np.complex128).reshape(-1, 1)
    effective = build_effective_channels(channels, receivers, k, l)
    g = effective.desired
    num = np.real(np.trace(hermitian(v) @ hermitian(g) @ g @ v))
    den = np.real(np.trace(
        hermitian(v) @ leakage_denominator(effective.leakage, layer_noise_power(receivers, config, k, l)) @ v
    ))
    return float(num / den)


# --- measured SINR -----------------------------------------------------------

@dataclass(frozen=True)
class PowerTerms:
    """Per-layer post-combining powers of one user, one entry per layer."""
    desired: np.ndarray
    intra: np.ndarray
    inter: np.ndarray
    noise: np.ndarray

    @property
    def impairment(self):
        return self.intra + self.inter + self.noise


def user_power_terms(channels, precoders, receivers, config, k):
    """
    Post-combining powers for every layer of user k with T_i = U_kH_kV_i and symbol
    covariance (1/L_i)I. U_kH_k is formed once and shared by all layers.
    """
    combined = receivers[k] @ channels[k]
    own = np.abs(combined @ precoders[k]) ** 2 / config.layers[k]
    desired = np.diag(own).copy()
    intra = own.sum(axis=1) - desired
    inter = np.zeros(config.layers[k])
    for i in range(channels.users):
        if i == k:
            continue
        inter += np.sum(np.abs(combined @ precoders[i]) ** 2, axis=1) / config.layers[i]
    noise = config.noise_var_of(k) * np.sum(np.abs(receivers[k]) ** 2, axis=1)
    return PowerTerms(desired=desired, intra=intra, inter=inter, noise=noise)


def layer_power_terms(channels, precoders, receivers, config, k, l):
    """
    Post-combining powers for layer l of user k:
    desired, intra-user interference, inter-user interference, combiner-weighted noise.
    """
    terms = user_power_terms(channels, precoders, receivers, config, k)
    return float(terms.desired[l]), float(terms.intra[l]), float(terms.inter[l]), float(terms.noise[l])


def layer_sinr_db(terms):
    """Per-layer SINR in dB from one user's PowerTerms."""
    return to_db(terms.desired / terms.impairment)


def user_sinr_db(terms):
    """Aggregate SINR in dB: summed desired power over summed interference plus noise."""
    return float(to_db(np.sum(terms.desired) / np.sum(terms.impairment)))


def effective_layer_sinr(channels, precoders, receivers, config, k, l):
    """
    Measured effective layer SINR in dB. The noise term is σ²‖u_kl‖², the real
    post-combining noise power, not the noise weight of the design objective.
    """
    desired, intra, inter, noise = layer_power_terms(channels, precoders, receivers, config, k, l)
    return float(to_db(desired / (intra + inter + noise)))


def effective_user_sinr(channels, precoders, receivers, config, k):
    """Aggregate SINR of user k in dB."""
    return user_sinr_db(user_power_terms(channels, precoders, receivers, config, k))


def layer_sinr_spread(sinr_db):
    """Gap in dB between the best and worst layer of one user."""
    values = np.asarray(sinr_db, dtype=float)
    return float(values.max() - values.min()) if values.size else 0.0


# --- distributions -----------------------------------------------------------

def empirical_cdf(samples):
    """
    Sorted distinct values with cumulative probabilities i/n.
    Tied samples collapse to one point carrying the highest probability.
    """
    data = np.asarray(samples, dtype=float).reshape(-1)
    if data.size == 0:
        raise EmptySamples("cannot build an empirical CDF from zero samples")
    values, counts = np.unique(data, return_counts=True)
    cumulative = np.cumsum(counts)
    return EmpiricalCdf(values=values, probabilities=cumulative / cumulative[-1])


def percentile(cdf, p):
    """Smallest value whose cumulative probability is ≥ p."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"percentile level must be in (0, 1), got {p}")
    idx = int(np.searchsorted(cdf.probabilities, p - PERCENTILE_SLACK, side="left"))
    return float(cdf.values[min(idx, len(cdf.values) - 1)])


def percentile_table(cdf, levels=PERCENTILE_LEVELS):
    return {p: percentile(cdf, p) for p in levels}
