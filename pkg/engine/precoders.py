import logging
from dataclasses import dataclass

import numpy as np

from engine.channel_model import LayerNoise
from engine.receivers import DEGENERATE_NORM, DegenerateChannel
from linalg_utils.numerics import generalized_eig_top, hermitian, rank_one_generalized_top

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrecoderSet:
    """
    Per-user N x L_k precoders with unit-norm columns, so Tr(V_kᴴV_k) = L_k.
    eigenvalues[k][l] is the generalized eigenvalue the solver reported for column l.
    """
    matrices: tuple
    eigenvalues: tuple = ()

    def __getitem__(self, k):
        return self.matrices[k]

    def column(self, k, l):
        return self.matrices[k][:, l]


@dataclass(frozen=True)
class EffectiveChannels:
    """Receiver-projected channels seen by layer l of user k."""
    desired: np.ndarray       # G_kl, 1 x N
    intra_user: np.ndarray    # Ĝ_kl, (L_k - 1) x N
    inter_user: np.ndarray    # G̃_kl, (Σ_{i≠k} L_i) x N
    leakage: np.ndarray       # Ḡ_kl = [Ĝ; G̃]


def _stack_rows(blocks, n_cols):
    blocks = [b for b in blocks if b.shape[0] > 0]
    if not blocks:
        return np.zeros((0, n_cols), dtype=np.complex128)
    return np.vstack(blocks)


def build_user_leakage(channels, k):
    """
    H̃_k: the channels of every other user stacked vertically in ascending user order.
    Shape (Σ_{i≠k} M_i) x N; zero rows when there is a single user.
    """
    n_tx = channels[k].shape[1]
    return _stack_rows([channels[i] for i in range(channels.users) if i != k], n_tx)


def project_channels(channels, receivers):
    """U_iH_i for every user, the rows the transmitter sees after receiver feedback."""
    return [receivers[i] @ channels[i] for i in range(channels.users)]


def _effective_from_projected(projected, k, l):
    n_tx = projected[k].shape[1]
    desired = projected[k][l:l + 1, :]
    intra = np.delete(projected[k], l, axis=0)
    inter = _stack_rows([projected[i] for i in range(len(projected)) if i != k], n_tx)
    leakage = _stack_rows([intra, inter], n_tx)
    return EffectiveChannels(desired=desired, intra_user=intra, inter_user=inter, leakage=leakage)


def build_effective_channels(channels, receivers, k, l):
    """
    Builds G_kl = u_kl H_k, Ĝ_kl (rows u_kd H_k for d ≠ l), G̃_kl (blocks U_i H_i
    for i ≠ k in ascending order) and the stacked leakage Ḡ_kl.
    """
    return _effective_from_projected(project_channels(channels, receivers), k, l)


def leakage_denominator(leakage, noise_power):
    """noise_power · I + XᴴX for a stacked leakage channel X."""
    n_tx = leakage.shape[1]
    return noise_power * np.eye(n_tx, dtype=np.complex128) + hermitian(leakage) @ leakage


def layer_noise_power(receivers, config, k, l):
    """
    Noise weight of the layer objective for layer l of user k:
    M_kσ² (antenna_sum) or L_kσ²‖u_kl‖² (post_combining).
    """
    noise_var = config.noise_var_of(k)
    if config.layer_noise is LayerNoise.ANTENNA_SUM:
        return config.rx_antennas[k] * noise_var
    u_kl = receivers[k][l, :]
    power = float(np.real(np.vdot(u_kl, u_kl)))
    if power <= DEGENERATE_NORM ** 2:
        logger.error(f"Combiner row ({k}, {l}) vanished; post-combining noise is zero")
        raise DegenerateChannel(f"combiner row ({k}, {l}) has norm² {power:.3e}")
    return config.layers[k] * noise_var * power


def slnr_user_precoder(channels, config):
    """
    Per-user SLNR precoder: V_k holds the top-L_k generalized eigenvectors of
    (H_kᴴH_k, M_kσ²I + H̃_kᴴH̃_k), each scaled to unit norm.
    """
    matrices = []
    eigenvalues = []
    for k in range(channels.users):
        h_k = channels[k]
        signal = hermitian(h_k) @ h_k
        noise_power = config.rx_antennas[k] * config.noise_var_of(k)
        leak = leakage_denominator(build_user_leakage(channels, k), noise_power)
        try:
            pairs = generalized_eig_top(signal, leak, config.layers[k])
        except Exception as e:
            logger.error(f"User SLNR solve failed for user {k} in drop {channels.drop_id}: {e}")
            raise
        matrices.append(np.column_stack([p.vector for p in pairs]))
        eigenvalues.append(np.array([p.value for p in pairs]))
    return PrecoderSet(matrices=tuple(matrices), eigenvalues=tuple(eigenvalues))


def layer_precoder(effective, noise_power):
    """
    Top generalized eigenpair of (G_klᴴG_kl, noise_power·I + Ḡ_klᴴḠ_kl) for one layer.
    G_kl is a single row, so the pair comes from the rank-one closed form.
    Returns (unit-norm v, eigenvalue).
    """
    pair = rank_one_generalized_top(effective.desired, leakage_denominator(effective.leakage, noise_power))
    return pair.vector, pair.value


def layer_slnr_precoder(channels, receivers, config):
    """
    Per-layer SLNR precoder. For every (k, l) the receivers currently known at the
    transmitter (U(t-1) in the feedback loop) define the effective channels, and
    v_kl is the leading generalized eigenvector of the layer's matrix pair.
    """
    projected = project_channels(channels, receivers)
    matrices = []
    eigenvalues = []
    for k in range(channels.users):
        columns = []
        values = []
        for l in range(config.layers[k]):
            effective = _effective_from_projected(projected, k, l)
            try:
                v, value = layer_precoder(effective, layer_noise_power(receivers, config, k, l))
            except Exception as e:
                logger.error(f"Layer SLNR solve failed for user {k} layer {l} in drop {channels.drop_id}: {e}")
                raise
            columns.append(v)
            values.append(value)
        matrices.append(np.column_stack(columns))
        eigenvalues.append(np.array(values))
    return PrecoderSet(matrices=tuple(matrices), eigenvalues=tuple(eigenvalues))
