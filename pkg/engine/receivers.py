import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from engine.channel_model import ReceiverType
from linalg_utils.numerics import frobenius_norm, hermitian

logger = logging.getLogger(__name__)

DEGENERATE_NORM = 1e-14


class DegenerateChannel(RuntimeError):
    """The effective channel H_kV_k vanished; the drop has to be resampled."""


@dataclass(frozen=True)
class ReceiverSet:
    """Per-user L_k x M_k combiners; row l is u_kl."""
    matrices: tuple

    def __getitem__(self, k):
        return self.matrices[k]

    @property
    def users(self):
        return len(self.matrices)


def matched_filter(h_k, v_k):
    """
    U_k = (H_kV_k)ᴴ / ‖H_kV_k‖_F.
    Raises DegenerateChannel if the effective channel norm is ≤ 1e-14.
    """
    effective = h_k @ v_k
    norm = frobenius_norm(effective)
    if norm <= DEGENERATE_NORM:
        logger.error(f"Effective channel norm {norm:.3e} too small for matched filter")
        raise DegenerateChannel(f"effective channel norm {norm:.3e} <= {DEGENERATE_NORM}")
    return hermitian(effective) / norm


def interference_covariance(others, noise_var, m_k):
    """R_k = σ²I + Σ (HV_i)(HV_i)ᴴ over the interfering (H, V_i) pairs."""
    r = noise_var * np.eye(m_k, dtype=np.complex128)
    for h, v in others:
        e = h @ v
        r = r + e @ hermitian(e)
    return r


def mmse_receiver(h_k, v_k, others, noise_var):
    """
    Multi-user MMSE combiner U_k = (H_kV_k)ᴴ((H_kV_k)(H_kV_k)ᴴ + R_k)⁻¹.
    The M_k x M_k system is Hermitian PD for noise_var > 0 and is solved through its
    Cholesky factor instead of an explicit inverse. No 1/L symbol scaling is applied.

    others: (H, V_i) pairs for every i ≠ k whose product is the interference
    channel observed at user k. Under the signal model that is H_kV_i.
    """
    effective = h_k @ v_k
    m_k = h_k.shape[0]
    total = effective @ hermitian(effective) + interference_covariance(others, noise_var, m_k)
    total = 0.5 * (total + hermitian(total))
    factor = cho_factor(total, lower=True)
    # W Hermitian, so EᴴW⁻¹ = (W⁻¹E)ᴴ
    return hermitian(cho_solve(factor, effective))


def combiner_mse(u_k, h_k, v_k, others, noise_var):
    """
    Per-layer mean-square error E|u_kl y_k − s_kl|² under unit symbol covariance,
    the convention of the MMSE formula above. Returns an array of length L_k.
    """
    effective = h_k @ v_k
    m_k = h_k.shape[0]
    received = effective @ hermitian(effective) + interference_covariance(others, noise_var, m_k)
    quad = np.real(np.einsum("lm,mn,ln->l", u_k, received, np.conj(u_k)))
    cross = np.real(np.einsum("lm,ml->l", u_k, effective))
    return quad - 2.0 * cross + 1.0


def interferers_for(channels, precoders, k):
    return [(channels[k], precoders[i]) for i in range(channels.users) if i != k]


def compute_receivers(channels, precoders, config, receiver_type=None):
    """Builds the configured combiner for every user from the current precoders."""
    receiver_type = ReceiverType(receiver_type or config.receiver)
    matrices = []
    for k in range(channels.users):
        if receiver_type is ReceiverType.MATCHED_FILTER:
            u_k = matched_filter(channels[k], precoders[k])
        else:
            u_k = mmse_receiver(
                channels[k], precoders[k], interferers_for(channels, precoders, k), config.noise_var_of(k)
            )
        matrices.append(u_k)
    return ReceiverSet(matrices=tuple(matrices))
