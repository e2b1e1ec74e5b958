"""Uplink rate model: log-distance path loss plus Shannon capacity.

Loss is computed in dB and converted to a linear power gain before it
enters the SNR; transmit power and noise are given in dBm. There is no
fading and no inter-user interference (each UE holds its own OFDMA
sub-carriers).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import DomainError

if TYPE_CHECKING:
    from .scenario import ChannelParams, UeSpec


@dataclass(frozen=True)
class LinkBudget:
    distance_m: float
    loss_db: float
    rate_mbps: float


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def path_loss_db(distance_m: float, channel: ChannelParams) -> float:
    """Basic transmission loss in dB at ``distance_m`` metres.

    The carrier frequency enters as its GHz figure, as tabulated.
    """
    if not math.isfinite(distance_m) or distance_m <= 0:
        raise DomainError(f"distance must be positive, got {distance_m!r}")
    return (
        10.0 * channel.mu_d * math.log10(distance_m)
        + channel.mu_0
        + 10.0 * channel.mu_f * math.log10(channel.carrier_ghz)
    )


def rate_from_loss(loss_db: float, tx_power_dbm: float, channel: ChannelParams) -> float:
    gain = 10.0 ** (-loss_db / 10.0)
    snr = dbm_to_watts(tx_power_dbm) * gain / dbm_to_watts(channel.noise_dbm)
    return channel.bandwidth_mhz * math.log2(1.0 + snr)


def uplink_rate_mbps(
    ue: UeSpec,
    server_pos: Sequence[float],
    channel: ChannelParams,
    ue_pos: Sequence[float] | None = None,
) -> float:
    """Uplink rate in Mbps from ``ue`` to the access point at ``server_pos``.

    ``ue_pos`` overrides the UE's configured position (used when positions
    are drawn per Monte Carlo replication).
    """
    pos = ue_pos if ue_pos is not None else ue.position
    if pos is None:
        raise DomainError(f"UE {ue.id} has no position")
    values = (*pos, *server_pos, ue.tx_power_dbm)
    if not all(math.isfinite(float(x)) for x in values):
        raise DomainError("non-finite input to uplink_rate_mbps")
    dist = math.hypot(pos[0] - server_pos[0], pos[1] - server_pos[1])
    return rate_from_loss(path_loss_db(dist, channel), ue.tx_power_dbm, channel)


def link_budget(ue: UeSpec, server_pos: Sequence[float], channel: ChannelParams) -> LinkBudget:
    dist = math.hypot(ue.position[0] - server_pos[0], ue.position[1] - server_pos[1])
    loss = path_loss_db(dist, channel)
    return LinkBudget(dist, loss, rate_from_loss(loss, ue.tx_power_dbm, channel))


def nearest_rates(
    ue_xy: np.ndarray,
    ap_xy: np.ndarray,
    tx_power_dbm: np.ndarray,
    channel: ChannelParams,
    min_distance_m: float = 1.0,
) -> np.ndarray:
    """Vectorised rate of each UE to its nearest access point.

    ``ue_xy`` may carry leading batch axes, e.g. ``(replications, J, 2)``.
    Distances are floored at ``min_distance_m`` so a UE dropped on top of
    an access point keeps a finite rate.
    """
    diff = ue_xy[..., None, :] - ap_xy
    dist = np.sqrt((diff**2).sum(axis=-1)).min(axis=-1)
    dist = np.maximum(dist, min_distance_m)
    loss = (
        10.0 * channel.mu_d * np.log10(dist)
        + channel.mu_0
        + 10.0 * channel.mu_f * math.log10(channel.carrier_ghz)
    )
    p_w = 10.0 ** ((np.asarray(tx_power_dbm, dtype=float) - 30.0) / 10.0)
    snr = p_w * 10.0 ** (-loss / 10.0) / dbm_to_watts(channel.noise_dbm)
    return channel.bandwidth_mhz * np.log2(1.0 + snr)
