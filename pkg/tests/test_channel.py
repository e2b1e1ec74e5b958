import math

import pytest

from gspmec.channel import nearest_rates, path_loss_db, uplink_rate_mbps
from gspmec.errors import DomainError
from gspmec.scenario import ChannelParams, UeSpec

import numpy as np

CH = ChannelParams()


def ue_at(x, y=0.0, power=20.0):
    return UeSpec(id=0, tx_power_dbm=power, avg_task_size_mb=(20.0,), budget=20.0, position=(x, y))


def test_loss_at_one_metre_is_offset_plus_carrier_term():
    assert path_loss_db(1.0, CH) == pytest.approx(45.30833066, abs=1e-6)


def test_decade_step_adds_ten_mu_d():
    assert path_loss_db(10.0, CH) - path_loss_db(1.0, CH) == pytest.approx(21.2, abs=1e-12)


@pytest.mark.parametrize("d", [0.0, -3.0, float("nan")])
def test_nonpositive_distance_rejected(d):
    with pytest.raises(DomainError):
        path_loss_db(d, CH)


def test_unit_snr_gives_bandwidth():
    # at 10 m the loss is 66.4917 dB, so P = -100 + loss puts SNR at exactly 1
    p = -100.0 + 21.2 + 29.2 + 21.1 * math.log10(5.8)
    assert uplink_rate_mbps(ue_at(10.0, power=p), (0.0, 0.0), CH) == pytest.approx(80.0, rel=1e-12)


def test_vanishing_power_gives_zero_rate():
    assert uplink_rate_mbps(ue_at(10.0, power=-400.0), (0.0, 0.0), CH) < 1e-20


def test_rate_at_fifty_metres_matches_hand_evaluation():
    # loss 81.3265 dB, SNR ~ 7367 with 20 dBm and -100 dBm noise
    assert uplink_rate_mbps(ue_at(50.0), (0.0, 0.0), CH) == pytest.approx(1027.78049, rel=1e-7)


def test_rate_monotone_in_distance_power_and_bandwidth():
    near = uplink_rate_mbps(ue_at(20.0), (0, 0), CH)
    far = uplink_rate_mbps(ue_at(40.0), (0, 0), CH)
    loud = uplink_rate_mbps(ue_at(40.0, power=23.0), (0, 0), CH)
    wide = uplink_rate_mbps(ue_at(40.0), (0, 0), ChannelParams(bandwidth_mhz=100.0))
    assert near > far and loud > far and wide > far


def test_rate_is_pure():
    a = uplink_rate_mbps(ue_at(33.3, 12.0), (1.0, 2.0), CH)
    b = uplink_rate_mbps(ue_at(33.3, 12.0), (1.0, 2.0), CH)
    assert a == b


def test_nonfinite_position_rejected():
    with pytest.raises(DomainError):
        uplink_rate_mbps(ue_at(float("inf")), (0, 0), CH)


def test_vectorised_rates_match_scalar_to_nearest_ap():
    ues = np.array([[[50.0, 0.0], [0.0, 90.0]]])
    aps = np.array([[0.0, 0.0], [0.0, 100.0]])
    got = nearest_rates(ues, aps, np.array([20.0, 20.0]), CH)
    want0 = uplink_rate_mbps(ue_at(50.0), (0, 0), CH)
    want1 = uplink_rate_mbps(ue_at(0.0, 90.0), (0, 100), CH)
    assert got.shape == (1, 2)
    assert got[0, 0] == pytest.approx(want0, rel=1e-12)
    assert got[0, 1] == pytest.approx(want1, rel=1e-12)
